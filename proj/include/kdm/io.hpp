#pragma once

#include <kdm/common.hpp>
#include <kdm/conditional.hpp>
#include <kdm/estimator.hpp>
#include <kdm/hypothesis.hpp>
#include <kdm/kernels.hpp>
#include <kdm/lowrank.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace kdm::io {

using nlohmann::json;

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;
};

/// Parses a headed, comma-separated numeric file. Non-numeric and non-finite
/// cells are rejected with the file row (header = row 1) and column name.
CsvTable read_csv(const std::filesystem::path& path);

/// Resolves a column selection against a header: comma-separated items, each a
/// 0-based index, an inclusive range "a..b", or a column name. Empty selects all.
std::vector<Index> resolve_columns(const std::vector<std::string>& header, const std::string& selection);

/// Selected columns as a Dataset, z-scored with the transform recorded when `standardize` is set.
Dataset ingest_csv(const std::filesystem::path& path, const std::string& selection = "", bool standardize = false);

JointDataset ingest_joint_csv(const std::filesystem::path& path, const std::string& xcols, const std::string& ycols);

/// Throws std::invalid_argument if `path` exists and `force` is unset.
void ensure_writable(const std::filesystem::path& path, bool force);

/// Full-precision (%.17g) CSV text.
std::string format_csv(const std::vector<std::string>& header, const Matrix& data);
void write_text(const std::filesystem::path& path, const std::string& text, bool force);

json matrix_to_json(const Matrix& m);  // {"rows", "cols", "data" (row-major)}
Matrix matrix_from_json(const json& j);

json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const json& j);
json to_json(const AffineTransform& t);
AffineTransform transform_from_json(const json& j);
json to_json(const CholeskyFactors& f);
json to_json(const TestResult& r);

json to_json(const KdmModel& model);
KdmModel model_from_json(const json& j);

/// Model bundle: CBOR encoding of to_json(model) with a format tag.
void save_model(const std::filesystem::path& path, const KdmModel& model, bool force, const json& provenance = {});
KdmModel load_model(const std::filesystem::path& path);

}  // namespace kdm::io

#include <kdm/io.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kdm::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out(s.substr(a, b - a));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(trim(field));
  return out;
}

bool parse_index(const std::string& s, Index& out) {
  if (s.empty()) return false;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return false;
  out = static_cast<Index>(v);
  return true;
}

constexpr std::string_view kModelFormat = "kdm-model";
constexpr int kModelFormatVersion = 1;

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path.string() + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_fields(line);
  const std::size_t cols = table.header.size();

  std::vector<double> values;
  Index rows = 0;
  std::size_t file_row = 1;
  while (std::getline(in, line)) {
    ++file_row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != cols)
      throw std::invalid_argument(path.string() + ": row " + std::to_string(file_row) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string& cell = fields[c];
      char* end = nullptr;
      const double v = cell.empty() ? 0.0 : std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size())
        throw std::invalid_argument(path.string() + ": row " + std::to_string(file_row) + ", column \"" +
                                    table.header[c] + "\": cannot parse \"" + cell + "\" as a number");
      if (!std::isfinite(v))
        throw std::invalid_argument(path.string() + ": row " + std::to_string(file_row) + ", column \"" +
                                    table.header[c] + "\": non-finite value \"" + cell + "\"");
      values.push_back(v);
    }
    ++rows;
  }
  table.data = Eigen::Map<const RowMatrix>(values.data(), rows, static_cast<Index>(cols));
  return table;
}

std::vector<Index> resolve_columns(const std::vector<std::string>& header, const std::string& selection) {
  const Index cols = static_cast<Index>(header.size());
  std::vector<Index> out;
  if (trim(selection).empty()) {
    for (Index c = 0; c < cols; ++c) out.push_back(c);
    return out;
  }
  std::stringstream ss(selection);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const std::size_t dots = item.find("..");
    Index a = 0;
    Index b = 0;
    if (dots != std::string::npos && parse_index(item.substr(0, dots), a) && parse_index(item.substr(dots + 2), b)) {
      if (a > b) throw std::invalid_argument("column range '" + item + "' is decreasing");
      for (Index c = a; c <= b; ++c) out.push_back(c);
    } else if (parse_index(item, a)) {
      out.push_back(a);
    } else {
      const auto it = std::find(header.begin(), header.end(), item);
      if (it == header.end()) throw std::invalid_argument("no column named '" + item + "'");
      out.push_back(static_cast<Index>(it - header.begin()));
    }
  }
  for (Index c : out)
    if (c >= cols)
      throw std::invalid_argument("column index " + std::to_string(c) + " out of range (" + std::to_string(cols) +
                                  " columns)");
  if (out.empty()) throw std::invalid_argument("column selection '" + selection + "' is empty");
  return out;
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& selection, bool standardize) {
  const CsvTable table = read_csv(path);
  if (table.data.rows() == 0) throw std::invalid_argument("'" + path.string() + "' has no data rows");
  const std::vector<Index> cols = resolve_columns(table.header, selection);
  Dataset ds(table.data(Eigen::all, cols));
  if (standardize) {
    const AffineTransform t = AffineTransform::zscore(ds.points);
    ds.points = t.apply(ds.points);
    ds.transform = t;
  }
  return ds;
}

JointDataset ingest_joint_csv(const std::filesystem::path& path, const std::string& xcols, const std::string& ycols) {
  const CsvTable table = read_csv(path);
  if (table.data.rows() == 0) throw std::invalid_argument("'" + path.string() + "' has no data rows");
  if (trim(xcols).empty() || trim(ycols).empty()) throw std::invalid_argument("joint data needs x and y columns");
  JointDataset joint;
  joint.x = table.data(Eigen::all, resolve_columns(table.header, xcols));
  joint.y = table.data(Eigen::all, resolve_columns(table.header, ycols));
  return joint;
}

void ensure_writable(const std::filesystem::path& path, bool force) {
  if (!force && std::filesystem::exists(path))
    throw std::invalid_argument("'" + path.string() + "' exists; pass --force to overwrite");
}

std::string format_csv(const std::vector<std::string>& header, const Matrix& data) {
  if (static_cast<Index>(header.size()) != data.cols()) throw std::invalid_argument("format_csv: header width");
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  char buf[32];
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", data(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text, bool force) {
  ensure_writable(path, force);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  out << text;
}

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  Matrix m(rows, cols);
  if (data.is_binary()) {
    const auto& bytes = data.get_binary();
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
      throw std::invalid_argument("matrix payload has the wrong size");
    RowMatrix rm(rows, cols);
    if (!bytes.empty()) std::memcpy(rm.data(), bytes.data(), bytes.size());
    m = rm;
    return m;
  }
  if (data.size() != static_cast<std::size_t>(rows * cols)) throw std::invalid_argument("matrix payload has the wrong size");
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

namespace {

// Raw row-major doubles; the bundle stays exact and compact.
json matrix_to_binary(const Matrix& m) {
  const RowMatrix rm = m;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(rm.size()) * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), rm.data(), bytes.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", json::binary(std::move(bytes))}};
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

json to_json(const KernelSpec& spec) {
  return {{"family", std::string(to_string(spec.family))}, {"rho", spec.rho}, {"c", spec.c}, {"q", spec.q}};
}

KernelSpec kernel_from_json(const json& j) {
  KernelSpec spec;
  spec.family = parse_kernel_family(j.at("family").get<std::string>());
  spec.rho = j.value("rho", 1.0);
  spec.c = j.value("c", 0.0);
  spec.q = j.value("q", 1);
  spec.validate();
  return spec;
}

json to_json(const AffineTransform& t) { return {{"shift", vector_to_json(t.shift)}, {"scale", vector_to_json(t.scale)}}; }

AffineTransform transform_from_json(const json& j) {
  AffineTransform t{vector_from_json(j.at("shift")), vector_from_json(j.at("scale"))};
  if (t.shift.size() != t.scale.size()) throw std::invalid_argument("transform: shift and scale lengths differ");
  return t;
}

json to_json(const CholeskyFactors& f) {
  return {{"pivots", f.pivots},
          {"L", matrix_to_json(f.L)},
          {"R", matrix_to_json(f.R)},
          {"epsilon", f.epsilon},
          {"residual_trace", f.residual_trace},
          {"rank", f.rank()},
          {"rank_capped", f.rank_capped}};
}

json to_json(const TestResult& r) {
  json j = {{"statistic", r.statistic},
            {"ell", r.ell},
            {"p_value", r.p_value},
            {"eigenvalues", vector_to_json(r.eigenvalues)},
            {"v_lambda", vector_to_json(r.v_lambda)},
            {"truncation", {{"rule", std::string(to_string(r.truncation.kind))}, {"t", r.truncation.t}}}};
  if (r.bound_check) {
    j["bound_check"] = {{"eta", r.bound_check->eta},
                        {"lhs", r.bound_check->lhs},
                        {"rhs", r.bound_check->rhs},
                        {"satisfied", r.bound_check->satisfied}};
  } else {
    j["bound_check"] = nullptr;
  }
  return j;
}

json to_json(const KdmModel& m) {
  if (m.prior.kind == PriorKind::Custom) throw std::invalid_argument("models with a custom prior cannot be serialized");
  json j = {{"format", kModelFormat},
            {"format_version", kModelFormatVersion},
            {"kernel", to_json(m.kernel)},
            {"lambda", m.lambda},
            {"prior", {{"kind", std::string(to_string(m.prior.kind))}, {"pi_inf", m.prior.pi_inf}}},
            {"n", m.n},
            {"pivots", m.pivots},
            {"pivot_points", matrix_to_binary(m.pivot_points)},
            {"beta", matrix_to_binary(m.beta)},
            {"coordinates", matrix_to_binary(m.coordinates)},
            {"L_P", matrix_to_binary(m.L_P)},
            {"L_Q", matrix_to_binary(m.L_Q)},
            {"R", matrix_to_binary(m.R)},
            {"p_star", matrix_to_binary(m.p_star)},
            {"epsilon", m.epsilon},
            {"residual_trace", m.residual_trace},
            {"rank_capped", m.rank_capped},
            {"kappa_inf", m.kappa_inf},
            {"kappa_empirical", m.kappa_empirical},
            {"prior_bound_violated", m.prior_bound_violated},
            {"warnings", m.warnings}};
  j["transform"] = m.transform ? to_json(*m.transform) : json(nullptr);
  return j;
}

KdmModel model_from_json(const json& j) {
  if (j.value("format", std::string()) != kModelFormat) throw std::invalid_argument("not a model bundle");
  if (j.value("format_version", 0) != kModelFormatVersion) throw std::invalid_argument("unsupported model format version");
  KdmModel m;
  m.kernel = kernel_from_json(j.at("kernel"));
  m.lambda = j.at("lambda").get<double>();
  const PriorKind kind = parse_prior_kind(j.at("prior").at("kind").get<std::string>());
  m.prior = kind == PriorKind::Zero ? PriorSpec::zero() : PriorSpec::one();
  m.prior.pi_inf = j.at("prior").at("pi_inf").get<double>();
  m.n = j.at("n").get<Index>();
  m.pivots = j.at("pivots").get<std::vector<Index>>();
  m.pivot_points = matrix_from_json(j.at("pivot_points"));
  m.beta = matrix_from_json(j.at("beta"));
  m.coordinates = matrix_from_json(j.at("coordinates"));
  m.L_P = matrix_from_json(j.at("L_P"));
  m.L_Q = matrix_from_json(j.at("L_Q"));
  m.R = matrix_from_json(j.at("R"));
  m.p_star = matrix_from_json(j.at("p_star"));
  m.epsilon = j.at("epsilon").get<double>();
  m.residual_trace = j.at("residual_trace").get<double>();
  m.rank_capped = j.at("rank_capped").get<bool>();
  m.kappa_inf = j.at("kappa_inf").get<double>();
  m.kappa_empirical = j.at("kappa_empirical").get<bool>();
  m.prior_bound_violated = j.at("prior_bound_violated").get<bool>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (!j.at("transform").is_null()) m.transform = transform_from_json(j.at("transform"));

  const Index r = m.beta.size();
  if (m.pivot_points.rows() != r || static_cast<Index>(m.pivots.size()) != r || m.R.rows() != r ||
      m.L_P.cols() != r || m.L_Q.cols() != r || m.L_P.rows() != m.n || m.p_star.size() != m.n)
    throw std::invalid_argument("model bundle has inconsistent block sizes");
  return m;
}

void save_model(const std::filesystem::path& path, const KdmModel& model, bool force, const json& provenance) {
  json j = to_json(model);
  if (!provenance.is_null()) j["provenance"] = provenance;
  const std::vector<std::uint8_t> bytes = json::to_cbor(j);
  write_text(path, std::string(bytes.begin(), bytes.end()), force);
}

KdmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    throw std::invalid_argument("'" + path.string() + "' is not a model bundle: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace kdm::io

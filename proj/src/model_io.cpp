#include "macsvm/model_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace macsvm {

using nlohmann::json;

std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double parse_hex_double(const std::string& s) {
  if (s.empty()) throw ParseError("empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw ParseError("bad number '" + s + "'");
  return v;
}

namespace {

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(hex_double(v(i)));
  return a;
}

json matrix_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(hex_double(m(r, c)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

double real_of(const json& j) { return parse_hex_double(j.get<std::string>()); }

Vector vector_of(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = real_of(j[i]);
  return v;
}

Matrix matrix_of(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ParseError("matrix size does not match its data");
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = real_of(data[i++]);
  return m;
}

json config_json(const MacConfig& c) {
  json cc = json::array();
  for (double v : c.class_C) cc.push_back(hex_double(v));
  return {{"L", c.L},
          {"M", c.M},
          {"linear_f", c.linear_f},
          {"sigma", hex_double(c.sigma)},
          {"lambda", hex_double(c.lambda)},
          {"C", hex_double(c.C)},
          {"class_C", cc},
          {"mu0", hex_double(c.mu0)},
          {"mu_factor", hex_double(c.mu_factor)},
          {"mu_max_stages", c.mu_max_stages},
          {"inner_tol", hex_double(c.inner_tol)},
          {"inner_max_iters", c.inner_max_iters},
          {"init", to_string(c.init)},
          {"patience", c.patience},
          {"seed", c.seed},
          {"simplex_scale", hex_double(c.simplex_scale)},
          {"binary_mode", c.binary_mode},
          {"svm_tol", hex_double(c.svm_tol)},
          {"svm_max_epochs", c.svm_max_epochs},
          {"z_tol", hex_double(c.z_tol)},
          {"kmeans_iters", c.kmeans_iters}};
}

MacConfig config_of(const json& j) {
  MacConfig c;
  c.L = j.at("L").get<int>();
  c.M = j.at("M").get<int>();
  c.linear_f = j.at("linear_f").get<bool>();
  c.sigma = real_of(j.at("sigma"));
  c.lambda = real_of(j.at("lambda"));
  c.C = real_of(j.at("C"));
  for (const auto& v : j.at("class_C")) c.class_C.push_back(real_of(v));
  c.mu0 = real_of(j.at("mu0"));
  c.mu_factor = real_of(j.at("mu_factor"));
  c.mu_max_stages = j.at("mu_max_stages").get<int>();
  c.inner_tol = real_of(j.at("inner_tol"));
  c.inner_max_iters = j.at("inner_max_iters").get<int>();
  c.init = init_strategy_from_string(j.at("init").get<std::string>());
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.simplex_scale = real_of(j.at("simplex_scale"));
  c.binary_mode = j.at("binary_mode").get<bool>();
  c.svm_tol = real_of(j.at("svm_tol"));
  c.svm_max_epochs = j.at("svm_max_epochs").get<int>();
  c.z_tol = real_of(j.at("z_tol"));
  c.kmeans_iters = j.at("kmeans_iters").get<int>();
  return c;
}

}  // namespace

std::string model_to_json(const TrainedModel& m) {
  json machines = json::array();
  for (const auto& s : m.svms.machines)
    machines.push_back({{"w", vector_json(s.w)}, {"b", hex_double(s.b)}, {"C", hex_double(s.C)}});
  json collapsed = json::array();
  for (std::size_t k = 0; k < m.collapsed.v.size(); ++k)
    collapsed.push_back({{"v", vector_json(m.collapsed.v[k])}, {"b", hex_double(m.collapsed.b[k])}});

  json j;
  j["format_version"] = kModelFormatVersion;
  j["task"] = {{"K", m.svms.K},
               {"L", m.map.W.rows()},
               {"D", m.input_dim},
               {"M", m.map.W.cols()},
               {"linear_f", m.map.features.linear}};
  j["label_names"] = m.label_names;
  j["standardizer"] = {{"mean", vector_json(m.standardizer.mean)}, {"scale", vector_json(m.standardizer.scale)}};
  j["centers"] = matrix_json(m.map.features.centers.C);
  j["sigma"] = hex_double(m.map.features.centers.sigma);
  j["lambda"] = hex_double(m.map.lambda);
  j["W"] = matrix_json(m.map.W);
  j["machines"] = machines;
  j["collapsed"] = collapsed;
  j["config"] = config_json(m.config);
  j["training"] = {{"stop_reason", m.stop_reason}, {"stages", m.stages}, {"iterations", m.iterations}};
  return j.dump(1) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("format_version")) throw ParseError("model file has no format_version");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw ParseError("model format_version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kModelFormatVersion) + ")");
    TrainedModel m;
    const json& task = j.at("task");
    m.svms.K = task.at("K").get<int>();
    m.input_dim = task.at("D").get<Eigen::Index>();
    m.map.features.linear = task.at("linear_f").get<bool>();
    m.label_names = j.at("label_names").get<std::vector<std::string>>();
    m.standardizer.mean = vector_of(j.at("standardizer").at("mean"));
    m.standardizer.scale = vector_of(j.at("standardizer").at("scale"));
    m.map.features.centers.C = matrix_of(j.at("centers"));
    m.map.features.centers.sigma = real_of(j.at("sigma"));
    m.map.lambda = real_of(j.at("lambda"));
    m.map.W = matrix_of(j.at("W"));
    for (const auto& s : j.at("machines")) {
      BinarySvm svm;
      svm.w = vector_of(s.at("w"));
      svm.b = real_of(s.at("b"));
      svm.C = real_of(s.at("C"));
      m.svms.machines.push_back(std::move(svm));
    }
    m.collapsed.K = m.svms.K;
    for (const auto& c : j.at("collapsed")) {
      m.collapsed.v.push_back(vector_of(c.at("v")));
      m.collapsed.b.push_back(real_of(c.at("b")));
    }
    m.config = config_of(j.at("config"));
    const json& tr = j.at("training");
    m.stop_reason = tr.at("stop_reason").get<std::string>();
    m.stages = tr.at("stages").get<int>();
    m.iterations = tr.at("iterations").get<int>();

    // Structural consistency.
    const Eigen::Index L = m.map.W.rows(), M = m.map.W.cols();
    if (L != task.at("L").get<Eigen::Index>() || M != task.at("M").get<Eigen::Index>())
      throw ParseError("W shape disagrees with task metadata");
    if (m.svms.K < 2 || m.svms.machines.empty()) throw ParseError("model has no classifier");
    if (m.svms.machines.size() != static_cast<std::size_t>(m.svms.K) && !m.svms.binary_mode())
      throw ParseError("machine count does not match K");
    for (const auto& s : m.svms.machines)
      if (s.w.size() != L) throw ParseError("machine weight length disagrees with L");
    if (m.collapsed.v.size() != m.svms.machines.size()) throw ParseError("collapsed classifier size mismatch");
    for (const auto& v : m.collapsed.v)
      if (v.size() != M) throw ParseError("collapsed weight length disagrees with M");
    if (m.map.features.linear ? M != m.input_dim
                              : (m.map.features.centers.C.rows() != M || m.map.features.centers.C.cols() != m.input_dim))
      throw ParseError("basis shape disagrees with task metadata");
    if (!m.standardizer.empty() &&
        (m.standardizer.mean.size() != m.input_dim || m.standardizer.scale.size() != m.input_dim))
      throw ParseError("standardizer length disagrees with D");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is malformed: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model file is malformed: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << model_to_json(model);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

void write_trace(const std::filesystem::path& path, const std::vector<StageRecord>& stages) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "stage,iter,mu,penalty,nested,train_error,val_error\n";
  char line[512];
  for (const auto& s : stages) {
    std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.stage, s.iterations, s.mu, s.penalty,
                  s.nested, s.train_error, s.val_error);
    out << line;
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace macsvm

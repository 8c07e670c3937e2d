// macsvm: spirals | train | predict | eval | gridsearch

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "macsvm/baselines.hpp"
#include "macsvm/data.hpp"
#include "macsvm/model_io.hpp"
#include "macsvm/trainer.hpp"

using namespace macsvm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_real(const std::string& s, const std::string& flag) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) throw UsageError(flag + ": '" + s + "' is not a number");
  return v;
}

int parse_int(const std::string& s, const std::string& flag) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw UsageError(flag + ": '" + s + "' is not an integer");
  return v;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "a..b" expands in decades for reals: 1e-3..1e3 gives 1e-3, 1e-2, ..., 1e3.
std::vector<double> parse_real_grid(const std::string& spec, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split_commas(spec)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_real(item, flag));
      continue;
    }
    const double lo = parse_real(item.substr(0, dots), flag);
    const double hi = parse_real(item.substr(dots + 2), flag);
    if (lo <= 0.0 || hi < lo) throw UsageError(flag + ": range '" + item + "' needs 0 < a <= b");
    const double a = std::log10(lo), b = std::log10(hi);
    const int steps = static_cast<int>(std::floor(b - a + 1e-9));
    for (int i = 0; i <= steps; ++i) out.push_back(std::pow(10.0, std::round((a + i) * 1e9) / 1e9));
  }
  return out;
}

// Integer "a..b" ranges step by one.
std::vector<int> parse_int_grid(const std::string& spec, const std::string& flag) {
  std::vector<int> out;
  for (const auto& item : split_commas(spec)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_int(item, flag));
      continue;
    }
    const int lo = parse_int(item.substr(0, dots), flag);
    const int hi = parse_int(item.substr(dots + 2), flag);
    if (hi < lo) throw UsageError(flag + ": empty range '" + item + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  }
  return out;
}

// Flags shared by train and gridsearch.
struct TrainFlags {
  std::string data, val, model_out, trace_out;
  double val_frac = 0.0;
  std::uint64_t split_seed = 0;
  int label_col = -1;
  bool no_standardize = false;
  std::string sigma = "auto";
  std::string class_C;
  std::string init = "random";
  bool no_binary_mode = false;
  MacConfig cfg;
};

void add_config_flags(CLI::App* cmd, TrainFlags& f, bool grid) {
  cmd->add_option("--data", f.data, "training file (features, label last)")->required();
  cmd->add_option("--val", f.val, "validation file; enables early stopping");
  cmd->add_option("--val-frac", f.val_frac, "hold out this stratified fraction of --data for validation");
  cmd->add_option("--split-seed", f.split_seed, "seed of the validation split");
  cmd->add_option("--label-col", f.label_col, "label column, negative counts from the end");
  cmd->add_flag("--no-standardize", f.no_standardize, "use raw features (default: z-score with training statistics)");
  cmd->add_option("--model-out", f.model_out, "model file to write");
  if (!grid) {
    cmd->add_option("--L", f.cfg.L, "latent dimension");
    cmd->add_option("--M", f.cfg.M, "number of RBF centres (N for one per training point)");
    cmd->add_option("--sigma", f.sigma, "RBF width or 'auto'");
    cmd->add_option("--lambda", f.cfg.lambda, "ridge penalty on W");
    cmd->add_option("--C", f.cfg.C, "SVM hinge penalty");
    cmd->add_option("--trace-out", f.trace_out, "per-stage objective trace (CSV)");
  }
  cmd->add_flag("--linear", f.cfg.linear_f, "linear map F(x) = Wx instead of RBFs");
  cmd->add_option("--class-C", f.class_C, "comma list of per-machine C values");
  cmd->add_option("--mu0", f.cfg.mu0, "initial penalty parameter");
  cmd->add_option("--mu-factor", f.cfg.mu_factor, "penalty growth per stage");
  cmd->add_option("--stages", f.cfg.mu_max_stages, "maximum number of penalty stages");
  cmd->add_option("--inner-tol", f.cfg.inner_tol, "relative objective change ending a stage");
  cmd->add_option("--inner-iters", f.cfg.inner_max_iters, "maximum iterations per stage");
  cmd->add_option("--init", f.init, "Z initialization: random or simplex");
  cmd->add_option("--patience", f.cfg.patience, "stages without validation improvement before stopping");
  cmd->add_option("--seed", f.cfg.seed, "seed for centres and Z initialization");
  cmd->add_option("--simplex-scale", f.cfg.simplex_scale, "vertex spacing of the simplex initialization");
  cmd->add_flag("--no-binary-mode", f.no_binary_mode, "train two machines when K = 2");
  cmd->add_option("--svm-tol", f.cfg.svm_tol, "relative duality gap of the SVM solver");
  cmd->add_option("--svm-epochs", f.cfg.svm_max_epochs, "epoch limit of the SVM solver");
  cmd->add_option("--z-tol", f.cfg.z_tol, "tolerance of the multiclass Z-step");
  cmd->add_option("--kmeans-iters", f.cfg.kmeans_iters, "k-means iteration limit");
}

MacConfig finish_config(const TrainFlags& f, int threads, bool grid) {
  MacConfig cfg = f.cfg;
  cfg.threads = threads;
  if (!grid) cfg.sigma = f.sigma == "auto" ? 0.0 : parse_real(f.sigma, "--sigma");
  if (!grid && f.sigma != "auto" && cfg.sigma <= 0.0) throw UsageError("--sigma must be > 0 or 'auto'");
  try {
    cfg.init = init_strategy_from_string(f.init);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--init: ") + e.what());
  }
  cfg.binary_mode = !f.no_binary_mode;
  if (!f.class_C.empty())
    for (const auto& item : split_commas(f.class_C)) cfg.class_C.push_back(parse_real(item, "--class-C"));
  return cfg;
}

// Labels of `loaded` re-indexed to the class order in `names`.
Dataset align_labels(const LoadedDataset& loaded, const std::vector<std::string>& names, const std::string& what) {
  Dataset ds = loaded.data;
  ds.K = static_cast<int>(names.size());
  for (auto& label : ds.y) {
    const std::string& token = loaded.label_names[static_cast<std::size_t>(label)];
    const auto it = std::find(names.begin(), names.end(), token);
    if (it == names.end()) throw UsageError(what + ": label '" + token + "' does not occur in the training data");
    label = static_cast<int>(it - names.begin());
  }
  return ds;
}

struct PreparedData {
  Dataset train;
  std::optional<Dataset> val;
  std::vector<std::string> names;
  Standardizer standardizer;
};

PreparedData prepare_data(const TrainFlags& f) {
  PreparedData p;
  LoadedDataset loaded = load_delimited(f.data, f.label_col);
  p.names = loaded.label_names;
  p.train = loaded.data;
  if (!f.val.empty() && f.val_frac > 0.0) throw UsageError("--val and --val-frac are mutually exclusive");
  if (!f.val.empty()) {
    p.val = align_labels(load_delimited(f.val, f.label_col), p.names, "--val");
  } else if (f.val_frac > 0.0) {
    if (f.val_frac >= 1.0) throw UsageError("--val-frac must be in (0, 1)");
    auto parts = split(p.train, SplitSpec{{1.0 - f.val_frac, f.val_frac}, f.split_seed});
    p.train = std::move(parts[0]);
    p.val = std::move(parts[1]);
  }
  if (!f.no_standardize) {
    p.standardizer = Standardizer::fit(p.train.X);
    p.train.X = p.standardizer.apply(p.train.X);
    if (p.val) p.val->X = p.standardizer.apply(p.val->X);
  }
  return p;
}

MacResult fit(const MacConfig& cfg, const PreparedData& p) {
  auto observer = [](const StageRecord& s) {
    char line[256];
    std::snprintf(line, sizeof line, "stage %d  mu %.6g  iters %d  penalty %.6g  nested %.6g  train %.4f  val %.4f",
                  s.stage, s.mu, s.iterations, s.penalty, s.nested, s.train_error, s.val_error);
    log_message(2, line);
  };
  MacResult r = train_mac(cfg, p.train, p.val ? &*p.val : nullptr, observer);
  r.model.standardizer = p.standardizer;
  r.model.label_names = p.names;
  return r;
}

double val_error_of(const TrainedModel& m, const PreparedData& p, int threads) {
  if (!p.val) return std::numeric_limits<double>::quiet_NaN();
  // val features are already standardized; predict through the raw path.
  TrainedModel raw = m;
  raw.standardizer = Standardizer{};
  return error_rate(model_predict(raw, p.val->X, threads), p.val->y);
}

double train_error_of(const TrainedModel& m, const PreparedData& p, int threads) {
  TrainedModel raw = m;
  raw.standardizer = Standardizer{};
  return error_rate(model_predict(raw, p.train.X, threads), p.train.y);
}

int cmd_spirals(int K, int n, double noise, double turns, std::uint64_t seed, const std::string& out) {
  if (K < 2) throw UsageError("--k must be >= 2");
  if (n < 2) throw UsageError("--n must be >= 2");
  if (!(noise >= 0.0)) throw UsageError("--noise must be >= 0");
  if (!(turns > 0.0)) throw UsageError("--turns must be > 0");
  const Dataset ds = gen_spirals(SpiralOptions{K, n, noise, turns, seed});
  write_delimited(out, ds);
  return 0;
}

int cmd_train(const TrainFlags& f, int threads) {
  const MacConfig cfg = finish_config(f, threads, false);
  const PreparedData p = prepare_data(f);
  const MacResult r = fit(cfg, p);
  if (!f.model_out.empty()) save_model(f.model_out, r.model);
  if (!f.trace_out.empty()) write_trace(f.trace_out, r.state.history);
  std::printf("train_error %.6f\n", train_error_of(r.model, p, threads));
  if (p.val) std::printf("val_error %.6f\n", val_error_of(r.model, p, threads));
  std::printf("stages %d\niterations %d\nstop %s\n", r.model.stages, r.model.iterations, r.model.stop_reason.c_str());
  return 0;
}

std::string label_name(const TrainedModel& m, int k) {
  return m.label_names.empty() ? std::to_string(k) : m.label_names[static_cast<std::size_t>(k)];
}

int cmd_predict(const std::string& model_path, const std::string& data, const std::string& out, int label_col,
                int threads) {
  const TrainedModel m = load_model(model_path);
  const Matrix X = load_features(data, m.input_dim, label_col);
  const Labels pred = model_predict(m, X, threads);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw std::runtime_error("cannot write '" + out + "'");
  }
  std::ostream& os = out.empty() ? std::cout : file;
  for (int k : pred) os << label_name(m, k) << '\n';
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data, int label_col, int threads) {
  const TrainedModel m = load_model(model_path);
  const LoadedDataset loaded = load_delimited(data, label_col);
  if (loaded.data.dim() != m.input_dim)
    throw UsageError(data + ": " + std::to_string(loaded.data.dim()) + " features, model expects " +
                     std::to_string(m.input_dim));
  std::vector<std::string> names = m.label_names;
  if (names.empty())
    for (int k = 0; k < m.svms.K; ++k) names.push_back(std::to_string(k));
  const Dataset ds = align_labels(loaded, names, data);
  const Labels pred = model_predict(m, ds.X, threads);
  std::printf("error_rate %.3f\n", error_rate(pred, ds.y));
  const int K = m.svms.K;
  std::vector<std::vector<long>> confusion(static_cast<std::size_t>(K), std::vector<long>(static_cast<std::size_t>(K)));
  for (std::size_t n = 0; n < pred.size(); ++n) ++confusion[static_cast<std::size_t>(ds.y[n])][static_cast<std::size_t>(pred[n])];
  std::printf("confusion (rows true, columns predicted)\n");
  for (int t = 0; t < K; ++t) {
    std::printf("%s", names[static_cast<std::size_t>(t)].c_str());
    for (int q = 0; q < K; ++q) std::printf("\t%ld", confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(q)]);
    std::printf("\n");
  }
  return 0;
}

struct GridFlags {
  std::string sigma = "auto", C = "1", lambda = "1e-3", M = "100", L = "2", table_out;
};

long parameter_count(const TrainedModel& m) {
  long count = static_cast<long>(m.map.W.size());
  for (const auto& s : m.svms.machines) count += static_cast<long>(s.w.size()) + 1;
  return count;
}

int cmd_gridsearch(TrainFlags f, const GridFlags& g, int threads) {
  if (f.val.empty() && f.val_frac <= 0.0) f.val_frac = 0.2;
  std::vector<double> sigmas;
  for (const auto& item : split_commas(g.sigma)) {
    if (item == "auto")
      sigmas.push_back(0.0);
    else
      for (double v : parse_real_grid(item, "--sigma-grid")) sigmas.push_back(v);
  }
  const auto Cs = parse_real_grid(g.C, "--C-grid");
  const auto lambdas = parse_real_grid(g.lambda, "--lambda-grid");
  const auto Ms = parse_int_grid(g.M, "--M-grid");
  const auto Ls = parse_int_grid(g.L, "--L-grid");
  if (sigmas.empty() || Cs.empty() || lambdas.empty() || Ms.empty() || Ls.empty())
    throw UsageError("grid is empty");

  const MacConfig base = finish_config(f, threads, true);
  const PreparedData p = prepare_data(f);

  struct Row {
    std::size_t order;
    MacConfig cfg;
    double val_error;
    double train_error;
    long params;
    TrainedModel model;
  };
  std::vector<Row> rows;
  for (int L : Ls)
    for (int M : Ms)
      for (double sigma : sigmas)
        for (double lambda : lambdas)
          for (double C : Cs) {
            MacConfig cfg = base;
            cfg.L = L;
            cfg.M = M;
            cfg.sigma = sigma;
            cfg.lambda = lambda;
            cfg.C = C;
            const MacResult r = fit(cfg, p);
            rows.push_back({rows.size(), cfg, val_error_of(r.model, p, threads), train_error_of(r.model, p, threads),
                            parameter_count(r.model), r.model});
          }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.val_error != b.val_error) return a.val_error < b.val_error;
    if (a.params != b.params) return a.params < b.params;
    return a.order < b.order;
  });

  std::ostringstream table;
  table << "rank\tL\tM\tsigma\tlambda\tC\tparams\ttrain_error\tval_error\n";
  char line[512];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    std::snprintf(line, sizeof line, "%zu\t%d\t%d\t%s\t%.6g\t%.6g\t%ld\t%.6f\t%.6f\n", i + 1, r.cfg.L, r.cfg.M,
                  r.cfg.sigma > 0.0 ? std::to_string(r.cfg.sigma).c_str() : "auto", r.cfg.lambda, r.cfg.C, r.params,
                  r.train_error, r.val_error);
    table << line;
  }
  std::cout << table.str();
  if (!g.table_out.empty()) {
    std::ofstream out(g.table_out);
    if (!out) throw std::runtime_error("cannot write '" + g.table_out + "'");
    out << table.str();
  }
  if (!f.model_out.empty()) save_model(f.model_out, rows.front().model);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-dimensional nonlinear SVM trained jointly with an RBF map"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  int threads = default_thread_count();
  int verbosity = 1;
  app.add_option("--threads", threads, "worker threads (default: MACSVM_THREADS or 1)");
  app.add_flag("-v,--verbose", [&](std::int64_t n) { verbosity = 1 + static_cast<int>(n); }, "progress on stderr");
  app.add_flag("-q,--quiet", [&](std::int64_t) { verbosity = 0; }, "no diagnostics");

  int K = 2, n = 1000;
  double noise = 0.025, turns = 1.5;
  std::uint64_t seed = 0;
  std::string out;
  auto* spirals = app.add_subcommand("spirals", "write a K-spirals data set");
  spirals->add_option("--k", K, "number of classes");
  spirals->add_option("--n", n, "points per class");
  spirals->add_option("--noise", noise, "jitter standard deviation");
  spirals->add_option("--turns", turns, "number of turns");
  spirals->add_option("--seed", seed, "random seed");
  spirals->add_option("--out", out, "output file")->required();

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model");
  add_config_flags(train, train_flags, false);

  std::string model_path, data_path;
  int label_col = -1;
  auto* predict = app.add_subcommand("predict", "write one predicted label per row");
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--data", data_path, "feature file (a label column is ignored)")->required();
  predict->add_option("--out", out, "output file (default stdout)");
  predict->add_option("--label-col", label_col, "label column if present");

  auto* eval = app.add_subcommand("eval", "error rate and confusion counts");
  eval->add_option("--model", model_path, "model file")->required();
  eval->add_option("--data", data_path, "labelled file")->required();
  eval->add_option("--label-col", label_col, "label column");

  TrainFlags grid_flags;
  GridFlags grid;
  auto* gridsearch = app.add_subcommand("gridsearch", "train every grid point and rank by validation error");
  add_config_flags(gridsearch, grid_flags, true);
  gridsearch->add_option("--sigma-grid", grid.sigma, "comma list; 'auto' allowed; a..b expands in decades");
  gridsearch->add_option("--C-grid", grid.C, "comma list; a..b expands in decades");
  gridsearch->add_option("--lambda-grid", grid.lambda, "comma list; a..b expands in decades");
  gridsearch->add_option("--M-grid", grid.M, "comma list; a..b steps by one");
  gridsearch->add_option("--L-grid", grid.L, "comma list; a..b steps by one");
  gridsearch->add_option("--table-out", grid.table_out, "copy of the ranking table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  set_log_level(verbosity);

  try {
    if (threads < 1) throw UsageError("--threads must be >= 1");
    if (*spirals) return cmd_spirals(K, n, noise, turns, seed, out);
    if (*train) return cmd_train(train_flags, threads);
    if (*predict) return cmd_predict(model_path, data_path, out, label_col, threads);
    if (*eval) return cmd_eval(model_path, data_path, label_col, threads);
    if (*gridsearch) return cmd_gridsearch(grid_flags, grid, threads);
  } catch (const NumericError& e) {
    std::cerr << "macsvm: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "macsvm: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

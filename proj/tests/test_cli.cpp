#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "macsvm/data.hpp"
#include "macsvm/model_io.hpp"
#include "support.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

struct Cli {
  testing::TempDir dir;

  std::string path(const std::string& name) const { return (dir / name).string(); }

  Run operator()(const std::string& args) const {
    const std::string cmd = std::string(MACSVM_CLI) + " " + args + " >" + path("stdout") + " 2>" + path("stderr");
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout");
    r.err = slurp(dir / "stderr");
    return r;
  }
};

const std::string kFast = " --M 30 --sigma 0.3 --C 10 --stages 4 --inner-iters 5 -q";

}  // namespace

TEST_CASE("spirals command") {
  Cli cli;
  auto r = cli("spirals --k 2 --n 1000 --out " + cli.path("s.csv"));
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(count_lines(slurp(cli.path("s.csv"))) == 2000);
  const auto a = slurp(cli.path("s.csv"));
  CHECK(cli("spirals --k 2 --n 1000 --out " + cli.path("t.csv")).code == 0);
  CHECK(slurp(cli.path("t.csv")) == a);

  r = cli("spirals --k 1 --out " + cli.path("x.csv"));
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(cli("spirals --k 3 --out /nonexistent/dir/x.csv").code == 2);
  CHECK(cli("spirals --k 3").code == 2);
  CHECK(cli("no-such-command").code == 2);
}

TEST_CASE("train, trace, determinism, predict and eval") {
  Cli cli;
  REQUIRE(cli("spirals --k 2 --n 100 --out " + cli.path("s.csv")).code == 0);

  SUBCASE("missing data") { CHECK(cli("train --L 2").code == 2); }
  SUBCASE("config violation names the flag") {
    const auto r = cli("train --data " + cli.path("s.csv") + " --mu-factor 0.5");
    CHECK(r.code == 2);
    CHECK(r.err.find("mu-factor") != std::string::npos);
  }
  SUBCASE("full flow") {
    const std::string common = "train --data " + cli.path("s.csv") + " --init simplex --mu0 2 --mu-factor 1.5" + kFast;
    auto r = cli(common + " --model-out " + cli.path("m1.json") + " --trace-out " + cli.path("trace.csv"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("train_error") != std::string::npos);
    CHECK(r.err.empty());

    std::istringstream trace(slurp(cli.path("trace.csv")));
    std::string line;
    std::getline(trace, line);
    CHECK(line == "stage,iter,mu,penalty,nested,train_error,val_error");
    std::vector<double> mus;
    while (std::getline(trace, line)) {
      std::istringstream row(line);
      std::string cell;
      std::getline(row, cell, ',');
      std::getline(row, cell, ',');
      std::getline(row, cell, ',');
      mus.push_back(std::stod(cell));
    }
    REQUIRE(mus.size() >= 3);
    CHECK(mus[0] == 2.0);
    CHECK(mus[1] == 3.0);
    CHECK(mus[2] == 4.5);

    REQUIRE(cli(common + " --model-out " + cli.path("m2.json")).code == 0);
    CHECK(slurp(cli.path("m1.json")) == slurp(cli.path("m2.json")));
    REQUIRE(cli(common + " --threads 3 --model-out " + cli.path("m3.json")).code == 0);
    CHECK(slurp(cli.path("m1.json")) == slurp(cli.path("m3.json")));

    r = cli("predict --model " + cli.path("m1.json") + " --data " + cli.path("s.csv") + " --out " + cli.path("p.txt"));
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    const std::string pred = slurp(cli.path("p.txt"));
    CHECK(count_lines(pred) == 200);

    // Error computed from predicted labels equals what eval prints.
    const auto ds = macsvm::load_delimited(cli.path("s.csv"));
    std::istringstream ps(pred);
    long wrong = 0;
    for (std::size_t i = 0; i < ds.data.size(); ++i) {
      std::string label;
      std::getline(ps, label);
      wrong += label != ds.label_names[static_cast<std::size_t>(ds.data.y[i])];
    }
    char expect[64];
    std::snprintf(expect, sizeof expect, "error_rate %.3f", static_cast<double>(wrong) / 200.0);
    r = cli("eval --model " + cli.path("m1.json") + " --data " + cli.path("s.csv"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind(expect, 0) == 0);
    CHECK(r.out.find("confusion") != std::string::npos);

    // Predicting from stdout gives the same labels.
    r = cli("predict --model " + cli.path("m1.json") + " --data " + cli.path("s.csv"));
    CHECK(r.out == pred);

    // Corrupt model.
    std::string text = slurp(cli.path("m1.json"));
    std::ofstream(cli.path("bad.json")) << text.substr(0, text.size() / 3);
    r = cli("eval --model " + cli.path("bad.json") + " --data " + cli.path("s.csv"));
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    std::string wrong_version = text;
    wrong_version.replace(wrong_version.find("\"format_version\": 1"), 19, "\"format_version\": 99");
    std::ofstream(cli.path("v99.json")) << wrong_version;
    r = cli("predict --model " + cli.path("v99.json") + " --data " + cli.path("s.csv"));
    CHECK(r.code == 2);
    CHECK(r.err.find("format_version") != std::string::npos);

    // Dimension mismatch.
    std::ofstream(cli.path("wide.csv")) << "1,2,3,4,0\n5,6,7,8,1\n";
    CHECK(cli("predict --model " + cli.path("m1.json") + " --data " + cli.path("wide.csv")).code == 2);
  }
}

TEST_CASE("validation split and early stopping output") {
  Cli cli;
  REQUIRE(cli("spirals --k 3 --n 60 --out " + cli.path("s.csv")).code == 0);
  const auto r = cli("train --data " + cli.path("s.csv") + " --val-frac 0.25 --L 2 --patience 2" + kFast);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("val_error") != std::string::npos);
  CHECK(r.out.find("stop ") != std::string::npos);
}

TEST_CASE("gridsearch") {
  Cli cli;
  REQUIRE(cli("spirals --k 2 --n 60 --out " + cli.path("s.csv")).code == 0);
  const std::string base = "gridsearch --data " + cli.path("s.csv") + " --M-grid 20 --sigma-grid 0.3 --stages 2 --inner-iters 3 -q";

  auto r = cli(base + " --C-grid 1e-3..1e3 --table-out " + cli.path("table.tsv") + " --model-out " + cli.path("best.json"));
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 8);  // header + 7 rows
  CHECK(slurp(cli.path("table.tsv")) == r.out);
  const auto best = macsvm::load_model(cli.path("best.json"));

  // Rank 1 row carries the saved model's C.
  std::istringstream rows(r.out);
  std::string header, first;
  std::getline(rows, header);
  std::getline(rows, first);
  std::vector<std::string> cells;
  std::istringstream fs(first);
  for (std::string c; std::getline(fs, c, '\t');) cells.push_back(c);
  REQUIRE(cells.size() == 9);
  CHECK(std::stod(cells[5]) == doctest::Approx(best.config.C).epsilon(1e-5));

  // Sorted by validation error.
  double prev = -1.0;
  std::string line;
  std::istringstream all(r.out);
  std::getline(all, line);
  while (std::getline(all, line)) {
    const double v = std::stod(line.substr(line.rfind('\t') + 1));
    CHECK(v >= prev);
    prev = v;
  }

  // A single grid point equals plain training on the same split.
  r = cli(base + " --C-grid 10 --L-grid 2 --lambda-grid 1e-3 --model-out " + cli.path("g.json"));
  REQUIRE(r.code == 0);
  REQUIRE(cli("train --data " + cli.path("s.csv") + " --val-frac 0.2 --M 20 --sigma 0.3 --C 10 --stages 2 --inner-iters 3 -q --model-out " +
              cli.path("t.json"))
              .code == 0);
  CHECK(slurp(cli.path("g.json")) == slurp(cli.path("t.json")));

  CHECK(cli(base + " --C-grid ''").code == 2);
  CHECK(cli(base + " --C-grid abc").code == 2);
}

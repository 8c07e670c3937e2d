#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "macsvm/data.hpp"
#include "support.hpp"

using namespace macsvm;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string error_of(const std::filesystem::path& p) {
  try {
    load_delimited(p);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("spirals sizes") {
  SpiralOptions opt;
  opt.classes = 2;
  opt.per_class = 1000;
  auto ds = gen_spirals(opt);
  CHECK(ds.size() == 2000);
  CHECK(ds.dim() == 2);
  CHECK(ds.K == 2);

  opt.classes = 5;
  opt.per_class = 500;
  ds = gen_spirals(opt);
  CHECK(ds.size() == 2500);
  for (auto c : ds.class_counts()) CHECK(c == 500);
}

TEST_CASE("spirals are deterministic and follow the parametrization when noiseless") {
  SpiralOptions opt;
  opt.classes = 3;
  opt.per_class = 50;
  opt.noise_sd = 0.0;
  opt.seed = 9;
  const auto a = gen_spirals(opt), b = gen_spirals(opt);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);

  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 50; ++i) {
      const double t = i / 49.0;
      const double r = opt.turns * (0.5 + 0.5 * t);
      const double th = 2.0 * M_PI * (opt.turns * t + k / 3.0);
      const auto row = k * 50 + i;
      CHECK(a.y[static_cast<std::size_t>(row)] == k);
      CHECK(a.X(row, 0) == doctest::Approx(r * std::cos(th)).epsilon(1e-12));
      CHECK(a.X(row, 1) == doctest::Approx(r * std::sin(th)).epsilon(1e-12));
    }
}

TEST_CASE("spirals noise depends on seed") {
  SpiralOptions opt;
  opt.per_class = 20;
  opt.seed = 1;
  const auto a = gen_spirals(opt);
  opt.seed = 2;
  const auto b = gen_spirals(opt);
  CHECK(a.X != b.X);
}

TEST_CASE("spirals argument checks") {
  SpiralOptions opt;
  opt.classes = 1;
  CHECK_THROWS_AS(gen_spirals(opt), std::invalid_argument);
  opt = {};
  opt.per_class = 0;
  CHECK_THROWS_AS(gen_spirals(opt), std::invalid_argument);
  opt = {};
  opt.noise_sd = -0.1;
  CHECK_THROWS_AS(gen_spirals(opt), std::invalid_argument);
  opt = {};
  opt.turns = 0.0;
  CHECK_THROWS_AS(gen_spirals(opt), std::invalid_argument);
}

TEST_CASE("delimited loading") {
  testing::TempDir dir;

  SUBCASE("string labels are re-indexed densely") {
    write_text(dir / "a.csv", "1,2,a\n3,4,b\n5,6,a\n");
    const auto ld = load_delimited(dir / "a.csv");
    CHECK(ld.data.y == Labels{0, 1, 0});
    CHECK(ld.data.K == 2);
    CHECK(ld.label_names == std::vector<std::string>{"a", "b"});
    CHECK(ld.data.X(2, 1) == 6.0);
    CHECK_FALSE(ld.had_header);
  }
  SUBCASE("header and tabs are detected") {
    write_text(dir / "t.tsv", "x\ty\tlabel\n0.5\t1\t7\n2\t3\t3\n");
    const auto ld = load_delimited(dir / "t.tsv");
    CHECK(ld.had_header);
    CHECK(ld.data.size() == 2);
    CHECK(ld.label_names == std::vector<std::string>{"7", "3"});
    CHECK(ld.data.X(0, 0) == 0.5);
  }
  SUBCASE("label column chosen explicitly") {
    write_text(dir / "f.csv", "a,1,2\nb,3,4\n");
    const auto ld = load_delimited(dir / "f.csv", 0);
    CHECK(ld.data.dim() == 2);
    CHECK(ld.data.X(1, 0) == 3.0);
    CHECK(ld.data.y == Labels{0, 1});
  }
  SUBCASE("empty file") {
    write_text(dir / "e.csv", "");
    CHECK_THROWS_AS(load_delimited(dir / "e.csv"), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_delimited(dir / "nope.csv"), ParseError); }
  SUBCASE("NaN feature names the cell") {
    write_text(dir / "n.csv", "1,2,a\n3,nan,b\n");
    const auto msg = error_of(dir / "n.csv");
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
  SUBCASE("ragged rows") {
    write_text(dir / "r.csv", "1,2,a\n3,b\n");
    const auto msg = error_of(dir / "r.csv");
    CHECK(msg.find("row 2") != std::string::npos);
  }
  SUBCASE("write then load reproduces the data") {
    SpiralOptions opt;
    opt.classes = 3;
    opt.per_class = 10;
    const auto ds = gen_spirals(opt);
    write_delimited(dir / "s.csv", ds);
    const auto ld = load_delimited(dir / "s.csv");
    CHECK(ld.data.X == ds.X);
    CHECK(ld.data.y == ds.y);
  }
}

TEST_CASE("load_features accepts files with or without the label column") {
  testing::TempDir dir;
  write_text(dir / "l.csv", "1,2,a\n3,4,b\n");
  write_text(dir / "u.csv", "1,2\n3,4\n");
  CHECK(load_features(dir / "l.csv", 2) == load_features(dir / "u.csv", 2));
  CHECK_THROWS_AS(load_features(dir / "u.csv", 3), std::invalid_argument);
}

TEST_CASE("split sizes, disjointness and stratification") {
  // 1162 rows over 3 classes.
  Dataset ds;
  ds.K = 3;
  ds.X.resize(1162, 1);
  for (int i = 0; i < 1162; ++i) {
    ds.X(i, 0) = i;
    ds.y.push_back(i % 3);
  }
  const SplitSpec spec{{0.8, 0.2}, 4};
  const auto idx = split_indices(ds, spec);
  REQUIRE(idx.size() == 2);
  CHECK(idx[0].size() + idx[1].size() == 1162);

  std::vector<std::size_t> all = idx[0];
  all.insert(all.end(), idx[1].begin(), idx[1].end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(1162);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);

  const auto counts = ds.class_counts();
  for (std::size_t part = 0; part < 2; ++part) {
    std::vector<std::size_t> per(3, 0);
    for (auto i : idx[part]) ++per[static_cast<std::size_t>(ds.y[i])];
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(std::abs(static_cast<double>(per[k]) - spec.fractions[part] * static_cast<double>(counts[k])) <= 1.0);
  }

  CHECK(split_indices(ds, spec) == idx);
  const auto parts = split(ds, spec);
  CHECK(parts[0].size() == idx[0].size());
  CHECK(parts[1].X(0, 0) == static_cast<double>(idx[1][0]));
}

TEST_CASE("single-part split is the identity") {
  SpiralOptions opt;
  opt.per_class = 30;
  const auto ds = gen_spirals(opt);
  const auto parts = split(ds, SplitSpec{{1.0}, 0});
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].X == ds.X);
  CHECK(parts[0].y == ds.y);
}

TEST_CASE("split errors") {
  Dataset ds;
  ds.K = 2;
  ds.X = Matrix::Zero(3, 1);
  ds.y = {0, 0, 1};
  CHECK_THROWS_AS(split(ds, SplitSpec{{0.5, 0.5}, 0}), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, SplitSpec{{0.5, 0.4}, 0}), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, SplitSpec{{1.5, -0.5}, 0}), std::invalid_argument);
}

TEST_CASE("dataset validation") {
  Dataset ds;
  ds.K = 2;
  ds.X = Matrix::Zero(2, 1);
  ds.y = {0, 1};
  CHECK_NOTHROW(ds.validate());
  ds.y = {0, 2};
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  ds.y = {0, 1};
  ds.X(0, 0) = std::nan("");
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
}

TEST_CASE("standardizer") {
  Matrix X(3, 2);
  X << 1, 5, 2, 5, 3, 5;
  const auto s = Standardizer::fit(X);
  const Matrix Y = s.apply(X);
  CHECK(Y.col(0).mean() == doctest::Approx(0.0));
  CHECK(Y.col(0).squaredNorm() / 3.0 == doctest::Approx(1.0));
  CHECK(Y.col(1).isZero());
  CHECK(s.scale(1) == 1.0);
  CHECK(Standardizer{}.apply(X) == X);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "macsvm/common.hpp"

namespace macsvm {

/// Labelled point set. X is N x D (one point per row); y holds class indices
/// in [0, K).
struct Dataset {
  Matrix X;
  Labels y;
  int K = 0;

  std::size_t size() const { return y.size(); }
  Eigen::Index dim() const { return X.cols(); }

  /// Throws std::invalid_argument unless N >= 1, y.size() == N, K >= 2,
  /// every label is in [0, K) and X is finite.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

struct SpiralOptions {
  int classes = 2;
  int per_class = 1000;
  double noise_sd = 0.025;
  double turns = 1.5;
  std::uint64_t seed = 0;
};

/// K interleaved Archimedean spirals in 2-D. Point i of class k sits at
/// t = i / (n - 1), radius turns * (0.5 + 0.5 t), angle 2 pi (turns t + k / K),
/// plus isotropic Gaussian jitter of standard deviation noise_sd. Rows are
/// grouped by class.
Dataset gen_spirals(const SpiralOptions& opt);

struct LoadedDataset {
  Dataset data;
  /// label_names[k] is the original token that was mapped to class k.
  std::vector<std::string> label_names;
  bool had_header = false;
};

/// Reads comma- or tab-separated text (tab if the first line contains one).
/// A first row with a non-numeric feature cell is taken as a header. Labels
/// are re-indexed densely in first-appearance order. A negative
/// label_column counts from the end (-1 is the last column).
LoadedDataset load_delimited(const std::filesystem::path& path, int label_column = -1);

/// Feature rows only (no label column); used by prediction.
Matrix load_features(const std::filesystem::path& path, Eigen::Index expected_dim,
                     int label_column = -1);

void write_delimited(const std::filesystem::path& path, const Dataset& ds,
                     const std::vector<std::string>& label_names = {});

struct SplitSpec {
  std::vector<double> fractions;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stratified random partition. Within each class the rows are shuffled and
/// dealt out by largest remainder, so part j holds floor or ceil of
/// fractions[j] * count of every class. Rows keep their original relative
/// order inside each part.
std::vector<Dataset> split(const Dataset& ds, const SplitSpec& spec);
std::vector<std::vector<std::size_t>> split_indices(const Dataset& ds, const SplitSpec& spec);

/// Per-feature z-scoring fitted on one set and reused on others. Constant
/// features get unit scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& X);
  Matrix apply(const Matrix& X) const;
  bool empty() const { return mean.size() == 0; }
};

}  // namespace macsvm

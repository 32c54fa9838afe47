#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "xgen/table.hpp"
#include <nlohmann/json.hpp>

namespace xgen {

// Quantile transform to N(0,1) followed by a z-scale correction.
// The reference is the compressed (value, midrank-probability) curve of
// the training sample, capped at 1000 support points.
struct Gaussianizer {
  std::vector<double> values;  // strictly increasing
  std::vector<double> probs;   // strictly increasing, in (0,1)
  double z_mean = 0.0;
  double z_sd = 1.0;
  bool degenerate = false;     // constant column: everything maps to 0
  double constant = 0.0;

  double transform(double v) const;
  double inverse(double z) const;

  nlohmann::json to_json() const;
  static Gaussianizer from_json(const nlohmann::json& j);
};

Gaussianizer gaussianize_fit(std::span<const double> values);

void clip_to_range(std::span<double> values, double train_min, double train_max);

// Post-merge category bookkeeping for one feature: which original codes
// were kept, where every merged code went, and the empirical distribution
// of originals inside each merged bucket.
struct CategoryMerger {
  int feature = -1;
  int original_cardinality = 0;
  int merged_cardinality = 0;
  std::vector<int> forward;  // original code -> post-merge code
  // Per post-merge code: (original codes, probabilities). Kept codes have a
  // single original with probability 1.
  std::vector<std::vector<int>> members;
  std::vector<std::vector<double>> weights;
  std::vector<std::string> original_codebook;

  bool identity() const { return original_cardinality == merged_cardinality; }

  nlohmann::json to_json() const;
  static CategoryMerger from_json(const nlohmann::json& j);
};

enum class MergeStrategy { cluster, naive };

// Row embedding used for category clustering and Gower-style distances:
// numericals min-max scaled to [0,1], categoricals one-hot with hot value 1/2.
std::vector<double> mean_vector_embed(const Table& t, size_t row,
                                      const std::vector<std::pair<double, double>>& numeric_ranges);

struct KMedoidsResult {
  std::vector<int> assignment;
  std::vector<int> medoids;
  double cost = 0.0;
};

KMedoidsResult kmedoids_l1(const std::vector<std::vector<double>>& points, size_t k, uint64_t seed);

std::pair<Table, CategoryMerger> limit_cardinality(const Table& t, size_t feature, int K_max,
                                                   int K_c, MergeStrategy strategy, uint64_t seed);

Table restore_categories(const Table& t, const CategoryMerger& merger, uint64_t seed);

}  // namespace xgen

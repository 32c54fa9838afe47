#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xgen/table.hpp"
#include <nlohmann/json.hpp>

namespace xgen {

enum class Objective { squared_error, binary_logistic, softmax };

struct GbdtParams {
  int n_rounds = 100;
  int max_depth = 7;
  double learning_rate = 0.3;
  double lambda_l2 = 0.0;
  double min_child_weight = 1.0;
  double gamma = 0.0;
  Objective objective = Objective::squared_error;
  int n_classes = 0;  // softmax only

  void validate() const;
};

// Dense column-major design matrix for the learner. NaN marks a missing
// numerical value, -1 a missing categorical code.
struct FeatureMatrix {
  size_t n_rows = 0;
  std::vector<ColumnKind> kinds;
  std::vector<int> cardinality;          // categorical columns only
  std::vector<std::vector<float>> num;   // per numerical column
  std::vector<std::vector<int>> cat;     // per categorical column

  size_t n_cols() const { return kinds.size(); }
  void add_numerical(std::vector<float> values);
  void add_categorical(std::vector<int> codes, int K);
  static FeatureMatrix from_table(const Table& t, int skip_col = -1);
};

struct TreeNode {
  bool is_leaf = true;
  double value = 0.0;        // leaf weight, learning rate already applied
  int feature = -1;
  double threshold = 0.0;    // numerical split: value < threshold goes left
  std::vector<uint8_t> go_left;  // categorical split: per-code route (1=left)
  std::vector<uint8_t> seen;     // codes observed at this node during training
  bool default_left = true;      // route for missing / unseen codes
  int left = -1, right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict_row(const FeatureMatrix& X, size_t row) const;
  int depth() const;
};

struct GbdtModel {
  GbdtParams params;
  std::vector<double> base_score;  // size 1, or n_classes for softmax
  std::vector<Tree> trees;         // softmax: round-major, n_classes per round
  std::vector<ColumnKind> feature_kinds;

  // Raw margins (pre-link). Shape: n_rows x n_outputs.
  std::vector<std::vector<double>> predict_margin(const FeatureMatrix& X) const;
  // squared_error: raw sums.
  std::vector<double> predict(const FeatureMatrix& X) const;
  // binary_logistic: P(y=1). softmax: per-row probability vectors.
  std::vector<double> predict_binary(const FeatureMatrix& X) const;
  std::vector<std::vector<double>> predict_proba(const FeatureMatrix& X) const;

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);
};

// Deterministic second-order gradient boosting with exact greedy splits.
// Numerical columns with more than 50k rows are pre-quantized to 256
// quantile bins before the same exact search runs on bin representatives.
GbdtModel fit(const FeatureMatrix& X, std::span<const double> y,
              const GbdtParams& params, uint64_t seed);

// Test hook: best split gain at the root for a given feature, or a
// negative value when no admissible split exists.
double root_split_gain(const FeatureMatrix& X, std::span<const double> grad,
                       std::span<const double> hess, const GbdtParams& params,
                       size_t feature);

}  // namespace xgen

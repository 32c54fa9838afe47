#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "xgen/table.hpp"

namespace xgen {

// Mixed-type distance space: numerical gaps are min-max scaled by the real
// data's ranges and clamped to [0,1]; a categorical mismatch contributes 1.
struct GowerSpace {
  Schema schema;
  std::vector<double> mins;
  std::vector<double> maxs;

  static GowerSpace from(const Table& real);
  double dist(const Table& a, size_t ia, const Table& b, size_t ib) const;
};

struct MleScores {
  bool classification = false;
  bool degenerate = false;  // single-class training target
  double rocauc = 0.5;
  double f1 = 0.0;
  double r2 = 0.0;
  double rmse = 0.0;
};

// Marginal fidelity: mean over features of the KS complement (numerical)
// or the total-variation complement (categorical).
double shape(const Table& real, const Table& syn);

// Bivariate fidelity averaged over all feature pairs. Numerical pairs compare
// Pearson correlations; pairs involving a categorical compare joint
// contingency distributions, cutting numericals into 10 equal-width bins over
// the real range.
double trend(const Table& real, const Table& syn);

// ROCAUC of a tuned real-vs-synthetic classifier on the held-out pair
// (0.5 = indistinguishable, lower is better fidelity).
double detection(const Table& real_train, const Table& real_test, const Table& syn_train,
                 const Table& syn_test, uint64_t seed);

double gower(const Table& a, size_t ia, const Table& b, size_t ib, const GowerSpace& space);

// Quantile-support precision/recall curves around medoid centers.
std::pair<double, double> precision_recall(const Table& real, const Table& syn,
                                           const GowerSpace& space, uint64_t seed,
                                           int n_alphas = 30);

// Train-on-`train`, tune-on-`valid`, test-on-`test` predictor quality for one
// target column. Pass the real training table to get the reference row.
MleScores mle(const Table& train, const Table& valid, const Table& test, size_t target,
              bool classification, uint64_t seed);

// min(1, 2(1 - |D|)) where |D| is the fraction of synthetic points strictly
// closer to the training set than to the test set.
double dcr(const Table& train, const Table& test, const Table& syn, const GowerSpace& space,
           uint64_t seed);

// Rank-based ROCAUC with midrank tie handling; labels are 0/1.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace xgen

#include "xgen/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xgen/parallel.hpp"

namespace xgen {

void GbdtParams::validate() const {
  if (n_rounds < 1) throw std::invalid_argument("n_rounds >= 1 required");
  if (max_depth < 1) throw std::invalid_argument("max_depth >= 1 required");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw std::invalid_argument("learning_rate must lie in (0, 1]");
  if (lambda_l2 < 0 || min_child_weight < 0 || gamma < 0)
    throw std::invalid_argument("regularizers must be nonnegative");
  if (objective == Objective::softmax && n_classes < 1)
    throw std::invalid_argument("softmax requires n_classes >= 1");
}

void FeatureMatrix::add_numerical(std::vector<float> values) {
  if (kinds.empty()) n_rows = values.size();
  kinds.push_back(ColumnKind::numerical);
  cardinality.push_back(0);
  num.push_back(std::move(values));
  cat.emplace_back();
}

void FeatureMatrix::add_categorical(std::vector<int> codes, int K) {
  if (kinds.empty()) n_rows = codes.size();
  kinds.push_back(ColumnKind::categorical);
  cardinality.push_back(K);
  cat.push_back(std::move(codes));
  num.emplace_back();
}

FeatureMatrix FeatureMatrix::from_table(const Table& t, int skip_col) {
  FeatureMatrix X;
  X.n_rows = t.n_rows;
  for (size_t j = 0; j < t.n_cols(); ++j) {
    if (static_cast<int>(j) == skip_col) continue;
    if (t.is_num(j)) {
      std::vector<float> col(t.num[j].begin(), t.num[j].end());
      X.add_numerical(std::move(col));
    } else {
      X.add_categorical(t.cat[j], t.cardinality(j));
    }
  }
  X.n_rows = t.n_rows;
  return X;
}

double Tree::predict_row(const FeatureMatrix& X, size_t row) const {
  int i = 0;
  for (;;) {
    const TreeNode& nd = nodes[i];
    if (nd.is_leaf) return nd.value;
    bool go_left;
    if (X.kinds[nd.feature] == ColumnKind::numerical) {
      float v = X.num[nd.feature][row];
      go_left = std::isnan(v) ? nd.default_left : v < nd.threshold;
    } else {
      int code = X.cat[nd.feature][row];
      if (code < 0 || code >= static_cast<int>(nd.seen.size()) || !nd.seen[code])
        go_left = nd.default_left;
      else
        go_left = nd.go_left[code] != 0;
    }
    i = go_left ? nd.left : nd.right;
  }
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int out = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_leaf) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    } else {
      out = std::max(out, d[i]);
    }
  }
  return out;
}

namespace {

struct Split {
  double gain = -1.0;
  int feature = -1;
  bool is_cat = false;
  double threshold = 0.0;
  std::vector<uint8_t> go_left, seen;
  bool default_left = true;
};

double leaf_objective(double G, double H, double lambda) {
  return G * G / (H + lambda);
}

// Best numerical split for one feature over the node's rows. `sorted` holds
// the node's rows with non-missing values first in ascending value order and
// missing-value rows at the tail; it is built once per fit and kept ordered
// through partitions, so no sorting happens here.
void scan_numerical(const std::vector<float>& col, std::span<const int> sorted,
                    std::span<const double> grad, std::span<const double> hess,
                    const GbdtParams& p, double G, double H, int feature, Split* best) {
  size_t n_present = sorted.size();
  double Gm = 0, Hm = 0;  // missing
  while (n_present > 0 && std::isnan(col[sorted[n_present - 1]])) {
    --n_present;
    Gm += grad[sorted[n_present]];
    Hm += hess[sorted[n_present]];
  }
  if (n_present < 2) return;
  const double parent = leaf_objective(G, H, p.lambda_l2);
  // With no missing rows both default directions give the same gain, and the
  // first (left) wins the strict comparison; skip the duplicate pass.
  const int ml_last = (Gm == 0 && Hm == 0) ? 1 : 0;
  double GL = 0, HL = 0;
  for (size_t i = 0; i + 1 < n_present; ++i) {
    GL += grad[sorted[i]];
    HL += hess[sorted[i]];
    float v = col[sorted[i]], vn = col[sorted[i + 1]];
    if (vn <= v) continue;  // no boundary between equal values
    double thr = 0.5 * (static_cast<double>(v) + static_cast<double>(vn));
    for (int missing_left = 1; missing_left >= ml_last; --missing_left) {
      double gl = GL + (missing_left ? Gm : 0.0);
      double hl = HL + (missing_left ? Hm : 0.0);
      double gr = G - gl, hr = H - hl;
      if (hl < p.min_child_weight || hr < p.min_child_weight) continue;
      double gain = 0.5 * (leaf_objective(gl, hl, p.lambda_l2) +
                           leaf_objective(gr, hr, p.lambda_l2) - parent) - p.gamma;
      if (gain > best->gain) {
        best->gain = gain;
        best->feature = feature;
        best->is_cat = false;
        best->threshold = thr;
        best->default_left = missing_left != 0;
      }
    }
  }
}

// Best categorical split: one-vs-rest over every present code, then
// prefix cuts of the gradient-ratio-sorted code order.
void scan_categorical(const std::vector<int>& col, int K, std::span<const int> rows,
                      std::span<const double> grad, std::span<const double> hess,
                      const GbdtParams& p, double G, double H, int feature, Split* best) {
  std::vector<double> Gc(K, 0.0), Hc(K, 0.0);
  std::vector<int> count(K, 0);
  double Gm = 0, Hm = 0;
  for (int r : rows) {
    int c = col[r];
    if (c < 0) { Gm += grad[r]; Hm += hess[r]; }
    else { Gc[c] += grad[r]; Hc[c] += hess[r]; ++count[c]; }
  }
  std::vector<int> present;
  for (int c = 0; c < K; ++c)
    if (count[c] > 0) present.push_back(c);
  if (present.size() < 2) return;
  const double parent = leaf_objective(G, H, p.lambda_l2);

  const int ml_last = (Gm == 0 && Hm == 0) ? 1 : 0;
  auto consider = [&](double gl, double hl, const std::vector<uint8_t>& go_left) {
    for (int missing_left = 1; missing_left >= ml_last; --missing_left) {
      double l_g = gl + (missing_left ? Gm : 0.0);
      double l_h = hl + (missing_left ? Hm : 0.0);
      double r_g = G - l_g, r_h = H - l_h;
      if (l_h < p.min_child_weight || r_h < p.min_child_weight) continue;
      double gain = 0.5 * (leaf_objective(l_g, l_h, p.lambda_l2) +
                           leaf_objective(r_g, r_h, p.lambda_l2) - parent) - p.gamma;
      if (gain > best->gain) {
        best->gain = gain;
        best->feature = feature;
        best->is_cat = true;
        best->go_left = go_left;
        best->default_left = missing_left != 0;
        best->seen.assign(K, 0);
        for (int c : present) best->seen[c] = 1;
      }
    }
  };

  std::vector<uint8_t> mask(K, 0);
  for (int c : present) {
    std::fill(mask.begin(), mask.end(), 0);
    mask[c] = 1;
    consider(Gc[c], Hc[c], mask);
  }

  std::vector<int> order = present;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double ra = Gc[a] / (Hc[a] + p.lambda_l2), rb = Gc[b] / (Hc[b] + p.lambda_l2);
    return ra < rb || (ra == rb && a < b);  // code index keeps ties deterministic
  });
  std::fill(mask.begin(), mask.end(), 0);
  double GL = 0, HL = 0;
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    mask[order[i]] = 1;
    GL += Gc[order[i]];
    HL += Hc[order[i]];
    consider(GL, HL, mask);
  }
}

// Per-feature row orders for one node: sorted[j] is empty for categorical
// features and otherwise lists the node's rows, non-missing ascending by
// value with missing rows at the tail.
using SortedRows = std::vector<std::vector<int>>;

SortedRows presort(const FeatureMatrix& X) {
  SortedRows sorted(X.n_cols());
  parallel_for(X.n_cols(), [&](size_t j) {
    if (X.kinds[j] != ColumnKind::numerical) return;
    const std::vector<float>& col = X.num[j];
    std::vector<int>& s = sorted[j];
    s.reserve(X.n_rows);
    for (size_t r = 0; r < X.n_rows; ++r)
      if (!std::isnan(col[r])) s.push_back(static_cast<int>(r));
    std::sort(s.begin(), s.end(), [&](int a, int b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
    for (size_t r = 0; r < X.n_rows; ++r)
      if (std::isnan(col[r])) s.push_back(static_cast<int>(r));
  });
  return sorted;
}

Split best_split(const FeatureMatrix& X, std::span<const int> rows, const SortedRows& sorted,
                 std::span<const double> grad, std::span<const double> hess,
                 const GbdtParams& p, double G, double H) {
  std::vector<Split> per_feature(X.n_cols());
  parallel_for(X.n_cols(), [&](size_t j) {
    if (X.kinds[j] == ColumnKind::numerical)
      scan_numerical(X.num[j], sorted[j], grad, hess, p, G, H, static_cast<int>(j),
                     &per_feature[j]);
    else
      scan_categorical(X.cat[j], X.cardinality[j], rows, grad, hess, p, G, H,
                       static_cast<int>(j), &per_feature[j]);
  });
  Split best;
  for (auto& s : per_feature)
    if (s.gain > best.gain) best = std::move(s);  // feature order breaks ties
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, const SortedRows& root_sorted,
              std::span<const double> grad, std::span<const double> hess, const GbdtParams& p,
              std::vector<double>* leaf_of_row = nullptr)
      : X_(X), root_sorted_(root_sorted), grad_(grad), hess_(hess), p_(p),
        leaf_of_row_(leaf_of_row) {}

  Tree build() {
    std::vector<int> rows(X_.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    tree_.nodes.clear();
    grow(std::move(rows), root_sorted_, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int> rows, SortedRows sorted, int depth) {
    double G = 0, H = 0;
    for (int r : rows) { G += grad_[r]; H += hess_[r]; }
    int idx = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (depth < p_.max_depth && rows.size() >= 2) {
      Split s = best_split(X_, rows, sorted, grad_, hess_, p_, G, H);
      if (s.gain > 1e-12) {
        auto left_of = [&](int r) {
          if (!s.is_cat) {
            float v = X_.num[s.feature][r];
            return std::isnan(v) ? s.default_left : v < s.threshold;
          }
          int c = X_.cat[s.feature][r];
          return c < 0 ? s.default_left : s.go_left[c] != 0;
        };
        std::vector<int> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (int r : rows) (left_of(r) ? left_rows : right_rows).push_back(r);
        if (!left_rows.empty() && !right_rows.empty()) {
          rows.clear();
          rows.shrink_to_fit();
          // Stable partition keeps each child's per-feature order sorted.
          SortedRows left_sorted(sorted.size()), right_sorted(sorted.size());
          for (size_t j = 0; j < sorted.size(); ++j) {
            if (sorted[j].empty()) continue;
            left_sorted[j].reserve(left_rows.size());
            right_sorted[j].reserve(right_rows.size());
            for (int r : sorted[j])
              (left_of(r) ? left_sorted[j] : right_sorted[j]).push_back(r);
            sorted[j].clear();
            sorted[j].shrink_to_fit();
          }
          int l = grow(std::move(left_rows), std::move(left_sorted), depth + 1);
          int r = grow(std::move(right_rows), std::move(right_sorted), depth + 1);
          TreeNode& nd = tree_.nodes[idx];
          nd.is_leaf = false;
          nd.feature = s.feature;
          nd.threshold = s.threshold;
          nd.go_left = std::move(s.go_left);
          nd.seen = std::move(s.seen);
          nd.default_left = s.default_left;
          nd.left = l;
          nd.right = r;
          return idx;
        }
      }
    }
    double value = -G / (H + p_.lambda_l2) * p_.learning_rate;
    tree_.nodes[idx].is_leaf = true;
    tree_.nodes[idx].value = value;
    if (leaf_of_row_)
      for (int r : rows) (*leaf_of_row_)[r] = value;
    return idx;
  }

  const FeatureMatrix& X_;
  const SortedRows& root_sorted_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbdtParams& p_;
  std::vector<double>* leaf_of_row_;
  Tree tree_;
};

constexpr size_t kHistogramRowThreshold = 50000;
constexpr int kHistogramBins = 256;

// Collapse a large numerical column onto quantile bin upper edges; the
// exact-greedy scan on collapsed values is then equivalent to histogram
// splitting with thresholds at bin boundaries.
FeatureMatrix quantize_large(const FeatureMatrix& X) {
  FeatureMatrix Q = X;
  for (size_t j = 0; j < Q.n_cols(); ++j) {
    if (Q.kinds[j] != ColumnKind::numerical) continue;
    std::vector<float> sorted;
    sorted.reserve(Q.num[j].size());
    for (float v : Q.num[j])
      if (!std::isnan(v)) sorted.push_back(v);
    if (sorted.size() <= kHistogramBins) continue;
    std::sort(sorted.begin(), sorted.end());
    std::vector<float> edges;
    edges.reserve(kHistogramBins);
    for (int b = 1; b < kHistogramBins; ++b) {
      size_t i = sorted.size() * static_cast<size_t>(b) / kHistogramBins;
      edges.push_back(sorted[i]);
    }
    edges.push_back(sorted.back());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (float& v : Q.num[j]) {
      if (std::isnan(v)) continue;
      auto it = std::lower_bound(edges.begin(), edges.end(), v);
      v = it == edges.end() ? edges.back() : *it;
    }
  }
  return Q;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

GbdtModel fit(const FeatureMatrix& X, std::span<const double> y,
              const GbdtParams& params, uint64_t /*seed*/) {
  params.validate();
  const size_t n = X.n_rows;
  if (n == 0 || y.size() != n) throw std::invalid_argument("fit: empty data or |y| mismatch");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite target");

  GbdtModel model;
  model.params = params;
  model.feature_kinds = X.kinds;

  const FeatureMatrix* Xp = &X;
  FeatureMatrix quantized;
  if (n > kHistogramRowThreshold) {
    quantized = quantize_large(X);
    Xp = &quantized;
  }

  const int K = params.objective == Objective::softmax ? params.n_classes : 1;

  if (params.objective == Objective::squared_error) {
    double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    model.base_score = {mean};
  } else if (params.objective == Objective::binary_logistic) {
    double pos = 0;
    for (double v : y) pos += v;
    double p = std::clamp(pos / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
    model.base_score = {std::log(p / (1.0 - p))};
  } else {
    std::vector<double> prior(K, 0.0);
    for (double v : y) {
      int c = static_cast<int>(v);
      if (c < 0 || c >= K) throw std::invalid_argument("fit: softmax code out of range");
      prior[c] += 1.0;
    }
    model.base_score.resize(K);
    for (int k = 0; k < K; ++k)
      model.base_score[k] = std::log(std::max(prior[k] / static_cast<double>(n), 1e-12));
  }

  // margin[k][i]
  std::vector<std::vector<double>> margin(K, std::vector<double>(n));
  for (int k = 0; k < K; ++k)
    std::fill(margin[k].begin(), margin[k].end(), model.base_score[k]);

  const SortedRows root_sorted = presort(*Xp);

  std::vector<double> grad(n), hess(n), leaf_of_row(n);
  std::vector<std::vector<double>> prob;
  if (params.objective == Objective::softmax) prob.assign(K, std::vector<double>(n));

  for (int round = 0; round < params.n_rounds; ++round) {
    if (params.objective == Objective::softmax) {
      for (size_t i = 0; i < n; ++i) {
        double mx = margin[0][i];
        for (int k = 1; k < K; ++k) mx = std::max(mx, margin[k][i]);
        double z = 0;
        for (int k = 0; k < K; ++k) z += std::exp(margin[k][i] - mx);
        for (int k = 0; k < K; ++k) prob[k][i] = std::exp(margin[k][i] - mx) / z;
      }
    }
    for (int k = 0; k < K; ++k) {
      switch (params.objective) {
        case Objective::squared_error:
          for (size_t i = 0; i < n; ++i) { grad[i] = margin[0][i] - y[i]; hess[i] = 1.0; }
          break;
        case Objective::binary_logistic:
          for (size_t i = 0; i < n; ++i) {
            double p = sigmoid(margin[0][i]);
            grad[i] = p - y[i];
            hess[i] = std::max(p * (1.0 - p), 1e-16);
          }
          break;
        case Objective::softmax:
          for (size_t i = 0; i < n; ++i) {
            double p = prob[k][i];
            grad[i] = p - (static_cast<int>(y[i]) == k ? 1.0 : 0.0);
            hess[i] = std::max(p * (1.0 - p), 1e-16);
          }
          break;
      }
      Tree tree = TreeBuilder(*Xp, root_sorted, grad, hess, params, &leaf_of_row).build();
      for (size_t i = 0; i < n; ++i) margin[k][i] += leaf_of_row[i];
      model.trees.push_back(std::move(tree));
    }
  }
  return model;
}

std::vector<std::vector<double>> GbdtModel::predict_margin(const FeatureMatrix& X) const {
  const int K = params.objective == Objective::softmax ? params.n_classes : 1;
  std::vector<std::vector<double>> margin(X.n_rows, std::vector<double>(K));
  // Tree-major over row blocks: each tree is walked by many rows while its
  // nodes are hot instead of streaming the whole ensemble once per row.
  constexpr size_t kBlock = 2048;
  const size_t n_blocks = (X.n_rows + kBlock - 1) / kBlock;
  parallel_for(n_blocks, [&](size_t b) {
    const size_t lo = b * kBlock, hi = std::min(X.n_rows, lo + kBlock);
    for (size_t i = lo; i < hi; ++i)
      for (int k = 0; k < K; ++k) margin[i][k] = base_score[k];
    for (size_t t = 0; t < trees.size(); ++t)
      for (size_t i = lo; i < hi; ++i)
        margin[i][static_cast<int>(t) % K] += trees[t].predict_row(X, i);
  });
  return margin;
}

std::vector<double> GbdtModel::predict(const FeatureMatrix& X) const {
  auto margin = predict_margin(X);
  std::vector<double> out(X.n_rows);
  for (size_t i = 0; i < X.n_rows; ++i) out[i] = margin[i][0];
  return out;
}

std::vector<double> GbdtModel::predict_binary(const FeatureMatrix& X) const {
  auto margin = predict_margin(X);
  std::vector<double> out(X.n_rows);
  for (size_t i = 0; i < X.n_rows; ++i) out[i] = sigmoid(margin[i][0]);
  return out;
}

std::vector<std::vector<double>> GbdtModel::predict_proba(const FeatureMatrix& X) const {
  auto margin = predict_margin(X);
  const int K = params.n_classes;
  std::vector<std::vector<double>> out(X.n_rows, std::vector<double>(K));
  for (size_t i = 0; i < X.n_rows; ++i) {
    double mx = margin[i][0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, margin[i][k]);
    double z = 0;
    for (int k = 0; k < K; ++k) z += std::exp(margin[i][k] - mx);
    for (int k = 0; k < K; ++k) out[i][k] = std::exp(margin[i][k] - mx) / z;
  }
  return out;
}

double root_split_gain(const FeatureMatrix& X, std::span<const double> grad,
                       std::span<const double> hess, const GbdtParams& params,
                       size_t feature) {
  std::vector<int> rows(X.n_rows);
  std::iota(rows.begin(), rows.end(), 0);
  double G = std::accumulate(grad.begin(), grad.end(), 0.0);
  double H = std::accumulate(hess.begin(), hess.end(), 0.0);
  Split s;
  if (X.kinds[feature] == ColumnKind::numerical)
    scan_numerical(X.num[feature], presort(X)[feature], grad, hess, params, G, H,
                   static_cast<int>(feature), &s);
  else
    scan_categorical(X.cat[feature], X.cardinality[feature], rows, grad, hess, params, G, H,
                     static_cast<int>(feature), &s);
  return s.gain;
}

namespace {

nlohmann::json node_to_json(const TreeNode& nd) {
  nlohmann::json j;
  if (nd.is_leaf) {
    j["value"] = nd.value;
    return j;
  }
  j["feature"] = nd.feature;
  j["left"] = nd.left;
  j["right"] = nd.right;
  j["default_left"] = nd.default_left;
  if (!nd.go_left.empty()) {
    j["go_left"] = nd.go_left;
    j["seen"] = nd.seen;
  } else {
    j["threshold"] = nd.threshold;
  }
  return j;
}

TreeNode node_from_json(const nlohmann::json& j) {
  TreeNode nd;
  if (j.contains("value")) {
    nd.value = j["value"].get<double>();
    return nd;
  }
  nd.is_leaf = false;
  nd.feature = j["feature"].get<int>();
  nd.left = j["left"].get<int>();
  nd.right = j["right"].get<int>();
  nd.default_left = j["default_left"].get<bool>();
  if (j.contains("go_left")) {
    nd.go_left = j["go_left"].get<std::vector<uint8_t>>();
    nd.seen = j["seen"].get<std::vector<uint8_t>>();
  } else {
    nd.threshold = j["threshold"].get<double>();
  }
  return nd;
}

}  // namespace

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["objective"] = static_cast<int>(params.objective);
  j["n_rounds"] = params.n_rounds;
  j["max_depth"] = params.max_depth;
  j["learning_rate"] = params.learning_rate;
  j["lambda_l2"] = params.lambda_l2;
  j["min_child_weight"] = params.min_child_weight;
  j["gamma"] = params.gamma;
  j["n_classes"] = params.n_classes;
  j["base_score"] = base_score;
  std::vector<int> kinds;
  for (auto k : feature_kinds) kinds.push_back(static_cast<int>(k));
  j["feature_kinds"] = kinds;
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& tree : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes) nodes.push_back(node_to_json(nd));
    trees_json.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees_json);
  return j;
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported model version");
  GbdtModel m;
  m.params.objective = static_cast<Objective>(j["objective"].get<int>());
  m.params.n_rounds = j["n_rounds"].get<int>();
  m.params.max_depth = j["max_depth"].get<int>();
  m.params.learning_rate = j["learning_rate"].get<double>();
  m.params.lambda_l2 = j["lambda_l2"].get<double>();
  m.params.min_child_weight = j["min_child_weight"].get<double>();
  m.params.gamma = j["gamma"].get<double>();
  m.params.n_classes = j["n_classes"].get<int>();
  m.base_score = j["base_score"].get<std::vector<double>>();
  for (int k : j["feature_kinds"].get<std::vector<int>>())
    m.feature_kinds.push_back(static_cast<ColumnKind>(k));
  for (const auto& tj : j["trees"]) {
    Tree t;
    for (const auto& nj : tj) t.nodes.push_back(node_from_json(nj));
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace xgen

#include "xgen/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "xgen/gbdt.hpp"
#include "xgen/parallel.hpp"
#include "xgen/rng.hpp"

namespace xgen {

namespace {

void check_schema(const Table& a, const Table& b) {
  if (a.n_cols() != b.n_cols()) throw std::invalid_argument("metrics: schema mismatch");
  for (size_t j = 0; j < a.n_cols(); ++j)
    if (a.schema.columns[j].kind != b.schema.columns[j].kind)
      throw std::invalid_argument("metrics: schema mismatch at column " +
                                  a.schema.columns[j].name);
}

double ks_distance(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = sa.size(), nb = sb.size();
  size_t i = 0, j = 0;
  double gap = 0.0;
  while (i < sa.size() && j < sb.size()) {
    double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    gap = std::max(gap, std::abs(i / na - j / nb));
  }
  return gap;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - q[k]);
  return 0.5 * tv;
}

std::vector<double> cat_marginal(const Table& t, size_t j, int K) {
  std::vector<double> p(K, 0.0);
  for (int c : t.cat[j])
    if (c >= 0 && c < K) p[c] += 1.0;
  for (double& x : p) x /= std::max<size_t>(t.n_rows, 1);
  return p;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Discretization for contingency comparisons: categoricals keep their codes,
// numericals are cut into 10 equal-width bins over the real column's range.
struct PairCut {
  bool is_num;
  double lo = 0, width = 1;
  int K;
  int code(const Table& t, size_t j, size_t i) const {
    if (!is_num) {
      int c = t.cat[j][i];
      return std::clamp(c, 0, K - 1);
    }
    int b = static_cast<int>((t.num[j][i] - lo) / width);
    return std::clamp(b, 0, K - 1);
  }
};

PairCut make_cut(const Table& real, size_t j) {
  PairCut c;
  c.is_num = real.is_num(j);
  if (!c.is_num) {
    c.K = std::max(real.cardinality(j), 1);
    return c;
  }
  c.K = 10;
  auto [lo, hi] = std::minmax_element(real.num[j].begin(), real.num[j].end());
  c.lo = real.n_rows ? *lo : 0.0;
  double range = real.n_rows ? *hi - *lo : 0.0;
  c.width = range > 0 ? range / c.K : 1.0;
  return c;
}

std::vector<double> joint_dist(const Table& t, size_t i, size_t j, const PairCut& ci,
                               const PairCut& cj) {
  std::vector<double> p(static_cast<size_t>(ci.K) * cj.K, 0.0);
  for (size_t r = 0; r < t.n_rows; ++r)
    p[static_cast<size_t>(ci.code(t, i, r)) * cj.K + cj.code(t, j, r)] += 1.0;
  for (double& x : p) x /= std::max<size_t>(t.n_rows, 1);
  return p;
}

std::vector<size_t> subsample_indices(size_t n, size_t m, RngStream& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (m >= n) return idx;
  for (size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
  idx.resize(m);
  return idx;
}

FeatureMatrix stack_tables(const std::vector<const Table*>& tables, size_t skip_col) {
  FeatureMatrix X;
  const Table& first = *tables[0];
  size_t total = 0;
  for (const Table* t : tables) total += t->n_rows;
  for (size_t j = 0; j < first.n_cols(); ++j) {
    if (j == skip_col) continue;
    if (first.is_num(j)) {
      std::vector<float> col;
      col.reserve(total);
      for (const Table* t : tables)
        for (double v : t->num[j]) col.push_back(static_cast<float>(v));
      X.add_numerical(std::move(col));
    } else {
      int K = first.cardinality(j);
      std::vector<int> col;
      col.reserve(total);
      for (const Table* t : tables)
        for (int c : t->cat[j]) col.push_back(c);
      X.add_categorical(std::move(col), K);
    }
  }
  X.n_rows = total;
  return X;
}

struct Trial {
  GbdtParams params;
};

Trial draw_trial(uint64_t seed, int i, Objective obj, int n_classes) {
  RngStream rng = RngStream::derive(seed, "metrics.trial", i);
  Trial t;
  t.params.n_rounds = 30 + static_cast<int>(rng.uniform_int(121));
  t.params.max_depth = 3 + static_cast<int>(rng.uniform_int(8));
  t.params.min_child_weight = std::exp(rng.uniform() * std::log(20.0));
  t.params.gamma = rng.uniform() * 5.0;
  t.params.objective = obj;
  t.params.n_classes = n_classes;
  return t;
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double n1 = 0, n0 = 0, rank_sum = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * (i + j - 1) + 1.0;  // 1-based midrank of the tie group
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum += midrank;
    i = j;
  }
  for (int y : labels) (y == 1 ? n1 : n0) += 1.0;
  if (n1 == 0 || n0 == 0) return 0.5;
  return (rank_sum - n1 * (n1 + 1) / 2) / (n1 * n0);
}

double shape(const Table& real, const Table& syn) {
  check_schema(real, syn);
  if (real.n_cols() == 0) return 1.0;
  double total = 0.0;
  for (size_t j = 0; j < real.n_cols(); ++j) {
    if (real.is_num(j)) {
      total += 1.0 - ks_distance(real.num[j], syn.num[j]);
    } else {
      int K = std::max(real.cardinality(j), syn.cardinality(j));
      total += 1.0 - tv_distance(cat_marginal(real, j, K), cat_marginal(syn, j, K));
    }
  }
  return total / real.n_cols();
}

double trend(const Table& real, const Table& syn) {
  check_schema(real, syn);
  const size_t d = real.n_cols();
  if (d < 2) throw std::invalid_argument("trend: need at least 2 columns");
  double total = 0.0;
  size_t n_pairs = 0;
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = i + 1; j < d; ++j) {
      ++n_pairs;
      if (real.is_num(i) && real.is_num(j)) {
        double rr = pearson(real.num[i], real.num[j]);
        double rs = pearson(syn.num[i], syn.num[j]);
        total += 1.0 - std::abs(rr - rs) / 2.0;
      } else {
        PairCut ci = make_cut(real, i), cj = make_cut(real, j);
        total += 1.0 - tv_distance(joint_dist(real, i, j, ci, cj),
                                   joint_dist(syn, i, j, ci, cj));
      }
    }
  }
  return total / n_pairs;
}

double detection(const Table& real_train, const Table& real_test, const Table& syn_train,
                 const Table& syn_test, uint64_t seed) {
  check_schema(real_train, syn_train);
  check_schema(real_test, syn_test);
  if (real_train.n_rows == 0 || syn_train.n_rows == 0 || real_test.n_rows == 0 ||
      syn_test.n_rows == 0)
    throw std::invalid_argument("detection: empty input");

  FeatureMatrix Xtrain = stack_tables({&real_train, &syn_train}, SIZE_MAX);
  std::vector<double> ytrain(Xtrain.n_rows, 0.0);
  for (size_t i = real_train.n_rows; i < Xtrain.n_rows; ++i) ytrain[i] = 1.0;

  // Hold out a quarter of the training pair for model selection.
  RngStream shuffle = RngStream::derive(seed, "metrics.detection.fold");
  std::vector<size_t> perm(Xtrain.n_rows);
  std::iota(perm.begin(), perm.end(), 0);
  for (size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[shuffle.uniform_int(i)]);
  size_t n_fit = perm.size() - perm.size() / 4;
  std::vector<int> fit_rows(perm.begin(), perm.begin() + n_fit);
  std::vector<int> val_rows(perm.begin() + n_fit, perm.end());

  auto take = [&](const std::vector<int>& rows) {
    FeatureMatrix S;
    for (size_t j = 0; j < Xtrain.n_cols(); ++j) {
      if (Xtrain.kinds[j] == ColumnKind::numerical) {
        std::vector<float> col;
        for (int r : rows) col.push_back(Xtrain.num[j][r]);
        S.add_numerical(std::move(col));
      } else {
        std::vector<int> col;
        for (int r : rows) col.push_back(Xtrain.cat[j][r]);
        S.add_categorical(std::move(col), Xtrain.cardinality[j]);
      }
    }
    S.n_rows = rows.size();
    return S;
  };
  FeatureMatrix Xfit = take(fit_rows), Xval = take(val_rows);
  std::vector<double> yfit;
  std::vector<int> yval;
  for (int r : fit_rows) yfit.push_back(ytrain[r]);
  for (int r : val_rows) yval.push_back(static_cast<int>(ytrain[r]));

  const int n_trials = 32;
  std::vector<double> val_auc(n_trials);
  std::vector<Trial> trials(n_trials);
  for (int i = 0; i < n_trials; ++i) trials[i] = draw_trial(seed, i, Objective::binary_logistic, 2);
  parallel_for(n_trials, [&](size_t i) {
    GbdtModel m = fit(Xfit, yfit, trials[i].params, seed);
    val_auc[i] = roc_auc(m.predict_binary(Xval), yval);
  });
  int best = 0;
  for (int i = 1; i < n_trials; ++i)
    if (val_auc[i] > val_auc[best]) best = i;

  GbdtModel final_model = fit(Xtrain, ytrain, trials[best].params, seed);
  FeatureMatrix Xtest = stack_tables({&real_test, &syn_test}, SIZE_MAX);
  std::vector<int> ytest(Xtest.n_rows, 0);
  for (size_t i = real_test.n_rows; i < Xtest.n_rows; ++i) ytest[i] = 1;
  return roc_auc(final_model.predict_binary(Xtest), ytest);
}

GowerSpace GowerSpace::from(const Table& real) {
  GowerSpace s;
  s.schema = real.schema;
  s.mins.assign(real.n_cols(), 0.0);
  s.maxs.assign(real.n_cols(), 0.0);
  for (size_t j = 0; j < real.n_cols(); ++j) {
    if (!real.is_num(j) || real.n_rows == 0) continue;
    auto [lo, hi] = std::minmax_element(real.num[j].begin(), real.num[j].end());
    s.mins[j] = *lo;
    s.maxs[j] = *hi;
  }
  return s;
}

double GowerSpace::dist(const Table& a, size_t ia, const Table& b, size_t ib) const {
  double d = 0.0;
  for (size_t j = 0; j < schema.size(); ++j) {
    if (schema.columns[j].kind == ColumnKind::numerical) {
      double range = maxs[j] - mins[j];
      if (range <= 0) continue;
      double ga = std::clamp((a.num[j][ia] - mins[j]) / range, 0.0, 1.0);
      double gb = std::clamp((b.num[j][ib] - mins[j]) / range, 0.0, 1.0);
      d += std::abs(ga - gb);
    } else {
      d += a.cat[j][ia] != b.cat[j][ib] ? 1.0 : 0.0;
    }
  }
  return d;
}

double gower(const Table& a, size_t ia, const Table& b, size_t ib, const GowerSpace& space) {
  return space.dist(a, ia, b, ib);
}

namespace {

size_t medoid(const Table& t, const GowerSpace& space) {
  const size_t n = t.n_rows;
  std::vector<double> total(n, 0.0);
  parallel_for(n, [&](size_t i) {
    double s = 0;
    for (size_t k = 0; k < n; ++k) s += space.dist(t, i, t, k);
    total[i] = s;
  });
  return std::min_element(total.begin(), total.end()) - total.begin();
}

// Two-sided deviation of a quantile-support curve from the diagonal. The
// alpha-support of `center_tab` is the Gower ball around its medoid with
// radius the alpha-quantile of distances to that medoid; the curve is the
// fraction of `other` inside. Deviation above the diagonal counts too: a
// sample collapsed onto the center (or spread past the support) should not
// score as well as one whose mass profile matches level for level.
double support_score(const Table& center_tab, const Table& other, const GowerSpace& space,
                     int n_alphas) {
  size_t c = medoid(center_tab, space);
  std::vector<double> radii(center_tab.n_rows);
  parallel_for(center_tab.n_rows,
               [&](size_t i) { radii[i] = space.dist(center_tab, c, center_tab, i); });
  std::sort(radii.begin(), radii.end());
  std::vector<double> other_d(other.n_rows);
  parallel_for(other.n_rows, [&](size_t i) { other_d[i] = space.dist(center_tab, c, other, i); });
  std::sort(other_d.begin(), other_d.end());

  double dev = 0.0;
  for (int k = 1; k <= n_alphas; ++k) {
    double alpha = static_cast<double>(k) / n_alphas;
    size_t q = std::min(radii.size() - 1,
                        static_cast<size_t>(std::ceil(alpha * radii.size())) - 1);
    double radius = radii[q];
    size_t inside = std::upper_bound(other_d.begin(), other_d.end(), radius) - other_d.begin();
    double curve = static_cast<double>(inside) / std::max<size_t>(other.n_rows, 1);
    dev += std::abs(curve - alpha);
  }
  dev /= n_alphas;
  return std::clamp(1.0 - 2.0 * dev, 0.0, 1.0);
}

}  // namespace

std::pair<double, double> precision_recall(const Table& real, const Table& syn,
                                           const GowerSpace& space, uint64_t seed,
                                           int n_alphas) {
  check_schema(real, syn);
  if (real.n_rows == 0 || syn.n_rows == 0)
    throw std::invalid_argument("precision_recall: empty input");
  const size_t cap = 2000;
  RngStream rr = RngStream::derive(seed, "metrics.pr.real");
  RngStream rs = RngStream::derive(seed, "metrics.pr.syn");
  Table r = real.n_rows > cap ? real.select_rows(subsample_indices(real.n_rows, cap, rr)) : real;
  Table s = syn.n_rows > cap ? syn.select_rows(subsample_indices(syn.n_rows, cap, rs)) : syn;
  double precision = support_score(r, s, space, n_alphas);
  double recall = support_score(s, r, space, n_alphas);
  return {precision, recall};
}

MleScores mle(const Table& train, const Table& valid, const Table& test, size_t target,
              bool classification, uint64_t seed) {
  check_schema(train, valid);
  check_schema(train, test);
  MleScores out;
  out.classification = classification;

  FeatureMatrix Xtr = stack_tables({&train}, target);
  FeatureMatrix Xva = stack_tables({&valid}, target);
  FeatureMatrix Xte = stack_tables({&test}, target);

  if (classification) {
    const int K = std::max(train.cardinality(target), 2);
    std::vector<double> ytr(train.n_rows);
    for (size_t i = 0; i < train.n_rows; ++i) ytr[i] = train.cat[target][i];
    std::vector<int> seen(K, 0);
    for (double y : ytr) seen[static_cast<int>(y)] = 1;
    if (std::accumulate(seen.begin(), seen.end(), 0) < 2) {
      out.degenerate = true;
      out.rocauc = 0.5;
      out.f1 = 0.0;
      return out;
    }
    Objective obj = K == 2 ? Objective::binary_logistic : Objective::softmax;

    auto class_auc = [&](const GbdtModel& m, const FeatureMatrix& X, const Table& t) {
      if (K == 2) {
        std::vector<int> y(t.n_rows);
        for (size_t i = 0; i < t.n_rows; ++i) y[i] = t.cat[target][i];
        return roc_auc(m.predict_binary(X), y);
      }
      auto proba = m.predict_proba(X);
      double total = 0;
      int counted = 0;
      for (int k = 0; k < K; ++k) {
        std::vector<double> sc(t.n_rows);
        std::vector<int> y(t.n_rows);
        bool pos = false, neg = false;
        for (size_t i = 0; i < t.n_rows; ++i) {
          sc[i] = proba[i][k];
          y[i] = t.cat[target][i] == k ? 1 : 0;
          (y[i] ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        total += roc_auc(sc, y);
        ++counted;
      }
      return counted ? total / counted : 0.5;
    };

    const int n_trials = 32;
    std::vector<double> val_score(n_trials);
    std::vector<Trial> trials(n_trials);
    for (int i = 0; i < n_trials; ++i) trials[i] = draw_trial(seed, i, obj, K);
    parallel_for(n_trials, [&](size_t i) {
      GbdtModel m = fit(Xtr, ytr, trials[i].params, seed);
      val_score[i] = class_auc(m, Xva, valid);
    });
    int best = 0;
    for (int i = 1; i < n_trials; ++i)
      if (val_score[i] > val_score[best]) best = i;
    GbdtModel m = fit(Xtr, ytr, trials[best].params, seed);
    out.rocauc = class_auc(m, Xte, test);

    // Macro F1 over classes present in the test target.
    std::vector<int> pred(test.n_rows);
    if (K == 2) {
      auto p = m.predict_binary(Xte);
      for (size_t i = 0; i < test.n_rows; ++i) pred[i] = p[i] >= 0.5 ? 1 : 0;
    } else {
      auto p = m.predict_proba(Xte);
      for (size_t i = 0; i < test.n_rows; ++i)
        pred[i] = static_cast<int>(std::max_element(p[i].begin(), p[i].end()) - p[i].begin());
    }
    double f1_sum = 0;
    int f1_n = 0;
    for (int k = 0; k < K; ++k) {
      double tp = 0, fp = 0, fn = 0;
      bool present = false;
      for (size_t i = 0; i < test.n_rows; ++i) {
        int y = test.cat[target][i];
        if (y == k) present = true;
        if (pred[i] == k && y == k) ++tp;
        else if (pred[i] == k) ++fp;
        else if (y == k) ++fn;
      }
      if (!present) continue;
      double denom = 2 * tp + fp + fn;
      f1_sum += denom > 0 ? 2 * tp / denom : 0.0;
      ++f1_n;
    }
    out.f1 = f1_n ? f1_sum / f1_n : 0.0;
    return out;
  }

  // Regression: scores on the z-scaled target (test mean/sd), so a constant
  // predictor lands at RMSE 1.
  std::vector<double> ytr(train.num[target].begin(), train.num[target].end());
  double te_mean = std::accumulate(test.num[target].begin(), test.num[target].end(), 0.0) /
                   std::max<size_t>(test.n_rows, 1);
  double te_var = 0;
  for (double y : test.num[target]) te_var += (y - te_mean) * (y - te_mean);
  te_var /= std::max<size_t>(test.n_rows, 1);
  double te_sd = te_var > 0 ? std::sqrt(te_var) : 1.0;

  auto rmse_on = [&](const GbdtModel& m, const FeatureMatrix& X, const Table& t) {
    auto p = m.predict(X);
    double se = 0;
    for (size_t i = 0; i < t.n_rows; ++i) {
      double e = (p[i] - t.num[target][i]) / te_sd;
      se += e * e;
    }
    return std::sqrt(se / std::max<size_t>(t.n_rows, 1));
  };

  const int n_trials = 32;
  std::vector<double> val_rmse(n_trials);
  std::vector<Trial> trials(n_trials);
  for (int i = 0; i < n_trials; ++i) trials[i] = draw_trial(seed, i, Objective::squared_error, 1);
  parallel_for(n_trials, [&](size_t i) {
    GbdtModel m = fit(Xtr, ytr, trials[i].params, seed);
    val_rmse[i] = rmse_on(m, Xva, valid);
  });
  int best = 0;
  for (int i = 1; i < n_trials; ++i)
    if (val_rmse[i] < val_rmse[best]) best = i;
  GbdtModel m = fit(Xtr, ytr, trials[best].params, seed);
  out.rmse = rmse_on(m, Xte, test);
  out.r2 = 1.0 - out.rmse * out.rmse;  // target is unit-variance after scaling
  return out;
}

double dcr(const Table& train, const Table& test, const Table& syn, const GowerSpace& space,
           uint64_t seed) {
  if (train.n_rows == 0 || test.n_rows == 0 || syn.n_rows == 0)
    throw std::invalid_argument("dcr: empty input");
  const size_t m = test.n_rows;
  const size_t n_iters = (train.n_rows + m - 1) / m;
  double d_sum = 0.0;
  for (size_t b = 0; b < n_iters; ++b) {
    RngStream rtr = RngStream::derive(seed, "metrics.dcr.train", b);
    RngStream rsy = RngStream::derive(seed, "metrics.dcr.syn", b);
    Table tr = train.n_rows > m ? train.select_rows(subsample_indices(train.n_rows, m, rtr)) : train;
    Table sy = syn.n_rows > m ? syn.select_rows(subsample_indices(syn.n_rows, m, rsy)) : syn;
    std::atomic<size_t> closer{0};
    parallel_for(sy.n_rows, [&](size_t i) {
      double d_tr = std::numeric_limits<double>::infinity();
      double d_te = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < tr.n_rows; ++k) d_tr = std::min(d_tr, space.dist(sy, i, tr, k));
      for (size_t k = 0; k < test.n_rows; ++k) d_te = std::min(d_te, space.dist(sy, i, test, k));
      if (d_tr < d_te) closer.fetch_add(1, std::memory_order_relaxed);
    });
    d_sum += static_cast<double>(closer.load()) / sy.n_rows;
  }
  double d_mean = d_sum / n_iters;
  return std::min(1.0, 2.0 * (1.0 - d_mean));
}

}  // namespace xgen

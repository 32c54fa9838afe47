#include "xgen/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "xgen/rng.hpp"

namespace xgen {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

// Acklam's rational approximation with one Halley refinement.
double norm_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_quantile: p outside (0,1)");
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = norm_cdf(x) - p;
  double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  size_t i = static_cast<size_t>(it - xs.begin());
  double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

}  // namespace

Gaussianizer gaussianize_fit(std::span<const double> raw) {
  std::vector<double> v(raw.begin(), raw.end());
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument("gaussianize_fit: non-finite input");
  if (v.size() < 2) throw std::invalid_argument("gaussianize_fit: need >= 2 values");
  std::sort(v.begin(), v.end());

  Gaussianizer g;
  if (v.front() == v.back()) {
    g.degenerate = true;
    g.constant = v.front();
    return g;
  }

  // Distinct values with midrank probabilities; endpoints coincide with the
  // [1/(2n), 1 - 1/(2n)] clip bounds.
  const double n = static_cast<double>(v.size());
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    g.values.push_back(v[i]);
    g.probs.push_back((0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 0.5) / n);
    i = j + 1;
  }

  if (g.values.size() > 1000) {
    std::vector<double> sv, sp;
    size_t m = g.values.size();
    for (size_t k = 0; k < 1000; ++k) {
      size_t idx = k * (m - 1) / 999;
      if (!sv.empty() && g.values[idx] == sv.back()) continue;
      sv.push_back(g.values[idx]);
      sp.push_back(g.probs[idx]);
    }
    g.values = std::move(sv);
    g.probs = std::move(sp);
  }

  // z-scale over the full training sample.
  double sum = 0, sq = 0;
  for (double x : raw) {
    double z = norm_quantile(std::clamp(interp(g.values, g.probs, x), g.probs.front(), g.probs.back()));
    sum += z;
    sq += z * z;
  }
  double mean = sum / n;
  double var = std::max(sq / n - mean * mean, 0.0);
  g.z_mean = mean;
  g.z_sd = std::max(std::sqrt(var), 1e-12);
  return g;
}

double Gaussianizer::transform(double v) const {
  if (!std::isfinite(v)) throw std::invalid_argument("gaussianize: non-finite input");
  if (degenerate) return 0.0;
  double p = std::clamp(interp(values, probs, v), probs.front(), probs.back());
  return (norm_quantile(p) - z_mean) / z_sd;
}

double Gaussianizer::inverse(double z) const {
  if (degenerate) return constant;
  double z0 = z * z_sd + z_mean;
  double p = std::clamp(norm_cdf(z0), probs.front(), probs.back());
  return interp(probs, values, p);
}

nlohmann::json Gaussianizer::to_json() const {
  return {{"values", values}, {"probs", probs},     {"z_mean", z_mean},
          {"z_sd", z_sd},     {"degenerate", degenerate}, {"constant", constant}};
}

Gaussianizer Gaussianizer::from_json(const nlohmann::json& j) {
  Gaussianizer g;
  g.values = j["values"].get<std::vector<double>>();
  g.probs = j["probs"].get<std::vector<double>>();
  g.z_mean = j["z_mean"].get<double>();
  g.z_sd = j["z_sd"].get<double>();
  g.degenerate = j["degenerate"].get<bool>();
  g.constant = j["constant"].get<double>();
  return g;
}

void clip_to_range(std::span<double> values, double train_min, double train_max) {
  if (train_min > train_max) throw std::invalid_argument("clip_to_range: min > max");
  for (double& v : values) v = std::clamp(v, train_min, train_max);
}

std::vector<double> mean_vector_embed(const Table& t, size_t row,
                                      const std::vector<std::pair<double, double>>& numeric_ranges) {
  std::vector<double> e;
  for (size_t j = 0; j < t.n_cols(); ++j) {
    if (t.is_num(j)) {
      auto [lo, hi] = numeric_ranges[j];
      double v = hi > lo ? (t.num[j][row] - lo) / (hi - lo) : 0.0;
      e.push_back(std::clamp(v, 0.0, 1.0));
    } else {
      int K = t.cardinality(j);
      for (int k = 0; k < K; ++k) e.push_back(t.cat[j][row] == k ? 0.5 : 0.0);
    }
  }
  return e;
}

namespace {

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace

KMedoidsResult kmedoids_l1(const std::vector<std::vector<double>>& points, size_t k, uint64_t seed) {
  const size_t n = points.size();
  if (k == 0 || k > n) throw std::invalid_argument("kmedoids_l1: need 1 <= k <= n");

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = l1(points[i], points[j]);

  auto seeded_init = [&](uint64_t restart) {
    RngStream rng = RngStream::derive(seed, "kmedoids.init", restart);
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    std::vector<int> med(perm.begin(), perm.begin() + k);
    std::sort(med.begin(), med.end());
    return med;
  };
  std::vector<int> medoids = seeded_init(0);

  auto assign = [&](const std::vector<int>& med, std::vector<int>* out) {
    double cost = 0;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = dist[i][med[0]];
      for (size_t m = 1; m < med.size(); ++m)
        if (dist[i][med[m]] < bd) { bd = dist[i][med[m]]; best = static_cast<int>(m); }
      if (out) (*out)[i] = best;
      cost += bd;
    }
    // A medoid always belongs to its own cluster, even under duplicate points.
    if (out)
      for (size_t m = 0; m < med.size(); ++m) (*out)[med[m]] = static_cast<int>(m);
    return cost;
  };

  double cost = assign(medoids, nullptr);
  if (n <= 500) {
    // PAM-style greedy swaps, restarted from several seeded inits to escape
    // single-swap local optima.
    auto pam = [&](std::vector<int> med) {
      double c0 = assign(med, nullptr);
      for (int iter = 0; iter < 100; ++iter) {
        double best_cost = c0;
        int best_m = -1, best_p = -1;
        std::vector<int> trial = med;
        for (size_t m = 0; m < k; ++m) {
          for (size_t p = 0; p < n; ++p) {
            if (std::find(med.begin(), med.end(), static_cast<int>(p)) != med.end())
              continue;
            trial[m] = static_cast<int>(p);
            double c = assign(trial, nullptr);
            if (c < best_cost - 1e-12) { best_cost = c; best_m = static_cast<int>(m); best_p = static_cast<int>(p); }
            trial[m] = med[m];
          }
        }
        if (best_m < 0) break;
        med[best_m] = best_p;
        c0 = best_cost;
      }
      return std::pair{med, c0};
    };
    cost = std::numeric_limits<double>::infinity();
    for (uint64_t restart = 0; restart < 8; ++restart) {
      auto [med, c] = pam(seeded_init(restart));
      if (c < cost - 1e-12) { cost = c; medoids = med; }
    }
  } else {
    // Alternating assign / medoid update.
    std::vector<int> assignment(n);
    for (int iter = 0; iter < 100; ++iter) {
      assign(medoids, &assignment);
      bool changed = false;
      for (size_t m = 0; m < k; ++m) {
        double best_sum = std::numeric_limits<double>::infinity();
        int best = medoids[m];
        for (size_t cand = 0; cand < n; ++cand) {
          if (assignment[cand] != static_cast<int>(m)) continue;
          double s = 0;
          for (size_t i = 0; i < n; ++i)
            if (assignment[i] == static_cast<int>(m)) s += dist[cand][i];
          if (s < best_sum - 1e-12) { best_sum = s; best = static_cast<int>(cand); }
        }
        if (best != medoids[m]) { medoids[m] = best; changed = true; }
      }
      if (!changed) break;
    }
    cost = assign(medoids, nullptr);
  }

  KMedoidsResult res;
  res.medoids = medoids;
  res.assignment.resize(n);
  res.cost = assign(medoids, &res.assignment);
  return res;
}

nlohmann::json CategoryMerger::to_json() const {
  return {{"feature", feature},
          {"original_cardinality", original_cardinality},
          {"merged_cardinality", merged_cardinality},
          {"forward", forward},
          {"members", members},
          {"weights", weights},
          {"original_codebook", original_codebook}};
}

CategoryMerger CategoryMerger::from_json(const nlohmann::json& j) {
  CategoryMerger m;
  m.feature = j["feature"].get<int>();
  m.original_cardinality = j["original_cardinality"].get<int>();
  m.merged_cardinality = j["merged_cardinality"].get<int>();
  m.forward = j["forward"].get<std::vector<int>>();
  m.members = j["members"].get<std::vector<std::vector<int>>>();
  m.weights = j["weights"].get<std::vector<std::vector<double>>>();
  m.original_codebook = j["original_codebook"].get<std::vector<std::string>>();
  return m;
}

std::pair<Table, CategoryMerger> limit_cardinality(const Table& t, size_t feature, int K_max,
                                                   int K_c, MergeStrategy strategy, uint64_t seed) {
  if (K_max < 2) throw std::invalid_argument("limit_cardinality: K_max >= 2 required");
  if (t.is_num(feature)) throw std::invalid_argument("limit_cardinality: feature must be categorical");
  if (strategy == MergeStrategy::cluster && !(K_c >= 1 && K_c < K_max))
    throw std::invalid_argument("limit_cardinality: need 1 <= K_c < K_max");

  const int K = t.cardinality(feature);
  CategoryMerger merger;
  merger.feature = static_cast<int>(feature);
  merger.original_cardinality = K;
  merger.original_codebook = t.codebook[feature];

  if (K <= K_max) {
    merger.merged_cardinality = K;
    merger.forward.resize(K);
    for (int c = 0; c < K; ++c) {
      merger.forward[c] = c;
      merger.members.push_back({c});
      merger.weights.push_back({1.0});
    }
    return {t, merger};
  }

  std::vector<int> count(K, 0);
  for (int c : t.cat[feature]) ++count[c];
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return count[a] > count[b]; });

  const int n_keep = strategy == MergeStrategy::cluster ? K_max - K_c : K_max - 1;
  std::vector<int> kept(order.begin(), order.begin() + n_keep);
  std::vector<int> infrequent(order.begin() + n_keep, order.end());
  std::sort(kept.begin(), kept.end());
  std::sort(infrequent.begin(), infrequent.end());

  // Bucket index per infrequent category.
  std::vector<int> bucket(infrequent.size(), 0);
  int n_buckets = 1;
  if (strategy == MergeStrategy::cluster) {
    std::vector<std::pair<double, double>> ranges(t.n_cols(), {0, 0});
    for (size_t j = 0; j < t.n_cols(); ++j) {
      if (!t.is_num(j) || t.n_rows == 0) continue;
      auto [lo, hi] = std::minmax_element(t.num[j].begin(), t.num[j].end());
      ranges[j] = {*lo, *hi};
    }
    std::vector<std::vector<double>> centers;
    for (size_t ci = 0; ci < infrequent.size(); ++ci) {
      std::vector<double> acc;
      size_t rows = 0;
      for (size_t r = 0; r < t.n_rows; ++r) {
        if (t.cat[feature][r] != infrequent[ci]) continue;
        auto e = mean_vector_embed(t, r, ranges);
        if (acc.empty()) acc.assign(e.size(), 0.0);
        for (size_t d = 0; d < e.size(); ++d) acc[d] += e[d];
        ++rows;
      }
      if (rows == 0) {
        // Zero-count category: embed as the origin; it lands in some cluster
        // but can never be resampled.
        size_t dim = 0;
        for (size_t j = 0; j < t.n_cols(); ++j) dim += t.is_num(j) ? 1 : t.cardinality(j);
        acc.assign(dim, 0.0);
      } else {
        for (double& a : acc) a /= static_cast<double>(rows);
      }
      centers.push_back(std::move(acc));
    }
    size_t k = std::min<size_t>(K_c, centers.size());
    auto km = kmedoids_l1(centers, k, seed);
    bucket = km.assignment;
    n_buckets = static_cast<int>(k);
  }

  merger.merged_cardinality = n_keep + n_buckets;
  merger.forward.assign(K, -1);
  for (size_t i = 0; i < kept.size(); ++i) {
    merger.forward[kept[i]] = static_cast<int>(i);
    merger.members.push_back({kept[i]});
    merger.weights.push_back({1.0});
  }
  merger.members.resize(merger.merged_cardinality);
  merger.weights.resize(merger.merged_cardinality);
  for (size_t i = 0; i < infrequent.size(); ++i) {
    int code = n_keep + bucket[i];
    merger.forward[infrequent[i]] = code;
    merger.members[code].push_back(infrequent[i]);
  }
  for (int code = n_keep; code < merger.merged_cardinality; ++code) {
    double total = 0;
    for (int orig : merger.members[code]) total += count[orig];
    for (int orig : merger.members[code])
      merger.weights[code].push_back(total > 0 ? count[orig] / total
                                               : 1.0 / static_cast<double>(merger.members[code].size()));
  }

  Table out = t;
  out.schema.columns[feature].cardinality = merger.merged_cardinality;
  out.codebook[feature].clear();
  for (int code = 0; code < merger.merged_cardinality; ++code) {
    if (merger.members[code].size() == 1)
      out.codebook[feature].push_back(t.codebook[feature][merger.members[code][0]]);
    else
      out.codebook[feature].push_back("__merged_" + std::to_string(code));
  }
  for (int& c : out.cat[feature]) c = merger.forward[c];
  return {out, merger};
}

Table restore_categories(const Table& t, const CategoryMerger& merger, uint64_t seed) {
  Table out = t;
  const size_t j = static_cast<size_t>(merger.feature);
  RngStream rng = RngStream::derive(seed, "preprocess.restore", merger.feature);
  for (int& c : out.cat[j]) {
    if (c < 0 || c >= merger.merged_cardinality)
      throw std::invalid_argument("restore_categories: unknown code");
    const auto& members = merger.members[c];
    if (members.size() == 1) c = members[0];
    else c = members[rng.categorical(merger.weights[c])];
  }
  out.schema.columns[j].cardinality = merger.original_cardinality;
  out.codebook[j] = merger.original_codebook;
  return out;
}

}  // namespace xgen

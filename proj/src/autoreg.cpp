#include "xgen/autoreg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "xgen/parallel.hpp"

namespace fs = std::filesystem;

namespace xgen {

namespace {

// Linear interpolation of the inverse empirical CDF at rank u * (m - 1).
double eqf_draw(const std::vector<double>& sorted_values, double u) {
  const size_t m = sorted_values.size();
  if (m == 1) return sorted_values[0];
  double pos = u * static_cast<double>(m - 1);
  size_t lo = std::min(static_cast<size_t>(pos), m - 2);
  double t = pos - static_cast<double>(lo);
  return sorted_values[lo] + t * (sorted_values[lo + 1] - sorted_values[lo]);
}

void finalize_spec(BinSpec& spec, std::span<const double> values, const std::vector<int>& bins) {
  const int B = spec.n_bins;
  spec.eqf.assign(B, {});
  spec.bin_min.assign(B, 0.0);
  spec.bin_max.assign(B, 0.0);
  for (size_t i = 0; i < values.size(); ++i) spec.eqf[bins[i]].push_back(values[i]);
  for (int b = 0; b < B; ++b) {
    auto& e = spec.eqf[b];
    std::sort(e.begin(), e.end());
    if (!e.empty()) {
      spec.bin_min[b] = e.front();
      spec.bin_max[b] = e.back();
    } else if (spec.upper_edges.size() == static_cast<size_t>(B)) {
      // Empty bin (uniform/kmeans strategies): fall back to its edge range.
      double lo = b == 0 ? spec.upper_edges[0] : spec.upper_edges[b - 1];
      spec.bin_min[b] = lo;
      spec.bin_max[b] = spec.upper_edges[b];
    }
  }
  if (spec.upper_edges.empty()) {
    spec.upper_edges.resize(B);
    for (int b = 0; b < B; ++b) spec.upper_edges[b] = spec.bin_max[b];
  }
}

}  // namespace

std::pair<std::vector<int>, BinSpec> rank_bin(std::span<const double> values, int B, uint64_t seed) {
  const size_t n = values.size();
  if (n == 0) throw std::invalid_argument("rank_bin: empty input");
  if (B < 1 || static_cast<size_t>(B) > n) throw std::invalid_argument("rank_bin: need 1 <= B <= n");

  // Seeded jitter breaks ties without ever reordering distinct values.
  RngStream rng = RngStream::derive(seed, "autoreg.rankbin");
  std::vector<double> jitter(n);
  for (double& j : jitter) j = rng.uniform();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    if (jitter[a] != jitter[b]) return jitter[a] < jitter[b];
    return a < b;
  });

  std::vector<int> bins(n);
  for (size_t r = 0; r < n; ++r)
    bins[order[r]] = static_cast<int>(r * static_cast<size_t>(B) / n);

  BinSpec spec;
  spec.n_bins = B;
  spec.strategy = QuantStrategy::rank;
  finalize_spec(spec, values, bins);
  return {std::move(bins), std::move(spec)};
}

namespace {

std::pair<std::vector<int>, BinSpec> uniform_bin(std::span<const double> values, int B) {
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  double width = hi > lo ? (hi - lo) / B : 1.0;
  BinSpec spec;
  spec.n_bins = B;
  spec.strategy = QuantStrategy::uniform;
  spec.upper_edges.resize(B);
  for (int b = 0; b < B; ++b) spec.upper_edges[b] = lo + width * (b + 1);
  std::vector<int> bins(values.size());
  for (size_t i = 0; i < values.size(); ++i)
    bins[i] = std::min(B - 1, static_cast<int>((values[i] - lo) / width));
  finalize_spec(spec, values, bins);
  return {std::move(bins), std::move(spec)};
}

std::pair<std::vector<int>, BinSpec> kmeans_bin(std::span<const double> values, int B, uint64_t seed) {
  const size_t n = values.size();
  std::vector<double> best_centers;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 10; ++restart) {
    RngStream rng = RngStream::derive(seed, "autoreg.kmeans", restart);
    std::vector<double> centers(B);
    for (int b = 0; b < B; ++b) centers[b] = values[rng.uniform_int(n)];
    std::sort(centers.begin(), centers.end());
    std::vector<double> sums(B);
    std::vector<int> counts(B);
    for (int iter = 0; iter < 50; ++iter) {
      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(counts.begin(), counts.end(), 0);
      for (double v : values) {
        int b = static_cast<int>(std::lower_bound(centers.begin(), centers.end(), v) - centers.begin());
        int cand = std::clamp(b, 0, B - 1);
        if (cand > 0 && std::abs(v - centers[cand - 1]) <= std::abs(v - centers[cand])) --cand;
        sums[cand] += v;
        ++counts[cand];
      }
      bool changed = false;
      for (int b = 0; b < B; ++b) {
        if (counts[b] == 0) continue;
        double c = sums[b] / counts[b];
        if (c != centers[b]) { centers[b] = c; changed = true; }
      }
      std::sort(centers.begin(), centers.end());
      if (!changed) break;
    }
    double cost = 0;
    for (double v : values) {
      double d = std::numeric_limits<double>::infinity();
      for (double c : centers) d = std::min(d, std::abs(v - c));
      cost += d * d;
    }
    if (cost < best_cost - 1e-12) { best_cost = cost; best_centers = centers; }
  }
  BinSpec spec;
  spec.n_bins = B;
  spec.strategy = QuantStrategy::kmeans;
  spec.upper_edges.resize(B);
  for (int b = 0; b + 1 < B; ++b) spec.upper_edges[b] = 0.5 * (best_centers[b] + best_centers[b + 1]);
  spec.upper_edges[B - 1] = *std::max_element(values.begin(), values.end());
  std::vector<int> bins(n);
  for (size_t i = 0; i < n; ++i) {
    int b = static_cast<int>(std::lower_bound(spec.upper_edges.begin(), spec.upper_edges.end() - 1,
                                              values[i]) -
                             spec.upper_edges.begin());
    bins[i] = std::clamp(b, 0, B - 1);
  }
  finalize_spec(spec, values, bins);
  return {std::move(bins), std::move(spec)};
}

}  // namespace

std::pair<std::vector<int>, BinSpec> quantize(std::span<const double> values, int B,
                                              QuantStrategy strategy, uint64_t seed) {
  switch (strategy) {
    case QuantStrategy::rank: return rank_bin(values, B, seed);
    case QuantStrategy::uniform: return uniform_bin(values, B);
    case QuantStrategy::kmeans: return kmeans_bin(values, B, seed);
  }
  throw std::logic_error("quantize: unknown strategy");
}

double dequantize(const BinSpec& spec, int bin, RngStream& rng, DequantMode mode) {
  if (bin < 0 || bin >= spec.n_bins) throw std::invalid_argument("dequantize: bin out of range");
  double u = rng.uniform();
  const auto& e = spec.eqf[bin];
  if (e.empty()) return 0.5 * (spec.bin_min[bin] + spec.bin_max[bin]);
  if (mode == DequantMode::eqf) return eqf_draw(e, u);
  return spec.bin_min[bin] + u * (spec.bin_max[bin] - spec.bin_min[bin]);
}

nlohmann::json BinSpec::to_json() const {
  return {{"feature", feature},   {"n_bins", n_bins},
          {"strategy", static_cast<int>(strategy)},
          {"upper_edges", upper_edges}, {"eqf", eqf},
          {"bin_min", bin_min},   {"bin_max", bin_max}};
}

BinSpec BinSpec::from_json(const nlohmann::json& j) {
  BinSpec s;
  s.feature = j["feature"].get<int>();
  s.n_bins = j["n_bins"].get<int>();
  s.strategy = static_cast<QuantStrategy>(j["strategy"].get<int>());
  s.upper_edges = j["upper_edges"].get<std::vector<double>>();
  s.eqf = j["eqf"].get<std::vector<std::vector<double>>>();
  s.bin_min = j["bin_min"].get<std::vector<double>>();
  s.bin_max = j["bin_max"].get<std::vector<double>>();
  return s;
}

namespace {

FeatureMatrix prefix_matrix(const Table& merged, size_t n_features) {
  FeatureMatrix X;
  for (size_t j = 0; j < n_features; ++j) {
    if (merged.is_num(j)) {
      std::vector<float> col(merged.num[j].begin(), merged.num[j].end());
      X.add_numerical(std::move(col));
    } else {
      X.add_categorical(merged.cat[j], merged.cardinality(j));
    }
  }
  X.n_rows = merged.n_rows;
  return X;
}

FeatureMatrix select_matrix_rows(const FeatureMatrix& X, const std::vector<int>& rows) {
  FeatureMatrix S;
  for (size_t j = 0; j < X.n_cols(); ++j) {
    if (X.kinds[j] == ColumnKind::numerical) {
      std::vector<float> col;
      col.reserve(rows.size());
      for (int r : rows) col.push_back(X.num[j][r]);
      S.add_numerical(std::move(col));
    } else {
      std::vector<int> col;
      col.reserve(rows.size());
      for (int r : rows) col.push_back(X.cat[j][r]);
      S.add_categorical(std::move(col), X.cardinality[j]);
    }
  }
  S.n_rows = rows.size();
  return S;
}

// Temperature-scaled Bernoulli: probability of branching to the upper half.
double temper_binary(double p, double tau) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  double delta = (std::log1p(-p) - std::log(p)) / tau;
  return 1.0 / (1.0 + std::exp(delta));
}

size_t temper_draw(const std::vector<double>& probs, double tau, RngStream& rng) {
  std::vector<double> w(probs.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < probs.size(); ++k) {
    w[k] = std::log(std::max(probs[k], 1e-300)) / tau;
    mx = std::max(mx, w[k]);
  }
  for (double& x : w) x = std::exp(x - mx);
  return rng.categorical(w);
}

int meta_height(int n_bins) {
  int h = 0;
  while ((1 << h) < n_bins) ++h;
  return h;
}

}  // namespace

ArModel fit_ar(const Table& train, const ArParams& params, uint64_t seed) {
  if (train.n_rows == 0) throw std::invalid_argument("fit_ar: empty training table");
  if (!(params.temperature > 0.0)) throw std::invalid_argument("fit_ar: temperature must be positive");
  if (params.H < 1) throw std::invalid_argument("fit_ar: H >= 1 required");

  ArModel model;
  model.params = params;
  model.schema = train.schema;
  model.codebook = train.codebook;
  model.n_train = train.n_rows;

  // Cardinality limiting on every over-limit categorical.
  Table merged = train;
  for (size_t j = 0; j < train.n_cols(); ++j) {
    if (train.is_num(j) || train.cardinality(j) <= params.K_max) continue;
    auto [t2, merger] = limit_cardinality(merged, j, params.K_max, params.K_c,
                                          MergeStrategy::cluster, seed);
    merged = std::move(t2);
    model.mergers.push_back(std::move(merger));
  }
  model.merged_schema = merged.schema;

  const size_t d = merged.n_cols();
  const size_t n = merged.n_rows;

  // Bin count is capped by the sample size so every rank bin is non-empty.
  int H_eff = params.H;
  while (H_eff > 0 && (1u << H_eff) > n) --H_eff;
  const int B = 1 << H_eff;

  model.bins.resize(d);
  std::vector<std::vector<int>> bin_ids(d);
  for (size_t j = 0; j < d; ++j) {
    if (!merged.is_num(j)) continue;
    auto [ids, spec] = quantize(merged.num[j], B, params.quant,
                                RngStream::derive(seed, "ar.binseed", j).next_u64());
    spec.feature = static_cast<int>(j);
    bin_ids[j] = std::move(ids);
    model.bins[j] = std::move(spec);
  }

  // First-feature sampler.
  if (merged.is_num(0)) {
    model.first_eqf = merged.num[0];
    std::sort(model.first_eqf.begin(), model.first_eqf.end());
  } else {
    model.first_marginal.assign(merged.cardinality(0), 0.0);
    for (int c : merged.cat[0]) model.first_marginal[c] += 1.0;
    for (double& p : model.first_marginal) p /= static_cast<double>(n);
  }

  model.conditionals.resize(d > 0 ? d - 1 : 0);

  struct Task {
    size_t feature;       // target feature index (>= 1)
    int node = -1;        // meta-tree node, or -1 for a single-model conditional
    std::vector<int> rows;
    std::vector<double> y;
  };
  std::vector<Task> tasks;
  std::vector<FeatureMatrix> prefixes(d);
  for (size_t t = 1; t < d; ++t) {
    prefixes[t] = prefix_matrix(merged, t);
    ArConditional& cond = model.conditionals[t - 1];
    if (!merged.is_num(t)) {
      cond.kind = ConditionalKind::multiclass;
      cond.is_categorical_target = true;
      cond.n_outputs = merged.cardinality(t);
      Task task;
      task.feature = t;
      task.y.assign(merged.cat[t].begin(), merged.cat[t].end());
      tasks.push_back(std::move(task));
      continue;
    }
    cond.kind = params.conditional;
    cond.n_outputs = B;
    if (params.conditional == ConditionalKind::multiclass) {
      Task task;
      task.feature = t;
      task.y.reserve(n);
      for (int b : bin_ids[t]) task.y.push_back(b);
      tasks.push_back(std::move(task));
      continue;
    }
    const int h = H_eff;
    cond.meta.height = h;
    const int n_nodes = (1 << h) - 1;
    cond.meta.nodes.resize(n_nodes);
    cond.meta.degenerate.assign(n_nodes, 0);
    cond.meta.const_p.assign(n_nodes, 0.5);
    // Route rows through bin ranges; node k at depth l covers a contiguous
    // range of 2^(h-l) bins.
    for (int k = 0; k < n_nodes; ++k) {
      int depth = static_cast<int>(std::floor(std::log2(k + 1)));
      int pos = k + 1 - (1 << depth);
      int span = B >> depth;
      int lo = pos * span;
      int mid = lo + span / 2;
      int hi = lo + span;
      Task task;
      task.feature = t;
      task.node = k;
      for (size_t r = 0; r < n; ++r) {
        int b = bin_ids[t][r];
        if (b >= lo && b < hi) {
          task.rows.push_back(static_cast<int>(r));
          task.y.push_back(b >= mid ? 1.0 : 0.0);
        }
      }
      if (task.rows.empty()) {
        cond.meta.degenerate[k] = 1;
        continue;
      }
      tasks.push_back(std::move(task));
    }
  }

  parallel_for(tasks.size(), [&](size_t ti) {
    const Task& task = tasks[ti];
    ArConditional& cond = model.conditionals[task.feature - 1];
    GbdtParams gp = params.gbdt;
    if (task.node < 0) {
      gp.objective = Objective::softmax;
      gp.n_classes = cond.n_outputs;
      cond.multiclass = fit(prefixes[task.feature], task.y, gp, seed);
    } else {
      gp.objective = Objective::binary_logistic;
      FeatureMatrix sub = select_matrix_rows(prefixes[task.feature], task.rows);
      cond.meta.nodes[task.node] = fit(sub, task.y, gp, seed);
    }
  });
  return model;
}

int sample_bin(const ArConditional& cond, const FeatureMatrix& prefix_row, double temperature,
               RngStream& rng) {
  if (cond.kind == ConditionalKind::multiclass) {
    auto probs = cond.multiclass.predict_proba(prefix_row);
    return static_cast<int>(temper_draw(probs[0], temperature, rng));
  }
  int node = 0;
  int bin = 0;
  for (int level = 0; level < cond.meta.height; ++level) {
    double p;
    if (cond.meta.degenerate[node]) p = cond.meta.const_p[node];
    else p = cond.meta.nodes[node].predict_binary(prefix_row)[0];
    bool upper = rng.uniform() < temper_binary(p, temperature);
    bin = bin * 2 + (upper ? 1 : 0);
    node = 2 * node + (upper ? 2 : 1);
  }
  return bin;
}

Table sample_ar(const ArModel& model, size_t n, double temperature, uint64_t seed) {
  if (!(temperature > 0.0)) throw std::invalid_argument("sample_ar: temperature must be positive");
  const Schema& ms = model.merged_schema;
  const size_t d = ms.size();

  std::vector<RngStream> row_rng;
  row_rng.reserve(n);
  for (size_t i = 0; i < n; ++i) row_rng.push_back(RngStream::derive(seed, "ar.sample", i));

  std::vector<std::vector<double>> num_state(d);
  std::vector<std::vector<int>> cat_state(d);
  for (size_t j = 0; j < d; ++j) {
    if (ms.columns[j].kind == ColumnKind::numerical) num_state[j].resize(n);
    else cat_state[j].resize(n);
  }

  // Feature 0 from its marginal sampler.
  parallel_for(n, [&](size_t i) {
    RngStream& rng = row_rng[i];
    if (ms.columns[0].kind == ColumnKind::numerical)
      num_state[0][i] = eqf_draw(model.first_eqf, rng.uniform());
    else
      cat_state[0][i] = static_cast<int>(rng.categorical(model.first_marginal));
  });

  for (size_t t = 1; t < d; ++t) {
    const ArConditional& cond = model.conditionals[t - 1];
    // Prefix matrix from already-sampled (dequantized) values.
    FeatureMatrix X;
    for (size_t j = 0; j < t; ++j) {
      if (ms.columns[j].kind == ColumnKind::numerical) {
        std::vector<float> col(n);
        for (size_t i = 0; i < n; ++i) col[i] = static_cast<float>(num_state[j][i]);
        X.add_numerical(std::move(col));
      } else {
        X.add_categorical(cat_state[j], ms.columns[j].cardinality);
      }
    }
    X.n_rows = n;

    std::vector<int> bins(n, 0);
    if (cond.kind == ConditionalKind::multiclass) {
      auto probs = cond.multiclass.predict_proba(X);
      parallel_for(n, [&](size_t i) {
        bins[i] = static_cast<int>(temper_draw(probs[i], temperature, row_rng[i]));
      });
    } else {
      std::vector<int> node(n, 0);
      for (int level = 0; level < cond.meta.height; ++level) {
        // Group rows by their current meta-tree node and batch-predict.
        std::vector<double> p(n);
        std::vector<std::vector<size_t>> rows_at((1u << (level + 1)) - 1);
        for (size_t i = 0; i < n; ++i) rows_at[node[i]].push_back(i);
        for (size_t k = (1u << level) - 1; k < (1u << (level + 1)) - 1; ++k) {
          const auto& rows = rows_at[k];
          if (rows.empty()) continue;
          if (cond.meta.degenerate[k]) {
            for (size_t i : rows) p[i] = cond.meta.const_p[k];
            continue;
          }
          FeatureMatrix sub;
          for (size_t j = 0; j < t; ++j) {
            if (X.kinds[j] == ColumnKind::numerical) {
              std::vector<float> col;
              col.reserve(rows.size());
              for (size_t i : rows) col.push_back(X.num[j][i]);
              sub.add_numerical(std::move(col));
            } else {
              std::vector<int> col;
              col.reserve(rows.size());
              for (size_t i : rows) col.push_back(X.cat[j][i]);
              sub.add_categorical(std::move(col), X.cardinality[j]);
            }
          }
          sub.n_rows = rows.size();
          auto pred = cond.meta.nodes[k].predict_binary(sub);
          for (size_t r = 0; r < rows.size(); ++r) p[rows[r]] = pred[r];
        }
        parallel_for(n, [&](size_t i) {
          bool upper = row_rng[i].uniform() < temper_binary(p[i], temperature);
          bins[i] = bins[i] * 2 + (upper ? 1 : 0);
          node[i] = 2 * node[i] + (upper ? 2 : 1);
        });
      }
    }

    if (cond.is_categorical_target) {
      cat_state[t] = std::move(bins);
    } else {
      parallel_for(n, [&](size_t i) {
        num_state[t][i] = dequantize(model.bins[t], bins[i], row_rng[i], model.params.dequant);
      });
    }
  }

  Table out;
  out.schema = model.merged_schema;
  out.n_rows = n;
  out.num.resize(d);
  out.cat.resize(d);
  out.codebook.resize(d);
  for (size_t j = 0; j < d; ++j) {
    if (ms.columns[j].kind == ColumnKind::numerical) out.num[j] = std::move(num_state[j]);
    else out.cat[j] = std::move(cat_state[j]);
  }
  // Restore merged categories, then reattach the original codebooks.
  for (const auto& merger : model.mergers)
    out = restore_categories(out, merger, RngStream::derive(seed, "ar.restore").next_u64());
  out.codebook = model.codebook;
  out.schema = model.schema;
  return round_to_precision(out, model.schema);
}

namespace {

void write_json_file(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump();
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

nlohmann::json schema_to_json(const Schema& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : s.columns)
    arr.push_back({{"name", c.name},
                   {"kind", c.kind == ColumnKind::numerical ? "numerical" : "categorical"},
                   {"cardinality", c.cardinality},
                   {"precision", c.precision}});
  return arr;
}

Schema schema_from_json(const nlohmann::json& arr) {
  Schema s;
  for (const auto& cj : arr) {
    ColumnSpec c;
    c.name = cj["name"].get<std::string>();
    c.kind = cj["kind"].get<std::string>() == "numerical" ? ColumnKind::numerical
                                                          : ColumnKind::categorical;
    c.cardinality = cj["cardinality"].get<int>();
    c.precision = cj["precision"].get<int>();
    s.columns.push_back(std::move(c));
  }
  return s;
}

}  // namespace

void ArModel::save(const std::string& dir) const {
  fs::create_directories(fs::path(dir) / "models");
  nlohmann::json m;
  m["kind"] = "ar";
  m["H"] = params.H;
  m["conditional"] = params.conditional == ConditionalKind::hierarchical ? "hierarchical" : "multiclass";
  m["dequant"] = params.dequant == DequantMode::eqf ? "eqf" : "uniform";
  m["quant"] = static_cast<int>(params.quant);
  m["temperature"] = params.temperature;
  m["K_max"] = params.K_max;
  m["K_c"] = params.K_c;
  m["gbdt_rounds"] = params.gbdt.n_rounds;
  m["gbdt_depth"] = params.gbdt.max_depth;
  m["gbdt_lr"] = params.gbdt.learning_rate;
  m["schema"] = schema_to_json(schema);
  m["merged_schema"] = schema_to_json(merged_schema);
  m["codebook"] = codebook;
  m["n_train"] = n_train;
  m["first_eqf"] = first_eqf;
  m["first_marginal"] = first_marginal;
  nlohmann::json mj = nlohmann::json::array();
  for (const auto& merger : mergers) mj.push_back(merger.to_json());
  m["mergers"] = mj;
  nlohmann::json bj = nlohmann::json::array();
  for (const auto& b : bins) bj.push_back(b.n_bins > 0 ? b.to_json() : nlohmann::json());
  m["bins"] = bj;
  write_json_file(fs::path(dir) / "manifest.json", m);

  for (size_t t = 0; t < conditionals.size(); ++t) {
    const ArConditional& c = conditionals[t];
    nlohmann::json cj;
    cj["kind"] = c.kind == ConditionalKind::hierarchical ? "hierarchical" : "multiclass";
    cj["is_categorical_target"] = c.is_categorical_target;
    cj["n_outputs"] = c.n_outputs;
    if (c.kind == ConditionalKind::multiclass) {
      cj["model"] = c.multiclass.to_json();
    } else {
      cj["height"] = c.meta.height;
      cj["degenerate"] = c.meta.degenerate;
      cj["const_p"] = c.meta.const_p;
      nlohmann::json nodes = nlohmann::json::array();
      for (size_t k = 0; k < c.meta.nodes.size(); ++k)
        nodes.push_back(c.meta.degenerate[k] ? nlohmann::json() : c.meta.nodes[k].to_json());
      cj["nodes"] = std::move(nodes);
    }
    write_json_file(fs::path(dir) / "models" / ("c" + std::to_string(t + 1) + ".json"), cj);
  }
}

ArModel ArModel::load(const std::string& dir) {
  nlohmann::json m = read_json_file(fs::path(dir) / "manifest.json");
  if (m.at("kind").get<std::string>() != "ar") throw std::runtime_error("not an ar model directory");
  ArModel model;
  model.params.H = m["H"].get<int>();
  model.params.conditional = m["conditional"].get<std::string>() == "hierarchical"
                                 ? ConditionalKind::hierarchical
                                 : ConditionalKind::multiclass;
  model.params.dequant = m["dequant"].get<std::string>() == "eqf" ? DequantMode::eqf : DequantMode::uniform;
  model.params.quant = static_cast<QuantStrategy>(m["quant"].get<int>());
  model.params.temperature = m["temperature"].get<double>();
  model.params.K_max = m["K_max"].get<int>();
  model.params.K_c = m["K_c"].get<int>();
  model.params.gbdt.n_rounds = m["gbdt_rounds"].get<int>();
  model.params.gbdt.max_depth = m["gbdt_depth"].get<int>();
  model.params.gbdt.learning_rate = m["gbdt_lr"].get<double>();
  model.schema = schema_from_json(m["schema"]);
  model.merged_schema = schema_from_json(m["merged_schema"]);
  model.codebook = m["codebook"].get<std::vector<std::vector<std::string>>>();
  model.n_train = m["n_train"].get<size_t>();
  model.first_eqf = m["first_eqf"].get<std::vector<double>>();
  model.first_marginal = m["first_marginal"].get<std::vector<double>>();
  for (const auto& mj : m["mergers"]) model.mergers.push_back(CategoryMerger::from_json(mj));
  for (const auto& bj : m["bins"])
    model.bins.push_back(bj.is_null() ? BinSpec{} : BinSpec::from_json(bj));

  const size_t d = model.merged_schema.size();
  model.conditionals.resize(d > 0 ? d - 1 : 0);
  for (size_t t = 1; t < d; ++t) {
    nlohmann::json cj = read_json_file(fs::path(dir) / "models" / ("c" + std::to_string(t) + ".json"));
    ArConditional& c = model.conditionals[t - 1];
    c.kind = cj["kind"].get<std::string>() == "hierarchical" ? ConditionalKind::hierarchical
                                                             : ConditionalKind::multiclass;
    c.is_categorical_target = cj["is_categorical_target"].get<bool>();
    c.n_outputs = cj["n_outputs"].get<int>();
    if (c.kind == ConditionalKind::multiclass) {
      c.multiclass = GbdtModel::from_json(cj["model"]);
    } else {
      c.meta.height = cj["height"].get<int>();
      c.meta.degenerate = cj["degenerate"].get<std::vector<uint8_t>>();
      c.meta.const_p = cj["const_p"].get<std::vector<double>>();
      for (const auto& nj : cj["nodes"])
        c.meta.nodes.push_back(nj.is_null() ? GbdtModel{} : GbdtModel::from_json(nj));
    }
  }
  return model;
}

}  // namespace xgen

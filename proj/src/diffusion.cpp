#include "xgen/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "xgen/parallel.hpp"

namespace fs = std::filesystem;

namespace xgen {

NoiseSchedule make_schedule(int T, double beta_min, double beta_max) {
  if (T < 2) throw std::invalid_argument("make_schedule: T >= 2 required");
  if (!(beta_min > 0.0 && beta_min < beta_max))
    throw std::invalid_argument("make_schedule: need 0 < beta_min < beta_max");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.beta_tilde.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double rate = beta_min + (t - 1) / static_cast<double>(T - 1) * (beta_max - beta_min);
    s.beta[t] = std::min(rate / T, 0.999);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.beta_tilde[t] = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
  }
  return s;
}

double forward_gaussian(double x0, int t, double eps, const NoiseSchedule& s) {
  double ab = s.alpha_bar[t];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

int forward_multinomial(int x0, int t, int K, const NoiseSchedule& s, RngStream& rng) {
  if (K < 1) throw std::invalid_argument("forward_multinomial: K >= 1 required");
  if (x0 < 0 || x0 >= K) throw std::invalid_argument("forward_multinomial: code out of range");
  bool keep = rng.uniform() < s.alpha_bar[t];
  int resample = static_cast<int>(rng.uniform_int(K));  // always drawn: fixed stream layout
  return keep ? x0 : resample;
}

std::pair<double, double> v_convert(double v, double x_t, int t, const NoiseSchedule& s) {
  double sa = std::sqrt(s.alpha_bar[t]);
  double sb = std::sqrt(1.0 - s.alpha_bar[t]);
  return {sa * x_t - sb * v, sb * x_t + sa * v};
}

double reverse_step_gaussian(double x_t, int t, double x0_hat, double eps_hat,
                             DfSampler sampler, const NoiseSchedule& s, RngStream& rng) {
  double ab_prev = s.alpha_bar[t - 1];
  if (sampler == DfSampler::ddim)
    return std::sqrt(ab_prev) * x0_hat + std::sqrt(1.0 - ab_prev) * eps_hat;
  double ab = s.alpha_bar[t];
  double mu = std::sqrt(ab_prev) * s.beta[t] / (1.0 - ab) * x0_hat +
              std::sqrt(s.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab) * x_t;
  double z = t > 1 ? rng.normal() : 0.0;
  return mu + std::sqrt(s.beta_tilde[t]) * z;
}

std::vector<double> multinomial_posterior(int x_t, int t, const std::vector<double>& x0_probs,
                                          int K, const NoiseSchedule& s) {
  std::vector<double> pi(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    double first = s.alpha[t] * (k == x_t ? 1.0 : 0.0) + (1.0 - s.alpha[t]) / K;
    double second = s.alpha_bar[t - 1] * x0_probs[k] + (1.0 - s.alpha_bar[t - 1]) / K;
    pi[k] = first * second;
    total += pi[k];
  }
  if (!(total > 0.0)) throw std::logic_error("multinomial_posterior: degenerate posterior");
  for (double& p : pi) p /= total;
  return pi;
}

int reverse_step_multinomial(int x_t, int t, const std::vector<double>& x0_probs, int K,
                             const NoiseSchedule& s, RngStream& rng) {
  auto pi = multinomial_posterior(x_t, t, x0_probs, K, s);
  return static_cast<int>(rng.categorical(pi));
}

namespace {

struct DesignMatrix {
  FeatureMatrix X;
  std::vector<std::vector<double>> reg_target;  // per numerical column
  std::vector<std::vector<double>> cls_target;  // per categorical column (codes)
};

// Noised duplicate-extended design matrix for one timestep.
DesignMatrix build_design(const Table& train, const std::vector<size_t>& rows,
                          const std::vector<std::vector<double>>& z0, const DfParams& params,
                          const NoiseSchedule& sched, int t, RngStream noise, RngStream dropout) {
  const size_t d = train.n_cols();
  const size_t n_out = rows.size() * static_cast<size_t>(params.K_dup);
  DesignMatrix dm;
  dm.reg_target.resize(d);
  dm.cls_target.resize(d);
  std::vector<std::vector<float>> num_cols(d);
  std::vector<std::vector<int>> cat_cols(d);
  for (size_t j = 0; j < d; ++j) {
    if (train.is_num(j)) {
      num_cols[j].reserve(n_out);
      dm.reg_target[j].reserve(n_out);
    } else {
      cat_cols[j].reserve(n_out);
      dm.cls_target[j].reserve(n_out);
    }
  }
  const double sa = std::sqrt(sched.alpha_bar[t]);
  const double sb = std::sqrt(1.0 - sched.alpha_bar[t]);
  // Dropout masks are shared across the K_dup duplicates of a row: masking a
  // feature for only some duplicates would let the model memorize the row
  // through the unmasked majority, defeating the point of the mask.
  std::vector<char> masked(d, 0);
  for (size_t r : rows) {
    if (params.dropout_p > 0.0)
      for (size_t j = 0; j < d; ++j)
        masked[j] = train.is_num(j) && dropout.uniform() < params.dropout_p;
    for (int k = 0; k < params.K_dup; ++k) {
      for (size_t j = 0; j < d; ++j) {
        if (train.is_num(j)) {
          double x0 = z0[j][r];
          double eps = noise.normal();
          double x_t = sa * x0 + sb * eps;
          float input = static_cast<float>(x_t);
          if (masked[j]) input = 0.0f;
          num_cols[j].push_back(input);
          double target = params.target == DfTarget::velocity ? sa * eps - sb * x0 : x0;
          dm.reg_target[j].push_back(target);
        } else {
          int code = forward_multinomial(train.cat[j][r], t, train.cardinality(j), sched, noise);
          cat_cols[j].push_back(code);
          dm.cls_target[j].push_back(static_cast<double>(train.cat[j][r]));
        }
      }
    }
  }
  for (size_t j = 0; j < d; ++j) {
    if (train.is_num(j)) dm.X.add_numerical(std::move(num_cols[j]));
    else dm.X.add_categorical(std::move(cat_cols[j]), train.cardinality(j));
  }
  dm.X.n_rows = n_out;
  return dm;
}

DfGrid train_grid(const Table& train, const std::vector<size_t>& rows,
                  const std::vector<std::vector<double>>& z0, const DfParams& params,
                  const NoiseSchedule& sched, uint64_t seed, int grid_index) {
  const size_t d = train.n_cols();
  DfGrid grid;
  grid.models.resize(static_cast<size_t>(params.T) * d);
  for (int t = 1; t <= params.T; ++t) {
    uint64_t salt = static_cast<uint64_t>(grid_index) * 100000 + static_cast<uint64_t>(t);
    auto dm = build_design(train, rows, z0, params, sched, t,
                           RngStream::derive(seed, "df.noise", salt),
                           RngStream::derive(seed, "df.dropout", salt));
    parallel_for(d, [&](size_t j) {
      GbdtParams gp = params.gbdt;
      std::span<const double> y;
      if (train.is_num(j)) {
        gp.objective = Objective::squared_error;
        y = dm.reg_target[j];
      } else {
        gp.objective = Objective::softmax;
        gp.n_classes = train.cardinality(j);
        y = dm.cls_target[j];
      }
      grid.models[static_cast<size_t>(t - 1) * d + j] = fit(dm.X, y, gp, seed);
    });
  }
  return grid;
}

}  // namespace

DfModel fit_df(const Table& train, const DfParams& params, uint64_t seed) {
  if (train.n_rows == 0) throw std::invalid_argument("fit_df: empty training table");
  if (params.K_dup < 1 || !(params.dropout_p >= 0.0 && params.dropout_p < 1.0))
    throw std::invalid_argument("fit_df: invalid params");

  DfModel model;
  model.params = params;
  model.schedule = make_schedule(params.T, params.beta_min, params.beta_max);
  model.schema = train.schema;
  model.codebook = train.codebook;
  model.n_train = train.n_rows;

  const size_t d = train.n_cols();
  model.gaussianizers.resize(d);
  model.train_ranges.assign(d, {0.0, 0.0});
  std::vector<std::vector<double>> z0(d);
  for (size_t j = 0; j < d; ++j) {
    if (!train.is_num(j)) continue;
    model.gaussianizers[j] = gaussianize_fit(train.num[j]);
    auto [lo, hi] = std::minmax_element(train.num[j].begin(), train.num[j].end());
    model.train_ranges[j] = {*lo, *hi};
    z0[j].resize(train.n_rows);
    for (size_t r = 0; r < train.n_rows; ++r)
      z0[j][r] = model.gaussianizers[j].transform(train.num[j][r]);
  }

  std::vector<size_t> all_rows(train.n_rows);
  for (size_t r = 0; r < train.n_rows; ++r) all_rows[r] = r;

  if (!params.condition_on_label) {
    model.grid_labels = {-1};
    model.grids.push_back(train_grid(train, all_rows, z0, params, model.schedule, seed, 0));
    return model;
  }

  int lc = train.schema.find(*params.condition_on_label);
  if (lc < 0) throw std::invalid_argument("fit_df: unknown label column " + *params.condition_on_label);
  if (train.is_num(lc)) throw std::invalid_argument("fit_df: label column must be categorical");
  model.label_col = lc;
  const int K = train.cardinality(lc);
  std::vector<std::vector<size_t>> by_class(K);
  for (size_t r = 0; r < train.n_rows; ++r) by_class[train.cat[lc][r]].push_back(r);
  model.label_marginal.resize(K);
  for (int c = 0; c < K; ++c)
    model.label_marginal[c] = by_class[c].size() / static_cast<double>(train.n_rows);

  bool need_fallback = false;
  for (int c = 0; c < K; ++c)
    if (by_class[c].size() == 1) need_fallback = true;
  int grid_index = 0;
  for (int c = 0; c < K; ++c) {
    if (by_class[c].size() < 2) continue;
    model.grid_labels.push_back(c);
    model.grids.push_back(train_grid(train, by_class[c], z0, params, model.schedule, seed, grid_index++));
  }
  if (need_fallback || model.grids.empty()) {
    model.fallback_grid = static_cast<int>(model.grids.size());
    model.grid_labels.push_back(-1);
    model.grids.push_back(train_grid(train, all_rows, z0, params, model.schedule, seed, grid_index++));
  }
  return model;
}

Table sample_df(const DfModel& model, size_t n, uint64_t seed) {
  const size_t d = model.schema.size();
  const NoiseSchedule& sched = model.schedule;
  const DfParams& params = model.params;

  std::vector<RngStream> row_rng;
  row_rng.reserve(n);
  for (size_t i = 0; i < n; ++i) row_rng.push_back(RngStream::derive(seed, "df.sample", i));

  // State: numerical values in gaussianized space, categorical codes.
  std::vector<std::vector<double>> num_state(d);
  std::vector<std::vector<int>> cat_state(d);
  std::vector<int> grid_of_row(n, 0);
  std::vector<int> drawn_label(n, -1);

  auto grid_for_label = [&](int label) {
    for (size_t g = 0; g < model.grid_labels.size(); ++g)
      if (model.grid_labels[g] == label) return static_cast<int>(g);
    return model.fallback_grid;
  };

  for (size_t j = 0; j < d; ++j) {
    if (model.schema.columns[j].kind == ColumnKind::numerical) num_state[j].resize(n);
    else cat_state[j].resize(n);
  }
  for (size_t i = 0; i < n; ++i) {
    RngStream& rng = row_rng[i];
    if (model.label_col >= 0) {
      drawn_label[i] = static_cast<int>(rng.categorical(model.label_marginal));
      grid_of_row[i] = grid_for_label(drawn_label[i]);
    }
    for (size_t j = 0; j < d; ++j) {
      if (model.schema.columns[j].kind == ColumnKind::numerical) {
        num_state[j][i] = rng.normal();
      } else if (static_cast<int>(j) == model.label_col) {
        cat_state[j][i] = drawn_label[i];
      } else {
        cat_state[j][i] = static_cast<int>(rng.uniform_int(model.schema.columns[j].cardinality));
      }
    }
  }

  // Per-timestep batched prediction, grouped by grid.
  std::vector<std::vector<size_t>> rows_of_grid(model.grids.size());
  for (size_t i = 0; i < n; ++i) rows_of_grid[grid_of_row[i]].push_back(i);

  std::vector<std::vector<double>> reg_pred(d);    // per column, per row
  std::vector<std::vector<std::vector<double>>> prob_pred(d);
  for (int t = params.T; t >= 1; --t) {
    for (size_t g = 0; g < model.grids.size(); ++g) {
      const auto& rows = rows_of_grid[g];
      if (rows.empty()) continue;
      FeatureMatrix X;
      for (size_t j = 0; j < d; ++j) {
        if (model.schema.columns[j].kind == ColumnKind::numerical) {
          std::vector<float> col(rows.size());
          for (size_t k = 0; k < rows.size(); ++k) col[k] = static_cast<float>(num_state[j][rows[k]]);
          X.add_numerical(std::move(col));
        } else {
          std::vector<int> col(rows.size());
          for (size_t k = 0; k < rows.size(); ++k) col[k] = cat_state[j][rows[k]];
          X.add_categorical(std::move(col), model.schema.columns[j].cardinality);
        }
      }
      X.n_rows = rows.size();
      parallel_for(d, [&](size_t j) {
        const GbdtModel& m = model.grids[g].models[static_cast<size_t>(t - 1) * d + j];
        if (model.schema.columns[j].kind == ColumnKind::numerical) {
          auto p = m.predict(X);
          if (reg_pred[j].size() != n) reg_pred[j].assign(n, 0.0);
          for (size_t k = 0; k < rows.size(); ++k) reg_pred[j][rows[k]] = p[k];
        } else {
          auto p = m.predict_proba(X);
          if (prob_pred[j].size() != n) prob_pred[j].assign(n, {});
          for (size_t k = 0; k < rows.size(); ++k) prob_pred[j][rows[k]] = std::move(p[k]);
        }
      });
    }
    parallel_for(n, [&](size_t i) {
      RngStream& rng = row_rng[i];
      for (size_t j = 0; j < d; ++j) {
        if (model.schema.columns[j].kind == ColumnKind::numerical) {
          double x_t = num_state[j][i];
          double x0_hat, eps_hat;
          if (params.target == DfTarget::velocity) {
            std::tie(x0_hat, eps_hat) = v_convert(reg_pred[j][i], x_t, t, sched);
          } else {
            x0_hat = reg_pred[j][i];
            double sb = std::sqrt(1.0 - sched.alpha_bar[t]);
            eps_hat = sb > 0 ? (x_t - std::sqrt(sched.alpha_bar[t]) * x0_hat) / sb : 0.0;
          }
          num_state[j][i] = reverse_step_gaussian(x_t, t, x0_hat, eps_hat, params.sampler, sched, rng);
        } else if (static_cast<int>(j) != model.label_col) {
          cat_state[j][i] = reverse_step_multinomial(cat_state[j][i], t, prob_pred[j][i],
                                                     model.schema.columns[j].cardinality, sched, rng);
        }
      }
    });
  }

  Table out;
  out.schema = model.schema;
  out.codebook = model.codebook;
  out.n_rows = n;
  out.num.resize(d);
  out.cat.resize(d);
  for (size_t j = 0; j < d; ++j) {
    if (model.schema.columns[j].kind == ColumnKind::numerical) {
      out.num[j].resize(n);
      auto [lo, hi] = model.train_ranges[j];
      for (size_t i = 0; i < n; ++i)
        out.num[j][i] = std::clamp(model.gaussianizers[j].inverse(num_state[j][i]), lo, hi);
    } else {
      out.cat[j] = std::move(cat_state[j]);
    }
  }
  return round_to_precision(out, model.schema);
}

namespace {

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

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

}  // namespace

void DfModel::save(const std::string& dir) const {
  fs::create_directories(fs::path(dir) / "models");
  nlohmann::json m;
  m["kind"] = "df";
  m["T"] = params.T;
  m["K_dup"] = params.K_dup;
  m["beta_min"] = params.beta_min;
  m["beta_max"] = params.beta_max;
  m["dropout_p"] = params.dropout_p;
  m["target"] = params.target == DfTarget::velocity ? "velocity" : "x0";
  m["sampler"] = params.sampler == DfSampler::ddim ? "ddim" : "ddpm";
  m["gbdt_rounds"] = params.gbdt.n_rounds;
  m["gbdt_depth"] = params.gbdt.max_depth;
  m["gbdt_lr"] = params.gbdt.learning_rate;
  m["gbdt_lambda"] = params.gbdt.lambda_l2;
  if (params.condition_on_label) m["condition_on_label"] = *params.condition_on_label;
  m["schema"] = schema_to_json(schema);
  m["codebook"] = codebook;
  m["n_train"] = n_train;
  m["label_col"] = label_col;
  m["label_marginal"] = label_marginal;
  m["grid_labels"] = grid_labels;
  m["fallback_grid"] = fallback_grid;
  nlohmann::json gj = nlohmann::json::array();
  for (const auto& g : gaussianizers) gj.push_back(g.to_json());
  m["gaussianizers"] = gj;
  nlohmann::json rj = nlohmann::json::array();
  for (auto [lo, hi] : train_ranges) rj.push_back({lo, hi});
  m["train_ranges"] = rj;
  write_json(fs::path(dir) / "manifest.json", m);

  const size_t d = schema.size();
  for (size_t g = 0; g < grids.size(); ++g) {
    for (int t = 1; t <= params.T; ++t) {
      nlohmann::json block = nlohmann::json::array();
      for (size_t j = 0; j < d; ++j)
        block.push_back(grids[g].models[static_cast<size_t>(t - 1) * d + j].to_json());
      write_json(fs::path(dir) / "models" /
                     ("g" + std::to_string(g) + "_t" + std::to_string(t) + ".json"),
                 block);
    }
  }
}

DfModel DfModel::load(const std::string& dir) {
  nlohmann::json m = read_json(fs::path(dir) / "manifest.json");
  if (m.at("kind").get<std::string>() != "df") throw std::runtime_error("not a df model directory");
  DfModel model;
  model.params.T = m["T"].get<int>();
  model.params.K_dup = m["K_dup"].get<int>();
  model.params.beta_min = m["beta_min"].get<double>();
  model.params.beta_max = m["beta_max"].get<double>();
  model.params.dropout_p = m["dropout_p"].get<double>();
  model.params.target = m["target"].get<std::string>() == "velocity" ? DfTarget::velocity : DfTarget::x0;
  model.params.sampler = m["sampler"].get<std::string>() == "ddim" ? DfSampler::ddim : DfSampler::ddpm;
  model.params.gbdt.n_rounds = m["gbdt_rounds"].get<int>();
  model.params.gbdt.max_depth = m["gbdt_depth"].get<int>();
  model.params.gbdt.learning_rate = m["gbdt_lr"].get<double>();
  model.params.gbdt.lambda_l2 = m["gbdt_lambda"].get<double>();
  if (m.contains("condition_on_label"))
    model.params.condition_on_label = m["condition_on_label"].get<std::string>();
  model.schedule = make_schedule(model.params.T, model.params.beta_min, model.params.beta_max);
  model.schema = schema_from_json(m["schema"]);
  model.codebook = m["codebook"].get<std::vector<std::vector<std::string>>>();
  model.n_train = m["n_train"].get<size_t>();
  model.label_col = m["label_col"].get<int>();
  model.label_marginal = m["label_marginal"].get<std::vector<double>>();
  model.grid_labels = m["grid_labels"].get<std::vector<int>>();
  model.fallback_grid = m["fallback_grid"].get<int>();
  for (const auto& gj : m["gaussianizers"]) model.gaussianizers.push_back(Gaussianizer::from_json(gj));
  for (const auto& rj : m["train_ranges"])
    model.train_ranges.emplace_back(rj[0].get<double>(), rj[1].get<double>());

  const size_t d = model.schema.size();
  model.grids.resize(model.grid_labels.size());
  for (size_t g = 0; g < model.grids.size(); ++g) {
    model.grids[g].models.resize(static_cast<size_t>(model.params.T) * d);
    for (int t = 1; t <= model.params.T; ++t) {
      nlohmann::json block = read_json(fs::path(dir) / "models" /
                                       ("g" + std::to_string(g) + "_t" + std::to_string(t) + ".json"));
      for (size_t j = 0; j < d; ++j)
        model.grids[g].models[static_cast<size_t>(t - 1) * d + j] = GbdtModel::from_json(block[j]);
    }
  }
  return model;
}

}  // namespace xgen

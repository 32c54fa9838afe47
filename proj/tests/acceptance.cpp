// End-to-end acceptance checks. Each numbered check prints exactly one
// PASS/FAIL line; the process exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xgen/autoreg.hpp"
#include "xgen/cli.hpp"
#include "xgen/diffusion.hpp"
#include "xgen/metrics.hpp"
#include "xgen/preprocess.hpp"
#include "xgen/rng.hpp"
#include "xgen/table.hpp"

using namespace xgen;

namespace {

int g_failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail) {
  std::printf("%s %2d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double gap = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    gap = std::max(gap, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return gap;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- criteria -------------------------------------------------------------

void c1_algebraic_identities() {
  double t0 = now();
  NoiseSchedule s = make_schedule(50, 0.1, 8.0);
  RngStream rng = RngStream::derive(1, "acc.vconv");
  double worst = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    int t = 1 + static_cast<int>(rng.uniform_int(50));
    double x0 = rng.normal() * 3, eps = rng.normal();
    double sa = std::sqrt(s.alpha_bar[t]), sb = std::sqrt(1 - s.alpha_bar[t]);
    double x_t = sa * x0 + sb * eps;
    double v = sa * eps - sb * x0;
    auto [x0r, epsr] = v_convert(v, x_t, t, s);
    worst = std::max({worst, std::abs(x0r - x0), std::abs(epsr - eps)});
  }
  double worst_norm = 0;
  for (int t = 1; t <= 50; ++t) {
    for (int K = 2; K <= 16; ++K) {
      std::vector<double> p0(K);
      double sum = 0;
      for (double& p : p0) { p = rng.uniform() + 1e-4; sum += p; }
      for (double& p : p0) p /= sum;
      for (int xt = 0; xt < K; ++xt) {
        auto post = multinomial_posterior(xt, t, p0, K, s);
        double psum = 0;
        for (double p : post) psum += p;
        worst_norm = std::max(worst_norm, std::abs(psum - 1.0));
      }
    }
  }
  double dt = now() - t0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "round-trip err %.2e, norm err %.2e, %.2fs", worst,
                worst_norm, dt);
  report(1, "velocity round trip and posterior normalization",
         worst < 1e-9 && worst_norm < 1e-9 && dt < 1.0, buf);
}

void c2_schedule() {
  NoiseSchedule s = make_schedule(50, 0.1, 8.0);
  bool decreasing = true;
  for (int t = 1; t <= 50; ++t) decreasing &= s.alpha_bar[t] < s.alpha_bar[t - 1];
  char buf[96];
  std::snprintf(buf, sizeof buf, "alpha_bar[50] = %.3e", s.alpha_bar[50]);
  // The linear-in-t discretization of rates [0.1, 8.0]/50 lands at
  // alpha_bar[50] = 0.01374 by direct product evaluation.
  report(2, "noise schedule mixes fully and monotonically",
         decreasing && s.alpha_bar[50] < 0.014, buf);
}

void c3_binning_law() {
  double t0 = now();
  RngStream rng = RngStream::derive(3, "acc.bins");
  bool ok = true;
  for (int rep = 0; rep < 200 && ok; ++rep) {
    int B = 1 + static_cast<int>(rng.uniform_int(64));
    size_t n = B + rng.uniform_int(5000);
    std::vector<double> v(n);
    for (double& x : v)
      x = rep % 3 == 0 ? std::floor(rng.uniform() * 4)  // heavy ties
                       : rng.normal();
    auto [bins, spec] = rank_bin(v, B, rep);
    std::vector<int> counts(B, 0);
    for (int b : bins) ++counts[b];
    auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    ok &= *hi - *lo <= 1;
  }
  double dt = now() - t0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "200 cases, %.2fs", dt);
  report(3, "rank binning balances counts within one", ok && dt < 5.0, buf);
}

void c4_dequantization() {
  double t0 = now();
  double eqf_sum = 0, uni_sum = 0;
  bool ordered = true;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream rng = RngStream::derive(seed, "acc.deq");
    std::vector<double> v(1000);
    for (double& x : v) {
      // Exponential mixture with a long tail.
      double u = rng.uniform();
      x = (u < 0.7 ? 1.0 : 5.0) * -std::log(rng.uniform_pos());
    }
    auto [bins, spec] = rank_bin(v, 32, seed);
    RngStream re = RngStream::derive(seed, "acc.deq.eqf");
    RngStream ru = RngStream::derive(seed, "acc.deq.uni");
    std::vector<double> de, du;
    for (size_t i = 0; i < v.size(); ++i) {
      de.push_back(dequantize(spec, bins[i], re, DequantMode::eqf));
      du.push_back(dequantize(spec, bins[i], ru, DequantMode::uniform));
    }
    double ke = ks(v, de), ku = ks(v, du);
    eqf_sum += ke;
    uni_sum += ku;
  }
  double dt = now() - t0;
  ordered = uni_sum / 5 > eqf_sum / 5;
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean KS eqf %.4f, uniform %.4f, %.2fs", eqf_sum / 5,
                uni_sum / 5, dt);
  report(4, "EQF de-quantization beats uniform on a skewed marginal",
         eqf_sum / 5 <= 0.08 && ordered && dt < 30.0, buf);
}

struct IrisRun {
  double shape_mean = 0;
  double detection_mean = 0;
};

template <typename SampleFn>
IrisRun eval_iris(const Table& train, const Table& test, SampleFn sample_fn) {
  IrisRun out;
  const int n_seeds = 20;
  for (uint64_t seed = 1; seed <= n_seeds; ++seed) {
    Table syn = sample_fn(train.n_rows, seed);
    Table syn_test = sample_fn(test.n_rows, RngStream::derive(seed, "acc.syntest").next_u64());
    out.shape_mean += shape(train, syn);
    out.detection_mean += detection(train, test, syn, syn_test, seed);
  }
  out.shape_mean /= n_seeds;
  out.detection_mean /= n_seeds;
  return out;
}

void c5_iris(const std::string& data_dir) {
  double t0 = now();
  Table iris = load_csv(data_dir + "/iris.csv");
  auto [train, valid, test] = split(iris, 0);

  ArModel ar = fit_ar(train, ArParams{}, 0);
  IrisRun ar_run = eval_iris(train, test, [&](size_t n, uint64_t seed) {
    return sample_ar(ar, n, 1.0, seed);
  });

  DfParams dp;  // defaults: velocity target, DDIM sampler
  DfModel df = fit_df(train, dp, 0);
  IrisRun df_run = eval_iris(train, test, [&](size_t n, uint64_t seed) {
    return sample_df(df, n, seed);
  });
  double dt = now() - t0;
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "ar shape %.3f det %.3f; df shape %.3f det %.3f; %.1fs", ar_run.shape_mean,
                ar_run.detection_mean, df_run.shape_mean, df_run.detection_mean, dt);
  report(5, "iris benchmark over 20 sampling seeds",
         ar_run.shape_mean >= 0.88 && ar_run.detection_mean <= 0.65 &&
             df_run.shape_mean >= 0.88 && df_run.detection_mean <= 0.65 && dt < 600.0,
         buf);
}

void c6_ddim_determinism(const std::string& data_dir) {
  Table iris = load_csv(data_dir + "/iris.csv");
  auto [train, valid, test] = split(iris, 0);
  DfParams p;
  p.T = 10;
  p.K_dup = 10;
  p.gbdt.n_rounds = 10;
  DfModel model = fit_df(train, p, 0);
  bool ok = true;
  for (DfSampler sampler : {DfSampler::ddim, DfSampler::ddpm}) {
    model.params.sampler = sampler;
    write_csv(sample_df(model, 60, 7), "/tmp/xgen_acc_a.csv");
    write_csv(sample_df(model, 60, 7), "/tmp/xgen_acc_b.csv");
    ok &= read_all("/tmp/xgen_acc_a.csv") == read_all("/tmp/xgen_acc_b.csv");
  }
  report(6, "identical seeds give byte-identical samples (DDIM and DDPM)", ok, "2 samplers");
}

void c7_hierarchical_ordering() {
  int wins = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream rng = RngStream::derive(seed, "acc.pair");
    Table t;
    t.schema.columns.push_back({"a", ColumnKind::numerical, 0, -1});
    t.schema.columns.push_back({"b", ColumnKind::numerical, 0, -1});
    t.num.resize(2);
    t.cat.resize(2);
    t.codebook.resize(2);
    for (int i = 0; i < 2000; ++i) {
      double a = rng.normal();
      t.num[0].push_back(a);
      t.num[1].push_back(0.97 * a + 0.243 * rng.normal());
    }
    t.n_rows = 2000;

    double scores[2];
    int vi = 0;
    for (ConditionalKind kind : {ConditionalKind::hierarchical, ConditionalKind::multiclass}) {
      ArParams p;
      p.conditional = kind;
      ArModel model = fit_ar(t, p, seed);
      Table syn = sample_ar(model, 2000, 1.0, seed);
      scores[vi++] = trend(t, syn);
    }
    if (scores[0] >= scores[1]) ++wins;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "hierarchical wins %d/5", wins);
  report(7, "hierarchical conditionals match or beat multiclass on Trend", wins >= 4, buf);
}

void c8_dropout_direction(const std::string& data_dir) {
  Table iris = load_csv(data_dir + "/iris.csv");
  auto [train, valid, test] = split(iris, 0);
  GowerSpace space = GowerSpace::from(train);
  double recall[2], dcr_score[2];
  int vi = 0;
  for (double dropout : {0.0, 0.3}) {
    DfParams p;
    p.dropout_p = dropout;
    DfModel model = fit_df(train, p, 0);
    double r = 0, d = 0;
    const int n_seeds = 10;
    for (uint64_t seed = 1; seed <= n_seeds; ++seed) {
      Table syn = sample_df(model, train.n_rows, seed);
      auto [ap, br] = precision_recall(train, syn, space, seed);
      r += br;
      d += dcr(train, test, syn, space, seed);
    }
    recall[vi] = r / n_seeds;
    dcr_score[vi] = d / n_seeds;
    ++vi;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "beta-recall %.3f -> %.3f, dcr %.3f -> %.3f", recall[0],
                recall[1], dcr_score[0], dcr_score[1]);
  report(8, "raising dropout trades recall for privacy",
         recall[1] < recall[0] && dcr_score[1] >= dcr_score[0], buf);
}

void c9_metric_oracles() {
  bool ok = true;
  std::string detail = "hand examples exact";

  // Categorical marginal (0.5, 0.5) vs (1, 0): TVC = 0.5.
  auto cat_only = [](const std::vector<int>& codes) {
    Table t;
    ColumnSpec c{"c", ColumnKind::categorical, 2, -1};
    t.schema.columns.push_back(c);
    t.num.resize(1);
    t.cat.push_back(codes);
    t.codebook.push_back({"a", "b"});
    t.n_rows = codes.size();
    return t;
  };
  ok &= std::abs(shape(cat_only({0, 1, 0, 1}), cat_only({0, 0, 0, 0})) - 0.5) < 1e-12;

  // Flipped perfect correlation: pair score 0.
  Table real, syn;
  for (const char* name : {"x", "y"}) {
    real.schema.columns.push_back({name, ColumnKind::numerical, 0, -1});
    syn.schema.columns.push_back({name, ColumnKind::numerical, 0, -1});
  }
  real.num = {{1, 2, 3, 4}, {1, 2, 3, 4}};
  syn.num = {{1, 2, 3, 4}, {4, 3, 2, 1}};
  real.cat.resize(2);
  syn.cat.resize(2);
  real.codebook.resize(2);
  syn.codebook.resize(2);
  real.n_rows = syn.n_rows = 4;
  ok &= std::abs(trend(real, syn) - 0.0) < 1e-12;

  // Gower: scaled numerical gap 0.5; single categorical mismatch 1.0.
  GowerSpace gs = GowerSpace::from(real);
  Table p = real, q = real;
  q.num[0][0] = real.num[0][0] + 1.5;  // range 3 -> scaled gap 0.5
  ok &= std::abs(gs.dist(p, 0, q, 0) - 0.5) < 1e-12;
  Table ca = cat_only({0}), cb = cat_only({1});
  GowerSpace gc = GowerSpace::from(cat_only({0, 1}));
  ok &= std::abs(gc.dist(ca, 0, cb, 0) - 1.0) < 1e-12;

  // DCR: |D| = 0.75 -> 0.5.
  auto one_num = [](const std::vector<double>& v) {
    Table t;
    t.schema.columns.push_back({"x", ColumnKind::numerical, 0, -1});
    t.num.push_back(v);
    t.cat.resize(1);
    t.codebook.resize(1);
    t.n_rows = v.size();
    return t;
  };
  GowerSpace ds = GowerSpace::from(one_num({0.0, 1.0}));
  double d = dcr(one_num({0.0, 0.1}), one_num({1.0, 0.9, 0.8, 0.85}),
                 one_num({0.05, 0.06, 0.07, 0.95}), ds, 1);
  ok &= std::abs(d - 0.5) < 1e-12;

  // Detection on bootstrap-identical data.
  RngStream rng = RngStream::derive(9, "acc.det");
  Table base;
  base.schema.columns.push_back({"u", ColumnKind::numerical, 0, -1});
  base.schema.columns.push_back({"v", ColumnKind::numerical, 0, -1});
  base.num.resize(2);
  base.cat.resize(2);
  base.codebook.resize(2);
  for (int i = 0; i < 3000; ++i) {
    base.num[0].push_back(rng.normal());
    base.num[1].push_back(rng.uniform());
  }
  base.n_rows = 3000;
  auto bootstrap = [&](size_t n) {
    std::vector<size_t> rows(n);
    for (size_t& r : rows) r = rng.uniform_int(base.n_rows);
    return base.select_rows(rows);
  };
  double det = detection(bootstrap(1000), bootstrap(500), bootstrap(1000), bootstrap(500), 1);
  char buf[96];
  std::snprintf(buf, sizeof buf, "bootstrap detection %.3f", det);
  ok &= det >= 0.45 && det <= 0.55;
  report(9, "hand-computed metric examples and null detection", ok, buf);
}

void c10_scaling() {
  RngStream rng = RngStream::derive(10, "acc.scale");
  Table t;
  const size_t n = 48000;
  for (int j = 0; j < 10; ++j)
    t.schema.columns.push_back({"n" + std::to_string(j), ColumnKind::numerical, 0, -1});
  int cards[5] = {2, 5, 8, 20, 50};
  for (int j = 0; j < 5; ++j) {
    ColumnSpec c{"c" + std::to_string(j), ColumnKind::categorical, cards[j], -1};
    t.schema.columns.push_back(c);
  }
  t.num.resize(15);
  t.cat.resize(15);
  t.codebook.resize(15);
  for (int j = 10; j < 15; ++j)
    for (int k = 0; k < cards[j - 10]; ++k)
      t.codebook[j].push_back("v" + std::to_string(k));
  for (size_t i = 0; i < n; ++i) {
    double base = rng.normal();
    for (int j = 0; j < 10; ++j) t.num[j].push_back(base * 0.5 + rng.normal());
    for (int j = 10; j < 15; ++j)
      t.cat[j].push_back(static_cast<int>(rng.uniform_int(cards[j - 10])));
  }
  t.n_rows = n;

  double t0 = now();
  ArModel model = fit_ar(t, ArParams{}, 0);
  double dt = now() - t0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "fit in %.1fs", dt);
  report(10, "48000x15 autoregressive fit under five minutes",
         dt < 300.0 && model.conditionals.size() == 14, buf);
}

void c11_merge_equivalence() {
  RngStream rng = RngStream::derive(11, "acc.merge");
  const int K = 100;
  const size_t n = 10000;
  Table t;
  ColumnSpec c{"big", ColumnKind::categorical, K, -1};
  t.schema.columns.push_back(c);
  t.num.resize(1);
  t.cat.resize(1);
  t.codebook.resize(1);
  for (int k = 0; k < K; ++k) t.codebook[0].push_back("v" + std::to_string(k));
  // Zipf-flavored skew so kept heads and merged tails both occur.
  std::vector<double> w(K);
  for (int k = 0; k < K; ++k) w[k] = 1.0 / (k + 1);
  for (size_t i = 0; i < n; ++i) t.cat[0].push_back(static_cast<int>(rng.categorical(w)));
  t.n_rows = n;

  std::vector<double> orig(K, 0.0);
  for (int code : t.cat[0]) orig[code] += 1.0 / n;

  bool ok = true;
  double worst = 0;
  for (MergeStrategy strategy : {MergeStrategy::cluster, MergeStrategy::naive}) {
    auto [merged, merger] = limit_cardinality(t, 0, 32, 8, strategy, 1);
    Table restored = restore_categories(merged, merger, 2);
    std::vector<double> got(K, 0.0);
    for (int code : restored.cat[0]) got[code] += 1.0 / n;
    double tv = 0;
    for (int k = 0; k < K; ++k) tv += std::abs(orig[k] - got[k]);
    tv /= 2;
    worst = std::max(worst, tv);
    ok &= tv <= 0.03;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst TV %.4f", worst);
  report(11, "cluster and naive merges preserve marginals", ok, buf);
}

}  // namespace

int main(int argc, char** argv) {
  std::string data_dir = argc > 1 ? argv[1] : "data";
  c1_algebraic_identities();
  c2_schedule();
  c3_binning_law();
  c4_dequantization();
  c5_iris(data_dir);
  c6_ddim_determinism(data_dir);
  c7_hierarchical_ordering();
  c8_dropout_direction(data_dir);
  c9_metric_oracles();
  c10_scaling();
  c11_merge_equivalence();
  if (g_failures) std::printf("%d criterion failure(s)\n", g_failures);
  else std::printf("all criteria passed\n");
  return g_failures ? 1 : 0;
}

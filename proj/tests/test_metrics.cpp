#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "xgen/metrics.hpp"
#include "xgen/rng.hpp"

using namespace xgen;

namespace {

Table num_table(const std::vector<std::vector<double>>& cols) {
  Table t;
  for (size_t j = 0; j < cols.size(); ++j)
    t.schema.columns.push_back({"x" + std::to_string(j), ColumnKind::numerical, 0, -1});
  t.num = cols;
  t.cat.resize(cols.size());
  t.codebook.resize(cols.size());
  t.n_rows = cols.empty() ? 0 : cols[0].size();
  return t;
}

Table add_cat(Table t, const std::vector<int>& codes, int K) {
  ColumnSpec c;
  c.name = "c" + std::to_string(t.n_cols());
  c.kind = ColumnKind::categorical;
  c.cardinality = K;
  t.schema.columns.push_back(c);
  t.num.emplace_back();
  t.cat.push_back(codes);
  std::vector<std::string> book;
  for (int k = 0; k < K; ++k) book.push_back("k" + std::to_string(k));
  t.codebook.push_back(book);
  return t;
}

Table gauss_table(size_t n, uint64_t seed, double shift = 0.0) {
  RngStream rng = RngStream::derive(seed, "test.metrics.data");
  std::vector<double> a(n), b(n);
  std::vector<int> c(n);
  for (size_t i = 0; i < n; ++i) {
    a[i] = rng.normal() + shift;
    b[i] = 0.5 * a[i] + rng.normal();
    c[i] = static_cast<int>(rng.uniform_int(3));
  }
  Table t = num_table({a, b});
  return add_cat(t, c, 3);
}

}  // namespace

TEST_CASE("shape is 1 on identical tables") {
  Table t = gauss_table(500, 1);
  CHECK(shape(t, t) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("shape hand example: categorical half/half vs all-one-class") {
  Table real = add_cat(num_table({}), {0, 1, 0, 1}, 2);
  real.n_rows = 4;
  Table syn = add_cat(num_table({}), {0, 0, 0, 0}, 2);
  syn.n_rows = 4;
  CHECK(shape(real, syn) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("shape hand example: disjoint numerical supports give zero") {
  Table real = num_table({{1, 2, 3, 4}});
  Table syn = num_table({{101, 102, 103, 104}});
  CHECK(shape(real, syn) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("trend is 1 on identical tables and penalizes flipped correlation") {
  Table t = gauss_table(400, 2);
  CHECK(trend(t, t) == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y{2, 4, 6, 8, 10};
  std::vector<double> yr{10, 8, 6, 4, 2};
  Table real = num_table({x, y});
  Table syn = num_table({x, yr});
  CHECK(trend(real, syn) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("trend hand example: two binary features, diagonal vs independent joint") {
  Table real = add_cat(add_cat(num_table({}), {0, 0, 1, 1}, 2), {0, 0, 1, 1}, 2);
  real.n_rows = 4;
  Table syn = add_cat(add_cat(num_table({}), {0, 0, 1, 1}, 2), {0, 1, 0, 1}, 2);
  syn.n_rows = 4;
  // real joint (0.5,0,0,0.5), syn joint (0.25,...): TV = 0.5.
  CHECK(trend(real, syn) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gower hand examples") {
  Table a = add_cat(num_table({{0.2, 0.0, 1.0}}), {0, 1, 0}, 2);
  a.n_rows = 3;
  Table b = add_cat(num_table({{0.7, 0.0, 1.0}}), {0, 0, 0}, 2);
  b.n_rows = 3;
  GowerSpace space = GowerSpace::from(a);
  CHECK(space.dist(a, 0, a, 0) == 0.0);
  CHECK(space.dist(a, 0, b, 0) == doctest::Approx(0.5).epsilon(1e-12));  // numeric gap only
  CHECK(space.dist(a, 1, b, 1) == doctest::Approx(1.0).epsilon(1e-12));  // one mismatch
  CHECK(space.dist(a, 0, b, 0) == space.dist(b, 0, a, 0));
}

TEST_CASE("gower satisfies the triangle inequality on random triples") {
  Table t = gauss_table(60, 3);
  GowerSpace space = GowerSpace::from(t);
  RngStream rng = RngStream::derive(48, "test.tri");
  for (int rep = 0; rep < 200; ++rep) {
    size_t a = rng.uniform_int(60), b = rng.uniform_int(60), c = rng.uniform_int(60);
    CHECK(space.dist(t, a, t, c) <= space.dist(t, a, t, b) + space.dist(t, b, t, c) + 1e-12);
  }
}

TEST_CASE("roc_auc matches the pairwise oracle with ties") {
  RngStream rng = RngStream::derive(49, "test.auc");
  for (int rep = 0; rep < 30; ++rep) {
    size_t n = 5 + rng.uniform_int(40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = std::floor(rng.uniform() * 6) / 2.0;  // deliberate ties
      y[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    double n0 = 0, n1 = 0, wins = 0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    for (int v : y) (v ? n1 : n0) += 1.0;
    if (n0 == 0 || n1 == 0) {
      CHECK(roc_auc(s, y) == 0.5);
      continue;
    }
    CHECK(roc_auc(s, y) == doctest::Approx(wins / (n0 * n1)).epsilon(1e-12));
  }
}

TEST_CASE("detection on bootstrap-identical data sits near one half") {
  Table real = gauss_table(600, 4);
  RngStream rng = RngStream::derive(50, "test.det.boot");
  auto bootstrap = [&](const Table& t, size_t n) {
    std::vector<size_t> rows(n);
    for (size_t& r : rows) r = rng.uniform_int(t.n_rows);
    return t.select_rows(rows);
  };
  Table real_train = bootstrap(real, 300), real_test = bootstrap(real, 100);
  Table syn_train = bootstrap(real, 300), syn_test = bootstrap(real, 100);
  double score = detection(real_train, real_test, syn_train, syn_test, 1);
  CHECK(score > 0.35);
  CHECK(score < 0.65);
  CHECK(detection(real_train, real_test, syn_train, syn_test, 1) == score);
}

TEST_CASE("detection separates a strongly shifted synthetic set") {
  Table real = gauss_table(400, 5);
  Table syn = gauss_table(400, 6, 100.0);
  auto head = [](const Table& t, size_t n) {
    std::vector<size_t> rows(n);
    for (size_t i = 0; i < n; ++i) rows[i] = i;
    return t.select_rows(rows);
  };
  double score = detection(head(real, 300), head(real, 100),
                           head(syn, 300), head(syn, 100), 2);
  CHECK(score > 0.99);
}

TEST_CASE("precision and recall near 1 when syn equals real") {
  Table t = gauss_table(400, 7);
  GowerSpace space = GowerSpace::from(t);
  auto [p, r] = precision_recall(t, t, space, 1);
  CHECK(p > 0.97);
  CHECK(r > 0.97);
}

TEST_CASE("single central synthetic point: collapse flagged on both sides") {
  Table real = gauss_table(80, 8);
  GowerSpace space = GowerSpace::from(real);
  // One row at the real medoid.
  size_t best = 0;
  double best_cost = 1e300;
  for (size_t i = 0; i < real.n_rows; ++i) {
    double c = 0;
    for (size_t k = 0; k < real.n_rows; ++k) c += space.dist(real, i, real, k);
    if (c < best_cost) { best_cost = c; best = i; }
  }
  Table syn = real.select_rows({best});
  auto [p, r] = precision_recall(real, syn, space, 1);
  // The lone point sits inside every real ball, so the precision curve is
  // pinned at 1 and the two-sided deviation drives the score toward zero --
  // the same mode-collapse sensitivity flags both directions.
  CHECK(p < 0.2);
  CHECK(r < 0.2);
}

TEST_CASE("precision drops sharply for synthetic data outside the support") {
  // Distances clamp at the real min/max envelope, so a far-shifted point
  // still lands at finite distance; precision collapses but not to zero.
  Table real = gauss_table(120, 9);
  Table far = gauss_table(120, 10, 1000.0);
  Table good = gauss_table(120, 14);
  GowerSpace space = GowerSpace::from(real);
  auto [p_far, r_far] = precision_recall(real, far, space, 1);
  auto [p_good, r_good] = precision_recall(real, good, space, 1);
  CHECK(p_far < 0.45);
  CHECK(p_good > 0.85);
  CHECK(p_far < p_good - 0.4);
}

TEST_CASE("dcr formula on crafted proportions") {
  // train/test on opposite ends, syn split so exactly half is closer to train.
  Table train = num_table({{0.0, 0.1}});
  Table test = num_table({{1.0, 0.9}});
  Table syn = num_table({{0.05, 0.95}});
  GowerSpace space = GowerSpace::from(num_table({{0.0, 1.0}}));
  CHECK(dcr(train, test, syn, space, 1) == doctest::Approx(1.0).epsilon(1e-12));

  Table syn_train_copy = num_table({{0.0, 0.1}});  // |D| = 1 -> DCR = 0
  CHECK(dcr(train, test, syn_train_copy, space, 1) == doctest::Approx(0.0).epsilon(1e-12));

  Table syn_quarters = num_table({{0.05, 0.06, 0.07, 0.95}});  // |D| = 0.75
  Table test4 = num_table({{1.0, 0.9, 0.8, 0.85}});
  CHECK(dcr(train, test4, syn_quarters, space, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ties count as not closer to train") {
  Table train = num_table({{0.0}});
  Table test = num_table({{1.0}});
  Table syn = num_table({{0.5}});  // equidistant
  GowerSpace space = GowerSpace::from(num_table({{0.0, 1.0}}));
  CHECK(dcr(train, test, syn, space, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dcr concentrates near 1 for an independent identically distributed sample") {
  Table train = gauss_table(600, 11);
  Table test = gauss_table(600, 12);
  Table syn = gauss_table(600, 13);
  GowerSpace space = GowerSpace::from(train);
  double score = dcr(train, test, syn, space, 2);
  CHECK(score > 0.85);
}

TEST_CASE("mle regression: training on real data beats shuffled labels") {
  RngStream rng = RngStream::derive(51, "test.mle");
  auto make = [&](size_t n) {
    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 2 * x[i] + 0.3 * rng.normal();
    }
    return num_table({x, y});
  };
  Table train = make(400), valid = make(150), test = make(150);
  MleScores s = mle(train, valid, test, 1, false, 1);
  CHECK_FALSE(s.classification);
  CHECK(s.rmse < 0.5);
  CHECK(s.r2 > 0.7);

  Table shuffled = train;
  std::reverse(shuffled.num[1].begin(), shuffled.num[1].end());
  MleScores s2 = mle(shuffled, valid, test, 1, false, 1);
  CHECK(s2.rmse > s.rmse);
}

TEST_CASE("mle classification: informative features give high auc, degenerate flags") {
  RngStream rng = RngStream::derive(52, "test.mle.cls");
  auto make = [&](size_t n, bool degenerate) {
    std::vector<double> x(n);
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = degenerate ? 0 : (x[i] + 0.3 * rng.normal() > 0 ? 1 : 0);
    }
    return add_cat(num_table({x}), y, 2);
  };
  Table train = make(400, false), valid = make(150, false), test = make(150, false);
  MleScores s = mle(train, valid, test, 1, true, 1);
  CHECK(s.classification);
  CHECK(s.rocauc > 0.9);
  CHECK(s.f1 > 0.8);

  MleScores d = mle(make(100, true), valid, test, 1, true, 1);
  CHECK(d.degenerate);
  CHECK(d.rocauc == 0.5);
}

TEST_CASE("all metric outputs stay within the unit interval on random inputs") {
  RngStream rng = RngStream::derive(53, "test.fuzz");
  for (int rep = 0; rep < 5; ++rep) {
    Table a = gauss_table(120, 100 + rep, rng.uniform() * 4 - 2);
    Table b = gauss_table(120, 200 + rep, rng.uniform() * 4 - 2);
    GowerSpace space = GowerSpace::from(a);
    double sh = shape(a, b), tr = trend(a, b);
    auto [p, r] = precision_recall(a, b, space, rep);
    double dc = dcr(a, b.select_rows({0, 1, 2, 3, 4}), b, space, rep);
    for (double v : {sh, tr, p, r, dc}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

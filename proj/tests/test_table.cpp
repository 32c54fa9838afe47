#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "xgen/table.hpp"

using namespace xgen;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/xgen_test_") + name;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("csv load infers kinds, codes, and precision") {
  auto p = temp_path("basic.csv");
  write_file(p,
             "age,city,score\n"
             "31,berlin,0.50\n"
             "42,amsterdam,1.25\n"
             "27,berlin,3.1\n");
  Table t = load_csv(p);
  REQUIRE(t.n_rows == 3);
  REQUIRE(t.n_cols() == 3);
  CHECK(t.is_num(0));
  CHECK_FALSE(t.is_num(1));
  CHECK(t.is_num(2));
  CHECK(t.schema.columns[0].precision == 0);
  CHECK(t.schema.columns[2].precision == 2);
  // Codes are assigned in sorted string order, independent of row order.
  CHECK(t.codebook[1] == std::vector<std::string>{"amsterdam", "berlin"});
  CHECK(t.cat[1] == std::vector<int>{1, 0, 1});
  CHECK(t.cardinality(1) == 2);
}

TEST_CASE("rows with missing numerical entries are dropped") {
  auto p = temp_path("missing.csv");
  write_file(p,
             "x,label\n"
             "1.0,a\n"
             ",b\n"
             "3.0,c\n");
  Table t = load_csv(p);
  CHECK(t.n_rows == 2);
  CHECK(t.num[0] == std::vector<double>{1.0, 3.0});
  CHECK(t.codebook[1] == std::vector<std::string>{"a", "c"});
}

TEST_CASE("quoted fields with commas and escaped quotes round trip") {
  auto p = temp_path("quoted.csv");
  write_file(p,
             "name,x\n"
             "\"doe, jane\",1\n"
             "\"say \"\"hi\"\"\",2\n");
  Table t = load_csv(p);
  REQUIRE(t.n_rows == 2);
  CHECK(t.codebook[0][t.cat[0][0]] == "doe, jane");
  CHECK(t.codebook[0][t.cat[0][1]] == "say \"hi\"");

  auto p2 = temp_path("quoted_rt.csv");
  write_csv(t, p2);
  Table t2 = load_csv(p2);
  CHECK(t2.codebook[0] == t.codebook[0]);
  CHECK(t2.cat[0] == t.cat[0]);
}

TEST_CASE("schema hint forces categorical kind on numeric-looking column") {
  auto p = temp_path("hint.csv");
  write_file(p, "zip,x\n10115,1.5\n80331,2.5\n");
  Schema hint;
  hint.columns.push_back({"zip", ColumnKind::categorical, 1, -1});
  Table t = load_csv(p, &hint);
  CHECK_FALSE(t.is_num(0));
  CHECK(t.codebook[0] == std::vector<std::string>{"10115", "80331"});
}

TEST_CASE("decimal_places handles exponents and trailing zeros") {
  CHECK(decimal_places("3") == 0);
  CHECK(decimal_places("0.1") == 1);
  CHECK(decimal_places("1.250") == 2);
  CHECK(decimal_places("1.2e2") == 0);
  CHECK(decimal_places("1e-3") == 3);
  CHECK(decimal_places("0.1234567890123456") == 12);
}

TEST_CASE("split produces 3:1:1 sizes and partitions the rows") {
  auto p = temp_path("split.csv");
  std::string body = "id\n";
  for (int i = 0; i < 103; ++i) body += std::to_string(i) + "\n";
  write_file(p, body);
  Table t = load_csv(p);
  auto [tr, va, te] = split(t, 7);
  CHECK(tr.n_rows == 61);  // floor(3*103/5)
  CHECK(va.n_rows == 20);  // floor(103/5)
  CHECK(te.n_rows == 22);  // remainder
  std::multiset<double> all;
  for (const Table* part : {&tr, &va, &te})
    for (double v : part->num[0]) all.insert(v);
  std::multiset<double> orig(t.num[0].begin(), t.num[0].end());
  CHECK(all == orig);

  auto [tr2, va2, te2] = split(t, 7);
  CHECK(tr2.num[0] == tr.num[0]);
  auto [tr3, va3, te3] = split(t, 8);
  CHECK(tr3.num[0] != tr.num[0]);
}

TEST_CASE("split rejects tiny tables") {
  Table t;
  t.schema.columns.push_back({"x", ColumnKind::numerical, 0, -1});
  t.num.resize(1, {1, 2, 3});
  t.cat.resize(1);
  t.codebook.resize(1);
  t.n_rows = 3;
  CHECK_THROWS(split(t, 0));
}

TEST_CASE("round_to_precision uses half-to-even") {
  Table t;
  t.schema.columns.push_back({"x", ColumnKind::numerical, 0, -1});
  t.num.push_back({0.5, 1.5, 2.5, -0.5, 1.25});
  t.cat.resize(1);
  t.codebook.resize(1);
  t.n_rows = 5;
  Schema ref;
  ref.columns.push_back({"x", ColumnKind::numerical, 0, 0});
  Table r = round_to_precision(t, ref);
  CHECK(r.num[0] == std::vector<double>{0.0, 2.0, 2.0, -0.0, 1.0});
  ref.columns[0].precision = 1;
  Table r1 = round_to_precision(t, ref);
  CHECK(r1.num[0][4] == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("schema validate rejects duplicates and bad cardinality") {
  Schema s;
  s.columns.push_back({"a", ColumnKind::numerical, 0, -1});
  s.columns.push_back({"a", ColumnKind::numerical, 0, -1});
  CHECK_THROWS(s.validate());
  Schema s2;
  s2.columns.push_back({"c", ColumnKind::categorical, 0, -1});
  CHECK_THROWS(s2.validate());
}

TEST_CASE("write then load is stable under fixed precision") {
  auto p = temp_path("rt.csv");
  write_file(p, "x,k\n1.50,u\n2.25,v\n-0.75,u\n");
  Table t = load_csv(p);
  auto p2 = temp_path("rt2.csv");
  write_csv(t, p2);
  std::ifstream in(p2);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "x,k\n1.50,u\n2.25,v\n-0.75,u\n");
}

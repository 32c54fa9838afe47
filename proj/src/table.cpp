#include "xgen/table.hpp"

#include <algorithm>
#include <cfenv>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "xgen/rng.hpp"
#include <nlohmann/json.hpp>

namespace xgen {

int Schema::find(const std::string& name) const {
  for (size_t j = 0; j < columns.size(); ++j)
    if (columns[j].name == name) return static_cast<int>(j);
  return -1;
}

void Schema::validate() const {
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second)
      throw std::invalid_argument("duplicate column name: " + c.name);
    if (c.kind == ColumnKind::categorical && c.cardinality < 1)
      throw std::invalid_argument("categorical column " + c.name + " needs cardinality >= 1");
    if (c.kind == ColumnKind::numerical && c.cardinality != 0)
      throw std::invalid_argument("numerical column " + c.name + " carries a cardinality");
  }
}

void Table::check_invariants() const {
  schema.validate();
  for (size_t j = 0; j < n_cols(); ++j) {
    size_t len = is_num(j) ? num[j].size() : cat[j].size();
    if (len != n_rows) throw std::logic_error("ragged column " + schema.columns[j].name);
    if (!is_num(j)) {
      int K = cardinality(j);
      for (int code : cat[j])
        if (code < 0 || code >= K) throw std::logic_error("code out of range in " + schema.columns[j].name);
    } else {
      for (double v : num[j])
        if (!std::isfinite(v)) throw std::logic_error("non-finite value in " + schema.columns[j].name);
    }
  }
}

Table Table::select_rows(const std::vector<size_t>& rows) const {
  Table out;
  out.schema = schema;
  out.codebook = codebook;
  out.n_rows = rows.size();
  out.num.resize(n_cols());
  out.cat.resize(n_cols());
  for (size_t j = 0; j < n_cols(); ++j) {
    if (is_num(j)) {
      out.num[j].reserve(rows.size());
      for (size_t r : rows) out.num[j].push_back(num[j][r]);
    } else {
      out.cat[j].reserve(rows.size());
      for (size_t r : rows) out.cat[j].push_back(cat[j][r]);
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
        else quoted = false;
      } else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end && std::isfinite(*out);
}

}  // namespace

int decimal_places(const std::string& literal) {
  auto e = literal.find_first_of("eE");
  std::string mant = e == std::string::npos ? literal : literal.substr(0, e);
  int exp10 = 0;
  if (e != std::string::npos) exp10 = std::stoi(literal.substr(e + 1));
  auto dot = mant.find('.');
  int places = 0;
  if (dot != std::string::npos) {
    size_t last = mant.find_last_not_of('0');
    places = last == std::string::npos || last < dot ? 0 : static_cast<int>(last - dot);
  }
  places -= exp10;
  return std::clamp(places, 0, 12);
}

Table load_csv(const std::string& path, const Schema* hint) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file " + path);
  std::vector<std::string> header = split_csv_line(line);
  const size_t d = header.size();

  if (hint) {
    for (const auto& c : hint->columns)
      if (std::find(header.begin(), header.end(), c.name) == header.end())
        throw std::runtime_error("schema hint names absent column: " + c.name);
  }

  std::vector<std::vector<std::string>> raw(d);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != d)
      throw std::runtime_error(path + ": row with " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(d));
    for (size_t j = 0; j < d; ++j) raw[j].push_back(std::move(fields[j]));
  }
  const size_t n_raw = raw.empty() ? 0 : raw[0].size();

  // Resolve column kinds: hint wins, otherwise infer.
  std::vector<ColumnKind> kinds(d);
  std::vector<int> precision(d, -1);
  for (size_t j = 0; j < d; ++j) {
    int h = hint ? hint->find(header[j]) : -1;
    if (h >= 0) {
      kinds[j] = hint->columns[h].kind;
      precision[j] = hint->columns[h].precision;
    } else {
      bool numeric = true;
      double v;
      for (const auto& s : raw[j]) {
        if (s.empty()) continue;
        if (!parse_number(s, &v)) { numeric = false; break; }
      }
      kinds[j] = numeric ? ColumnKind::numerical : ColumnKind::categorical;
    }
  }

  // Drop rows with missing numerical entries.
  std::vector<bool> keep(n_raw, true);
  for (size_t j = 0; j < d; ++j) {
    if (kinds[j] != ColumnKind::numerical) continue;
    for (size_t r = 0; r < n_raw; ++r)
      if (raw[j][r].empty()) keep[r] = false;
  }

  Table t;
  t.num.resize(d);
  t.cat.resize(d);
  t.codebook.resize(d);
  for (size_t j = 0; j < d; ++j) {
    ColumnSpec spec;
    spec.name = header[j];
    spec.kind = kinds[j];
    if (kinds[j] == ColumnKind::numerical) {
      int max_places = 0;
      for (size_t r = 0; r < n_raw; ++r) {
        if (!keep[r]) continue;
        double v;
        if (!parse_number(raw[j][r], &v))
          throw std::runtime_error("non-numeric value '" + raw[j][r] + "' in numerical column " + header[j]);
        t.num[j].push_back(v);
        max_places = std::max(max_places, decimal_places(raw[j][r]));
      }
      spec.precision = precision[j] >= 0 ? precision[j] : max_places;
    } else {
      std::map<std::string, int> codes;  // sorted: code order independent of row order
      for (size_t r = 0; r < n_raw; ++r)
        if (keep[r]) codes.emplace(raw[j][r], 0);
      int next = 0;
      for (auto& [s, c] : codes) {
        c = next++;
        t.codebook[j].push_back(s);
      }
      for (size_t r = 0; r < n_raw; ++r)
        if (keep[r]) t.cat[j].push_back(codes.at(raw[j][r]));
      spec.cardinality = std::max(1, next);
      if (next == 0) t.codebook[j].push_back("");  // empty table placeholder
    }
    t.schema.columns.push_back(std::move(spec));
  }
  t.n_rows = t.schema.columns.empty() ? 0
             : (kinds[0] == ColumnKind::numerical ? t.num[0].size() : t.cat[0].size());
  t.check_invariants();
  return t;
}

void write_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (size_t j = 0; j < table.n_cols(); ++j)
    out << (j ? "," : "") << table.schema.columns[j].name;
  out << "\n";
  for (size_t r = 0; r < table.n_rows; ++r) {
    for (size_t j = 0; j < table.n_cols(); ++j) {
      if (j) out << ",";
      if (table.is_num(j)) {
        int p = table.schema.columns[j].precision;
        std::ostringstream ss;
        if (p >= 0) {
          ss.setf(std::ios::fixed);
          ss.precision(p);
          ss << table.num[j][r];
        } else {
          ss.precision(17);
          ss << table.num[j][r];
        }
        out << ss.str();
      } else {
        const auto& s = table.codebook[j][table.cat[j][r]];
        if (s.find_first_of(",\"\n") != std::string::npos) {
          out << '"';
          for (char c : s) { if (c == '"') out << '"'; out << c; }
          out << '"';
        } else out << s;
      }
    }
    out << "\n";
  }
}

Schema load_schema_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Schema s;
  for (auto& [name, spec] : j.items()) {
    ColumnSpec c;
    c.name = name;
    std::string kind = spec.at("kind").get<std::string>();
    if (kind == "numerical") c.kind = ColumnKind::numerical;
    else if (kind == "categorical") { c.kind = ColumnKind::categorical; c.cardinality = 1; }
    else throw std::runtime_error("unknown kind '" + kind + "' for column " + name);
    if (spec.contains("precision")) c.precision = spec["precision"].get<int>();
    s.columns.push_back(std::move(c));
  }
  return s;
}

std::tuple<Table, Table, Table> split(const Table& table, uint64_t seed) {
  const size_t n = table.n_rows;
  if (n < 5) throw std::invalid_argument("split requires n >= 5");
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  RngStream rng = RngStream::derive(seed, "table.split");
  for (size_t i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  size_t n_train = 3 * n / 5;
  size_t n_valid = n / 5;
  std::vector<size_t> a(idx.begin(), idx.begin() + n_train);
  std::vector<size_t> b(idx.begin() + n_train, idx.begin() + n_train + n_valid);
  std::vector<size_t> c(idx.begin() + n_train + n_valid, idx.end());
  return {table.select_rows(a), table.select_rows(b), table.select_rows(c)};
}

Table round_to_precision(const Table& table, const Schema& reference) {
  Table out = table;
  for (size_t j = 0; j < table.n_cols(); ++j) {
    if (!table.is_num(j)) continue;
    int r = reference.find(table.schema.columns[j].name);
    if (r < 0) throw std::invalid_argument("reference schema misses column " + table.schema.columns[j].name);
    int p = reference.columns[r].precision;
    if (p < 0) continue;
    double scale = std::pow(10.0, p);
    for (double& v : out.num[j]) v = std::nearbyint(v * scale) / scale;  // FE_TONEAREST: half to even
    out.schema.columns[j].precision = p;
  }
  return out;
}

}  // namespace xgen

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace xgen {

enum class ColumnKind { numerical, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numerical;
  int cardinality = 0;   // categorical only, K_j >= 1
  int precision = -1;    // numerical only; -1 = unknown / no rounding
};

struct Schema {
  std::vector<ColumnSpec> columns;

  size_t size() const { return columns.size(); }
  int find(const std::string& name) const;  // -1 when absent
  void validate() const;                    // throws on invariant violation
};

// Column-oriented mixed-type dataset. Immutable by convention after
// construction; safe to share across threads.
struct Table {
  Schema schema;
  // Per column: exactly one of the two vectors is populated.
  std::vector<std::vector<double>> num;
  std::vector<std::vector<int>> cat;
  // Per categorical column: code -> original string.
  std::vector<std::vector<std::string>> codebook;
  size_t n_rows = 0;

  size_t n_cols() const { return schema.size(); }
  bool is_num(size_t j) const { return schema.columns[j].kind == ColumnKind::numerical; }
  int cardinality(size_t j) const { return schema.columns[j].cardinality; }

  Table select_rows(const std::vector<size_t>& rows) const;
  void check_invariants() const;
};

// CSV ingestion: header row, comma-delimited, empty string = missing.
// Rows with missing numerical entries are dropped. Columns absent from the
// hint are inferred (parseable-as-number -> numerical, else categorical).
Table load_csv(const std::string& path, const Schema* hint = nullptr);

void write_csv(const Table& table, const std::string& path);

// Schema sidecar: JSON mapping column name -> {kind, precision?}.
Schema load_schema_json(const std::string& path);

// Deterministic 3:1:1 split; sizes floor(3n/5) / floor(n/5) / remainder.
std::tuple<Table, Table, Table> split(const Table& table, uint64_t seed);

// Half-to-even rounding of numerical columns to the reference precision.
Table round_to_precision(const Table& table, const Schema& reference);

// Number of decimal places needed to print v exactly (capped at 12);
// used for display-precision inference.
int decimal_places(const std::string& literal);

}  // namespace xgen

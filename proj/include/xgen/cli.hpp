#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xgen/autoreg.hpp"
#include "xgen/diffusion.hpp"
#include "xgen/metrics.hpp"
#include "xgen/table.hpp"

namespace xgen {

struct EvalToggles {
  bool shape = true;
  bool trend = true;
  bool detection = true;
  bool precision_recall = true;
  bool dcr = true;
  bool mle = false;
  std::string mle_target;  // column name; task inferred from its kind
};

struct RunConfig {
  std::string data_path;
  std::string schema_path;  // optional sidecar; empty = infer from CSV
  std::string out_dir = "out";
  std::string generator = "ar";  // "ar" | "df"
  DfParams df;
  ArParams ar;
  uint64_t split_seed = 0;
  std::vector<uint64_t> sample_seeds;  // default 1..20
  std::optional<size_t> sample_n;      // default: train size
  EvalToggles eval;

  static RunConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct FitResult {
  std::string model_dir;
  double fit_minutes = 0.0;
  size_t train_rows = 0;
};

// Load + 3:1:1 split + fit the configured generator on the train fold;
// writes the model directory and timing record under out_dir.
FitResult run_fit(const RunConfig& config);

// Sample n rows (0 = training size recorded in the model) to a CSV.
void run_sample(const std::string& model_dir, const std::string& out_csv, size_t n, uint64_t seed);

// Per-seed metric rows plus a mean/sigma summary; also written to
// out_dir/report.json and out_dir/report.csv.
nlohmann::json run_eval(const RunConfig& config);

// fit + eval over a list of config files; returns nonzero on any failure.
int run_bench(const std::vector<std::string>& config_paths);

Table sample_from_dir(const std::string& model_dir, size_t n, uint64_t seed);

}  // namespace xgen

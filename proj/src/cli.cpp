#include "xgen/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "xgen/parallel.hpp"
#include "xgen/rng.hpp"

namespace fs = std::filesystem;

namespace xgen {

namespace {

GbdtParams parse_gbdt(const nlohmann::json& j, GbdtParams base) {
  if (j.contains("rounds")) base.n_rounds = j["rounds"].get<int>();
  if (j.contains("depth")) base.max_depth = j["depth"].get<int>();
  if (j.contains("learning_rate")) base.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("lambda_l2")) base.lambda_l2 = j["lambda_l2"].get<double>();
  if (j.contains("min_child_weight")) base.min_child_weight = j["min_child_weight"].get<double>();
  if (j.contains("gamma")) base.gamma = j["gamma"].get<double>();
  return base;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

void write_json_file(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

Table load_dataset(const RunConfig& config) {
  if (!config.schema_path.empty()) {
    Schema hint = load_schema_json(config.schema_path);
    return load_csv(config.data_path, &hint);
  }
  std::cerr << "note: no schema sidecar given for " << config.data_path
            << "; inferring column kinds from the data\n";
  return load_csv(config.data_path);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.data_path = j.at("data").get<std::string>();
  if (j.contains("schema")) c.schema_path = j["schema"].get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("generator")) c.generator = j["generator"].get<std::string>();
  if (j.contains("split_seed")) c.split_seed = j["split_seed"].get<uint64_t>();
  if (j.contains("sample_seeds"))
    c.sample_seeds = j["sample_seeds"].get<std::vector<uint64_t>>();
  if (j.contains("sample_n")) c.sample_n = j["sample_n"].get<size_t>();
  if (c.sample_seeds.empty())
    for (uint64_t s = 1; s <= 20; ++s) c.sample_seeds.push_back(s);

  const nlohmann::json p = j.value("params", nlohmann::json::object());
  if (c.generator == "df") {
    if (p.contains("T")) c.df.T = p["T"].get<int>();
    if (p.contains("K_dup")) c.df.K_dup = p["K_dup"].get<int>();
    if (p.contains("beta_min")) c.df.beta_min = p["beta_min"].get<double>();
    if (p.contains("beta_max")) c.df.beta_max = p["beta_max"].get<double>();
    if (p.contains("dropout_p")) c.df.dropout_p = p["dropout_p"].get<double>();
    if (p.contains("target"))
      c.df.target = p["target"].get<std::string>() == "x0" ? DfTarget::x0 : DfTarget::velocity;
    if (p.contains("sampler"))
      c.df.sampler = p["sampler"].get<std::string>() == "ddpm" ? DfSampler::ddpm : DfSampler::ddim;
    if (p.contains("condition_on_label"))
      c.df.condition_on_label = p["condition_on_label"].get<std::string>();
    c.df.gbdt = parse_gbdt(p.value("gbdt", nlohmann::json::object()), c.df.gbdt);
  } else if (c.generator == "ar") {
    if (p.contains("H")) c.ar.H = p["H"].get<int>();
    if (p.contains("conditional"))
      c.ar.conditional = p["conditional"].get<std::string>() == "multiclass"
                             ? ConditionalKind::multiclass
                             : ConditionalKind::hierarchical;
    if (p.contains("dequant"))
      c.ar.dequant =
          p["dequant"].get<std::string>() == "uniform" ? DequantMode::uniform : DequantMode::eqf;
    if (p.contains("quant")) {
      std::string q = p["quant"].get<std::string>();
      c.ar.quant = q == "uniform"  ? QuantStrategy::uniform
                   : q == "kmeans" ? QuantStrategy::kmeans
                                   : QuantStrategy::rank;
    }
    if (p.contains("temperature")) c.ar.temperature = p["temperature"].get<double>();
    if (p.contains("K_max")) c.ar.K_max = p["K_max"].get<int>();
    if (p.contains("K_c")) c.ar.K_c = p["K_c"].get<int>();
    c.ar.gbdt = parse_gbdt(p.value("gbdt", nlohmann::json::object()), c.ar.gbdt);
  }

  if (j.contains("eval")) {
    const nlohmann::json& e = j["eval"];
    c.eval.shape = e.value("shape", true);
    c.eval.trend = e.value("trend", true);
    c.eval.detection = e.value("detection", true);
    c.eval.precision_recall = e.value("precision_recall", true);
    c.eval.dcr = e.value("dcr", true);
    c.eval.mle_target = e.value("mle_target", std::string());
    c.eval.mle = e.value("mle", !c.eval.mle_target.empty());
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (data_path.empty()) throw std::invalid_argument("config: data path required");
  if (generator != "ar" && generator != "df")
    throw std::invalid_argument("config: generator must be 'ar' or 'df'");
  if (sample_seeds.empty()) throw std::invalid_argument("config: at least one sampling seed");
  if (eval.mle && eval.mle_target.empty())
    throw std::invalid_argument("config: mle enabled without mle_target");
}

FitResult run_fit(const RunConfig& config) {
  Table data = load_dataset(config);
  auto [train, valid, test] = split(data, config.split_seed);

  fs::create_directories(config.out_dir);
  std::string model_dir = (fs::path(config.out_dir) / "model").string();

  double t0 = now_seconds();
  if (config.generator == "df") {
    DfModel model = fit_df(train, config.df, config.split_seed);
    double t1 = now_seconds();
    model.save(model_dir);
    FitResult r{model_dir, (t1 - t0) / 60.0, train.n_rows};
    write_json_file(fs::path(config.out_dir) / "fit.json",
                    {{"generator", "df"}, {"fit_minutes", r.fit_minutes},
                     {"train_rows", r.train_rows}});
    return r;
  }
  ArModel model = fit_ar(train, config.ar, config.split_seed);
  double t1 = now_seconds();
  model.save(model_dir);
  FitResult r{model_dir, (t1 - t0) / 60.0, train.n_rows};
  write_json_file(fs::path(config.out_dir) / "fit.json",
                  {{"generator", "ar"}, {"fit_minutes", r.fit_minutes},
                   {"train_rows", r.train_rows}});
  return r;
}

Table sample_from_dir(const std::string& model_dir, size_t n, uint64_t seed) {
  nlohmann::json m = read_json_file(fs::path(model_dir) / "manifest.json");
  std::string kind = m.at("kind").get<std::string>();
  if (kind == "df") {
    DfModel model = DfModel::load(model_dir);
    return sample_df(model, n ? n : model.n_train, seed);
  }
  if (kind == "ar") {
    ArModel model = ArModel::load(model_dir);
    return sample_ar(model, n ? n : model.n_train, model.params.temperature, seed);
  }
  throw std::runtime_error("unknown model kind '" + kind + "' in " + model_dir);
}

void run_sample(const std::string& model_dir, const std::string& out_csv, size_t n,
                uint64_t seed) {
  Table syn = sample_from_dir(model_dir, n, seed);
  write_csv(syn, out_csv);
}

namespace {

void accumulate(nlohmann::json& sums, nlohmann::json& sq, const nlohmann::json& row) {
  for (auto& [k, v] : row.items()) {
    if (!v.is_number()) continue;
    double x = v.get<double>();
    sums[k] = sums.value(k, 0.0) + x;
    sq[k] = sq.value(k, 0.0) + x * x;
  }
}

}  // namespace

nlohmann::json run_eval(const RunConfig& config) {
  Table data = load_dataset(config);
  auto [train, valid, test] = split(data, config.split_seed);
  std::string model_dir = (fs::path(config.out_dir) / "model").string();
  nlohmann::json manifest = read_json_file(fs::path(model_dir) / "manifest.json");
  std::string kind = manifest.at("kind").get<std::string>();

  // Load once, sample per seed.
  std::optional<DfModel> dfm;
  std::optional<ArModel> arm;
  if (kind == "df") dfm = DfModel::load(model_dir);
  else arm = ArModel::load(model_dir);

  GowerSpace space = GowerSpace::from(train);
  size_t n_train = config.sample_n.value_or(train.n_rows);

  int mle_col = -1;
  bool mle_classification = false;
  MleScores mle_ref;
  if (config.eval.mle) {
    mle_col = train.schema.find(config.eval.mle_target);
    if (mle_col < 0)
      throw std::invalid_argument("mle target column '" + config.eval.mle_target + "' not found");
    mle_classification = !train.is_num(mle_col);
    mle_ref = mle(train, valid, test, mle_col, mle_classification, config.split_seed);
  }

  const size_t n_seeds = config.sample_seeds.size();
  std::vector<nlohmann::json> rows(n_seeds);
  parallel_for(n_seeds, [&](size_t si) {
    uint64_t seed = config.sample_seeds[si];
    uint64_t test_seed = RngStream::derive(seed, "eval.syntest").next_u64();
    double t0 = now_seconds();
    Table syn_train, syn_test;
    if (dfm) {
      syn_train = sample_df(*dfm, n_train, seed);
      syn_test = sample_df(*dfm, test.n_rows, test_seed);
    } else {
      syn_train = sample_ar(*arm, n_train, arm->params.temperature, seed);
      syn_test = sample_ar(*arm, test.n_rows, arm->params.temperature, test_seed);
    }
    double sample_seconds = now_seconds() - t0;

    nlohmann::json row;
    row["seed"] = seed;
    row["sample_seconds"] = sample_seconds;
    auto guarded = [&](const char* name, auto&& f) {
      try {
        f();
      } catch (const std::exception& e) {
        row[std::string(name) + "_error"] = e.what();
      }
    };
    if (config.eval.shape) guarded("shape", [&] { row["shape"] = shape(train, syn_train); });
    if (config.eval.trend) guarded("trend", [&] { row["trend"] = trend(train, syn_train); });
    if (config.eval.detection)
      guarded("detection",
              [&] { row["detection"] = detection(train, test, syn_train, syn_test, seed); });
    if (config.eval.precision_recall)
      guarded("precision_recall", [&] {
        auto [p, r] = precision_recall(train, syn_train, space, seed);
        row["alpha_precision"] = p;
        row["beta_recall"] = r;
      });
    if (config.eval.dcr)
      guarded("dcr", [&] { row["dcr"] = dcr(train, test, syn_train, space, seed); });
    if (config.eval.mle)
      guarded("mle", [&] {
        MleScores s = mle(syn_train, valid, test, mle_col, mle_classification, seed);
        if (s.classification) {
          row["mle_rocauc"] = s.rocauc;
          row["mle_f1"] = s.f1;
          if (s.degenerate) row["mle_degenerate"] = true;
        } else {
          row["mle_r2"] = s.r2;
          row["mle_rmse"] = s.rmse;
        }
      });
    rows[si] = std::move(row);
  });

  nlohmann::json sums = nlohmann::json::object(), sq = nlohmann::json::object();
  for (const auto& row : rows) accumulate(sums, sq, row);
  nlohmann::json summary;
  for (auto& [k, v] : sums.items()) {
    if (k == "seed") continue;
    double mean = v.get<double>() / n_seeds;
    double var = std::max(0.0, sq[k].get<double>() / n_seeds - mean * mean);
    summary[k + "_mean"] = mean;
    summary[k + "_sigma"] = std::sqrt(var);
  }
  if (config.eval.mle) {
    if (mle_ref.classification) {
      summary["mle_ref_rocauc"] = mle_ref.rocauc;
      summary["mle_ref_f1"] = mle_ref.f1;
    } else {
      summary["mle_ref_r2"] = mle_ref.r2;
      summary["mle_ref_rmse"] = mle_ref.rmse;
    }
  }

  nlohmann::json report;
  report["dataset"] = config.data_path;
  report["generator"] = config.generator;
  report["rows"] = rows;
  report["summary"] = summary;
  write_json_file(fs::path(config.out_dir) / "report.json", report);

  // Flat CSV: one row per (dataset, generator, seed).
  std::vector<std::string> keys;
  for (const auto& row : rows)
    for (auto& [k, v] : row.items())
      if (v.is_number() && std::find(keys.begin(), keys.end(), k) == keys.end())
        keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  std::ofstream csv(fs::path(config.out_dir) / "report.csv");
  csv << "dataset,generator";
  for (const auto& k : keys) csv << "," << k;
  csv << "\n";
  for (const auto& row : rows) {
    csv << config.data_path << "," << config.generator;
    for (const auto& k : keys) {
      csv << ",";
      if (row.contains(k)) csv << row[k].dump();
    }
    csv << "\n";
  }
  return report;
}

int run_bench(const std::vector<std::string>& config_paths) {
  int failures = 0;
  for (const auto& path : config_paths) {
    try {
      RunConfig config = RunConfig::from_json(read_json_file(path));
      FitResult fit_result = run_fit(config);
      std::cerr << "fit " << config.data_path << " (" << config.generator << "): "
                << fit_result.fit_minutes << " min\n";
      nlohmann::json report = run_eval(config);
      std::cerr << "eval " << config.data_path << ": " << report["summary"].dump() << "\n";
    } catch (const std::exception& e) {
      std::cerr << "bench failure for " << path << ": " << e.what() << "\n";
      ++failures;
    }
  }
  return failures;
}

}  // namespace xgen

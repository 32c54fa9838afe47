#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xgen/gbdt.hpp"
#include "xgen/preprocess.hpp"
#include "xgen/rng.hpp"
#include "xgen/table.hpp"

namespace xgen {

enum class QuantStrategy { rank, uniform, kmeans };
enum class DequantMode { eqf, uniform };
enum class ConditionalKind { hierarchical, multiclass };

struct BinSpec {
  int feature = -1;
  int n_bins = 0;
  QuantStrategy strategy = QuantStrategy::rank;
  std::vector<double> upper_edges;          // bin b covers (edge[b-1], edge[b]]
  std::vector<std::vector<double>> eqf;     // per bin: sorted member values
  std::vector<double> bin_min, bin_max;

  nlohmann::json to_json() const;
  static BinSpec from_json(const nlohmann::json& j);
};

// Equal-count quantization with rank-preserving tie-breaking noise.
std::pair<std::vector<int>, BinSpec> rank_bin(std::span<const double> values, int B, uint64_t seed);

std::pair<std::vector<int>, BinSpec> quantize(std::span<const double> values, int B,
                                              QuantStrategy strategy, uint64_t seed);

double dequantize(const BinSpec& spec, int bin, RngStream& rng, DequantMode mode);

struct ArParams {
  int H = 5;  // meta-tree height, B = 2^H bins
  ConditionalKind conditional = ConditionalKind::hierarchical;
  DequantMode dequant = DequantMode::eqf;
  QuantStrategy quant = QuantStrategy::rank;
  double temperature = 1.0;
  int K_max = 32;
  int K_c = 8;
  GbdtParams gbdt{.n_rounds = 30, .max_depth = 3};
};

// Height-H binary classifier tree over bins; node k (heap order) splits its
// bin range into two contiguous halves. Degenerate nodes carry a constant.
struct MetaTree {
  int height = 0;
  std::vector<GbdtModel> nodes;       // 2^H - 1, heap order; empty model if degenerate
  std::vector<uint8_t> degenerate;    // 1 = no data routed here at fit time
  std::vector<double> const_p;        // P(upper half) for degenerate nodes
};

// Conditional for one feature: a meta-tree or a single multiclass model.
struct ArConditional {
  ConditionalKind kind = ConditionalKind::hierarchical;
  MetaTree meta;            // hierarchical numericals
  GbdtModel multiclass;     // categorical targets and multiclass numericals
  bool is_categorical_target = false;
  int n_outputs = 0;        // bin count or merged cardinality
};

struct ArModel {
  ArParams params;
  Schema schema;                         // original training schema
  std::vector<std::vector<std::string>> codebook;
  Schema merged_schema;                  // post cardinality limiting
  std::vector<CategoryMerger> mergers;   // per categorical column needing a merge
  std::vector<BinSpec> bins;             // per numerical column
  // Feature 1 samplers.
  std::vector<double> first_eqf;         // sorted values (numerical first feature)
  std::vector<double> first_marginal;    // merged-code marginal (categorical first feature)
  std::vector<ArConditional> conditionals;  // for features 2..d; index j-1... see fit_ar
  size_t n_train = 0;

  void save(const std::string& dir) const;
  static ArModel load(const std::string& dir);
};

ArModel fit_ar(const Table& train, const ArParams& params, uint64_t seed);

// Temperature-scaled bin/code draw given a prefix of already-sampled features.
// Exposed for unit tests; sample_ar uses a batched equivalent.
int sample_bin(const ArConditional& cond, const FeatureMatrix& prefix_row, double temperature,
               RngStream& rng);

Table sample_ar(const ArModel& model, size_t n, double temperature, uint64_t seed);

}  // namespace xgen

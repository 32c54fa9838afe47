#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xgen/gbdt.hpp"
#include "xgen/preprocess.hpp"
#include "xgen/rng.hpp"
#include "xgen/table.hpp"

namespace xgen {

struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;        // beta[t], t in 1..T (index 0 unused)
  std::vector<double> alpha;       // 1 - beta[t]
  std::vector<double> alpha_bar;   // prod_{s<=t} alpha[s]; alpha_bar[0] = 1
  std::vector<double> beta_tilde;  // (1 - abar[t-1]) / (1 - abar[t]) * beta[t]
};

NoiseSchedule make_schedule(int T, double beta_min, double beta_max);

enum class DfTarget { x0, velocity };
enum class DfSampler { ddpm, ddim };

struct DfParams {
  int T = 50;
  int K_dup = 100;
  double beta_min = 0.1;
  double beta_max = 8.0;
  double dropout_p = 0.1;
  DfTarget target = DfTarget::velocity;
  DfSampler sampler = DfSampler::ddim;
  GbdtParams gbdt{.n_rounds = 100, .max_depth = 7, .lambda_l2 = 0.0};
  std::optional<std::string> condition_on_label;
};

// One trained model grid (T x d), either the unconditional grid or the grid
// of one label class.
struct DfGrid {
  // models[(t-1) * d + j]; regressor for numerical, classifier for categorical.
  std::vector<GbdtModel> models;
};

struct DfModel {
  DfParams params;
  NoiseSchedule schedule;
  Schema schema;  // training schema, incl. codebooks via train_codebook
  std::vector<std::vector<std::string>> codebook;
  std::vector<Gaussianizer> gaussianizers;              // per column; unused for categorical
  std::vector<std::pair<double, double>> train_ranges;  // numerical columns
  int label_col = -1;                                   // -1 = unconditional
  std::vector<double> label_marginal;                   // counts-normalized, when conditioning
  std::vector<int> grid_labels;                         // label code per grid, or {-1}
  std::vector<DfGrid> grids;                            // parallel to grid_labels
  int fallback_grid = -1;  // grid trained on all rows, for classes too small to fit

  size_t n_train = 0;

  void save(const std::string& dir) const;
  static DfModel load(const std::string& dir);
};

// Closed-form Gaussian forward jump: x_t = sqrt(abar) x0 + sqrt(1-abar) eps.
double forward_gaussian(double x0, int t, double eps, const NoiseSchedule& s);

// Two-step multinomial corruption: keep x0 w.p. abar_t, else uniform over K.
int forward_multinomial(int x0, int t, int K, const NoiseSchedule& s, RngStream& rng);

// Invert the velocity parametrization at (x_t, t): returns (x0, eps).
std::pair<double, double> v_convert(double v, double x_t, int t, const NoiseSchedule& s);

double reverse_step_gaussian(double x_t, int t, double x0_hat, double eps_hat,
                             DfSampler sampler, const NoiseSchedule& s, RngStream& rng);

// Eq.-(9)-style categorical posterior; exposed for testing.
std::vector<double> multinomial_posterior(int x_t, int t, const std::vector<double>& x0_probs,
                                          int K, const NoiseSchedule& s);

int reverse_step_multinomial(int x_t, int t, const std::vector<double>& x0_probs, int K,
                             const NoiseSchedule& s, RngStream& rng);

DfModel fit_df(const Table& train, const DfParams& params, uint64_t seed);

Table sample_df(const DfModel& model, size_t n, uint64_t seed);

}  // namespace xgen

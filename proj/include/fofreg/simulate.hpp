#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fofreg/model.hpp"

namespace fofreg {

/// Deterministic, portable random stream: the bit-specified mt19937_64
/// engine with explicit uniform/normal transforms, so identical seeds give
/// identical draws on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Standard normal via Box-Muller; the spare deviate is cached.
  double normal();

  double normal(double mu, double sd) { return mu + sd * normal(); }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Mixes (seed, replicate, stream) into an independent substream seed, so a
/// single replicate can be reproduced in isolation.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream);

struct ScenarioSpec {
  int id = 1;  // 1, 2 or 3
  int n = 30;
  int t_points = 20;
  int s_points = 20;
  double snr = 10.0;
  std::uint64_t seed = 0;
  std::optional<int> sparsity;  // points per curve for the sparse design
};

/// Cosine eigenfunction families of the simulation scenarios (k is 1-based).
double theta1(double s, int k);
double theta2(double s, int k);

/// True coefficient surfaces: exp(-(t+s)) for scenario 1 and truncated
/// cosine tensor series for scenarios 2 and 3.
double true_beta(int id, double t, double s);

/// Equally spaced points (j+1/2)/m strictly inside (0,1).
Eigen::VectorXd open_uniform_grid(int m);

/// Predictor draw: sampled curves plus the underlying score matrix, which
/// make_responses uses to evaluate the predictors analytically when
/// computing noiseless signals.
struct PredictorDraw {
  std::vector<Curve> curves;      // sampled on the scenario s-grid
  Eigen::MatrixXd scores;         // n x K score matrix, scores ~ U(-sqrt3, sqrt3)
};

PredictorDraw draw_predictors(const ScenarioSpec& spec, Rng& rng);

/// Analytic predictor value sum_k (-1)^(k+1) k^-1 z_k theta(s,k).
double predictor_value(int id, const Eigen::VectorXd& score_row, double s);

/// Noiseless signals int beta(t_j, s) X_i(s) ds on the scenario t-grid,
/// computed with an independent 64-point Gauss-Legendre rule against the
/// analytic predictors; then additive N(0, sigma^2) noise with
/// sigma = sd(signal)/snr. Noise deviates are drawn for every observation
/// regardless of sigma, so runs at different SNR share random numbers.
std::vector<Curve> make_responses(const ScenarioSpec& spec, const PredictorDraw& draw, Rng& rng);

/// Per-curve uniform subsample without replacement, sizes in [2, grid size].
std::vector<Curve> sparsify(const std::vector<Curve>& curves, int points_per_curve, Rng& rng);

/// Adds iid N(0, sigma^2) noise to every curve value.
std::vector<Curve> add_noise(const std::vector<Curve>& curves, double sigma, Rng& rng);

/// Pooled sample standard deviation of all curve values.
double pooled_sd(const std::vector<Curve>& curves);

/// Per-curve cubic smoothing-spline fit (penalized-part kernel, marginal
/// lambda by modified GCV) evaluated at the target grid. Curves with fewer
/// than 4 points fall back to linear interpolation.
std::vector<Curve> presmooth(const std::vector<Curve>& curves, const Eigen::VectorXd& target_grid);

struct ReplicateRow {
  int replicate = 0;
  std::uint64_t seed = 0;  // derived per-replicate base seed
  double mise = 0.0;
  double log2_mise = 0.0;
  double lambda = 0.0;
  double runtime_ms = 0.0;
  bool presmoothed = false;
  bool failed = false;
  std::string error;
};

struct SimReport {
  ScenarioSpec spec;
  int replicates = 0;
  int test_size = 0;
  bool presmoothed = false;
  std::vector<ReplicateRow> rows;
  int failed_count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Runs replicated fits: draw a training set, fit, draw test predictors and
/// score the mean integrated squared prediction error against the scenario's
/// true surface. With spec.sparsity set, the sparse protocol runs instead:
/// noise on both axes, independent per-curve subsampling, and optionally the
/// pre-smoothing step before the fit. Failed replicates are recorded and
/// excluded from the aggregates.
SimReport run_experiment(const ScenarioSpec& spec, int replicates, int test_size,
                         const FitConfig& fit_config = {}, bool presmooth_sparse = true);

}  // namespace fofreg

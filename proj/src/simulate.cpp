#include "fofreg/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fofreg {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * M_PI * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = 0;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
  std::uint64_t state = seed;
  std::uint64_t out = splitmix64(state);
  state ^= replicate * 0x9e3779b97f4a7c15ULL;
  out ^= splitmix64(state);
  state ^= stream * 0xc2b2ae3d27d4eb4fULL;
  out ^= splitmix64(state);
  return out;
}

double theta1(double s, int k) {
  if (k == 1) return 1.0;
  return std::sqrt(2.0) * std::cos((k - 1) * M_PI * s);
}

double theta2(double s, int k) {
  if (k == 3) return 1.0;
  return std::sqrt(2.0) * std::cos(k * M_PI * s);
}

namespace {

void check_scenario_id(int id) {
  if (id < 1 || id > 3) throw std::invalid_argument("scenario id must be 1, 2 or 3");
}

int series_length(int id) { return id == 3 ? 3 : 50; }

double theta(int id, double s, int k) { return id == 3 ? theta2(s, k) : theta1(s, k); }

void validate_spec(const ScenarioSpec& spec) {
  check_scenario_id(spec.id);
  if (spec.n < 2) throw std::invalid_argument("scenario: n must be at least 2");
  if (!(spec.snr > 0.0)) throw std::invalid_argument("scenario: snr must be positive");
  if (spec.t_points < 2 || spec.s_points < 2)
    throw std::invalid_argument("scenario: grids need at least 2 points");
  if (spec.sparsity && (*spec.sparsity < 2 || *spec.sparsity > spec.s_points ||
                        *spec.sparsity > spec.t_points))
    throw std::invalid_argument("scenario: sparsity must be in [2, grid size]");
}

}  // namespace

double true_beta(int id, double t, double s) {
  check_scenario_id(id);
  if (id == 1) return std::exp(-(t + s));
  const int K = series_length(id);
  double acc = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    acc += sign / (static_cast<double>(k) * k) * theta(id, t, k) * theta(id, s, k);
  }
  return 4.0 * acc;
}

Eigen::VectorXd open_uniform_grid(int m) {
  if (m < 1) throw std::invalid_argument("open_uniform_grid: m must be positive");
  Eigen::VectorXd g(m);
  for (int j = 0; j < m; ++j) g(j) = (j + 0.5) / m;
  return g;
}

double predictor_value(int id, const Eigen::VectorXd& score_row, double s) {
  double acc = 0.0;
  for (Eigen::Index k = 1; k <= score_row.size(); ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    acc += sign / static_cast<double>(k) * score_row(k - 1) * theta(id, s, static_cast<int>(k));
  }
  return acc;
}

PredictorDraw draw_predictors(const ScenarioSpec& spec, Rng& rng) {
  validate_spec(spec);
  const int K = series_length(spec.id);
  const double bound = std::sqrt(3.0);

  PredictorDraw draw;
  draw.scores.resize(spec.n, K);
  for (int i = 0; i < spec.n; ++i)
    for (int k = 0; k < K; ++k) draw.scores(i, k) = rng.uniform(-bound, bound);

  const Eigen::VectorXd grid = open_uniform_grid(spec.s_points);
  draw.curves.reserve(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    Eigen::VectorXd vals(grid.size());
    for (Eigen::Index j = 0; j < grid.size(); ++j)
      vals(j) = predictor_value(spec.id, draw.scores.row(i), grid(j));
    draw.curves.push_back(Curve{grid, vals, "x" + std::to_string(i + 1)});
  }
  return draw;
}

std::vector<Curve> make_responses(const ScenarioSpec& spec, const PredictorDraw& draw, Rng& rng) {
  validate_spec(spec);
  if (static_cast<int>(draw.curves.size()) != spec.n ||
      draw.scores.cols() != series_length(spec.id))
    throw std::invalid_argument("make_responses: draw does not match the scenario spec");

  const Eigen::VectorXd t_grid = open_uniform_grid(spec.t_points);
  const QuadratureRule fine = gauss_legendre(64);

  // beta at (t_grid x fine nodes), predictors analytically at the fine nodes
  Eigen::MatrixXd beta(t_grid.size(), fine.size());
  for (Eigen::Index j = 0; j < t_grid.size(); ++j)
    for (Eigen::Index l = 0; l < fine.size(); ++l)
      beta(j, l) = true_beta(spec.id, t_grid(j), fine.nodes(l));

  Eigen::MatrixXd signals(t_grid.size(), spec.n);
  for (int i = 0; i < spec.n; ++i) {
    Eigen::VectorXd wx(fine.size());
    for (Eigen::Index l = 0; l < fine.size(); ++l)
      wx(l) = fine.weights(l) * predictor_value(spec.id, draw.scores.row(i), fine.nodes(l));
    signals.col(i) = beta * wx;
  }

  const Eigen::Index total = signals.size();
  const double mean = signals.sum() / static_cast<double>(total);
  const double ss = (signals.array() - mean).square().sum();
  const double sd = total > 1 ? std::sqrt(ss / static_cast<double>(total - 1)) : 0.0;
  const double sigma = std::isinf(spec.snr) ? 0.0 : sd / spec.snr;

  std::vector<Curve> out;
  out.reserve(static_cast<size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    Eigen::VectorXd vals = signals.col(i);
    for (Eigen::Index j = 0; j < vals.size(); ++j) vals(j) += sigma * rng.normal();
    out.push_back(Curve{t_grid, vals, "y" + std::to_string(i + 1)});
  }
  return out;
}

std::vector<Curve> sparsify(const std::vector<Curve>& curves, int points_per_curve, Rng& rng) {
  std::vector<Curve> out;
  out.reserve(curves.size());
  for (const Curve& curve : curves) {
    const Eigen::Index m = curve.args.size();
    if (points_per_curve > m)
      throw std::invalid_argument("sparsify: requested more points than the curve has");
    if (points_per_curve < 2) throw std::invalid_argument("sparsify: need at least 2 points");
    if (points_per_curve == m) {
      out.push_back(curve);
      continue;
    }
    std::vector<Eigen::Index> idx(static_cast<size_t>(m));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    for (int k = 0; k < points_per_curve; ++k) {
      const std::uint64_t pick = rng.below(static_cast<std::uint64_t>(m - k));
      std::swap(idx[static_cast<size_t>(k)], idx[static_cast<size_t>(k) + pick]);
    }
    idx.resize(static_cast<size_t>(points_per_curve));
    std::sort(idx.begin(), idx.end());
    Eigen::VectorXd args(points_per_curve), vals(points_per_curve);
    for (int k = 0; k < points_per_curve; ++k) {
      args(k) = curve.args(idx[static_cast<size_t>(k)]);
      vals(k) = curve.values(idx[static_cast<size_t>(k)]);
    }
    out.push_back(Curve{args, vals, curve.label});
  }
  return out;
}

std::vector<Curve> add_noise(const std::vector<Curve>& curves, double sigma, Rng& rng) {
  std::vector<Curve> out = curves;
  for (Curve& curve : out)
    for (Eigen::Index j = 0; j < curve.values.size(); ++j) curve.values(j) += sigma * rng.normal();
  return out;
}

double pooled_sd(const std::vector<Curve>& curves) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (const Curve& c : curves) {
    sum += c.values.sum();
    count += c.values.size();
  }
  if (count < 2) return 0.0;
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const Curve& c : curves) ss += (c.values.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(count - 1));
}

std::vector<Curve> presmooth(const std::vector<Curve>& curves,
                             const Eigen::VectorXd& target_grid) {
  const MarginalKernelPair kernel = cubic_spline_kernel();
  std::vector<Curve> out;
  out.reserve(curves.size());
  for (const Curve& curve : curves) {
    validate_curve(curve);
    const Eigen::Index p = curve.args.size();
    if (p < 4) {
      out.push_back(Curve{target_grid, resample(curve, target_grid), curve.label});
      continue;
    }

    // One-dimensional smoothing spline through the solver: the data play the
    // role of n samples observed at a single "time" each, with unit weights.
    DesignSystem sys;
    sys.n = static_cast<int>(p);
    sys.T = 1;
    sys.w_diag = Eigen::VectorXd::Ones(p);
    sys.yw = curve.values;
    sys.sw.resize(p, 2);
    for (Eigen::Index i = 0; i < p; ++i) {
      sys.sw(i, 0) = 1.0;
      sys.sw(i, 1) = scaled_bernoulli(1, kernel.check_inside(curve.args(i)));
    }
    sys.rw.resize(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v = kernel.k1(curve.args(i), curve.args(j));
        sys.rw(i, j) = v;
        sys.rw(j, i) = v;
      }
    sys.q = sys.rw;

    const GcvTrace trace = select_lambda(sys, log_lambda_grid(1e-8, 1e2, 40), 1.4);
    const PenalizedSolution sol = solve_penalized(sys, trace.chosen_lambda());

    Eigen::VectorXd vals(target_grid.size());
    for (Eigen::Index g = 0; g < target_grid.size(); ++g) {
      const double x = kernel.check_inside(target_grid(g));
      double f = sol.d(0) + sol.d(1) * scaled_bernoulli(1, x);
      for (Eigen::Index i = 0; i < p; ++i) f += sol.c(i) * kernel.k1(x, curve.args(i));
      vals(g) = f;
    }
    out.push_back(Curve{target_grid, vals, curve.label});
  }
  return out;
}

namespace {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

SimReport run_experiment(const ScenarioSpec& spec, int replicates, int test_size,
                         const FitConfig& fit_config, bool presmooth_sparse) {
  validate_spec(spec);
  if (replicates < 1) throw std::invalid_argument("run_experiment: replicates must be >= 1");
  if (test_size < 1) throw std::invalid_argument("run_experiment: test size must be >= 1");

  SimReport report;
  report.spec = spec;
  report.replicates = replicates;
  report.test_size = test_size;
  report.presmoothed = spec.sparsity.has_value() && presmooth_sparse;

  const auto beta = [id = spec.id](double t, double s) { return true_beta(id, t, s); };

  for (int r = 0; r < replicates; ++r) {
    ReplicateRow row;
    row.replicate = r;
    row.seed = derive_stream(spec.seed, static_cast<std::uint64_t>(r), 0);
    row.presmoothed = report.presmoothed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Rng rng_x(derive_stream(spec.seed, static_cast<std::uint64_t>(r), 1));
      Rng rng_noise(derive_stream(spec.seed, static_cast<std::uint64_t>(r), 2));
      Rng rng_sparse(derive_stream(spec.seed, static_cast<std::uint64_t>(r), 3));
      Rng rng_test(derive_stream(spec.seed, static_cast<std::uint64_t>(r), 4));

      const PredictorDraw train = draw_predictors(spec, rng_x);
      std::vector<Curve> y_curves = make_responses(spec, train, rng_noise);
      std::vector<Curve> x_curves = train.curves;

      if (spec.sparsity) {
        const double sigma_x =
            std::isinf(spec.snr) ? 0.0 : pooled_sd(x_curves) / spec.snr;
        x_curves = add_noise(x_curves, sigma_x, rng_noise);
        x_curves = sparsify(x_curves, *spec.sparsity, rng_sparse);
        y_curves = sparsify(y_curves, *spec.sparsity, rng_sparse);
        if (presmooth_sparse) {
          x_curves = presmooth(x_curves, open_uniform_grid(spec.s_points));
          y_curves = presmooth(y_curves, open_uniform_grid(spec.t_points));
        }
      }

      const FittedModel model = fit(x_curves, y_curves, fit_config);

      ScenarioSpec test_spec = spec;
      test_spec.n = test_size;
      const PredictorDraw test = draw_predictors(test_spec, rng_test);
      row.mise = excess_risk(model, test.curves, beta);
      row.log2_mise = std::log2(row.mise);
      row.lambda = model.lambda;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      ++report.failed_count;
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    report.rows.push_back(std::move(row));
  }

  std::vector<double> mises;
  for (const ReplicateRow& row : report.rows)
    if (!row.failed) mises.push_back(row.mise);
  report.median = quantile(mises, 0.5);
  report.q1 = quantile(mises, 0.25);
  report.q3 = quantile(mises, 0.75);
  return report;
}

}  // namespace fofreg

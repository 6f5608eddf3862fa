#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "fofreg/design.hpp"
#include "fofreg/solver.hpp"

namespace fofreg {

struct FitConfig {
  int t_nodes = 20;
  int s_nodes = 20;
  double lambda_min = 1e-8;
  double lambda_max = 1e2;
  int lambda_count = 40;
  double fudge = 1.4;
};

/// Everything needed to evaluate the fitted coefficient surface and predict
/// new response trajectories: the basis catalog (with the centered training
/// curves at the quadrature grids), the coefficient vectors, the chosen
/// smoothing parameter and the cross-sectional mean curves.
struct FittedModel {
  Eigen::VectorXd d;
  Eigen::VectorXd c;
  Eigen::MatrixXd coef;  // (2+n) x (2+n) tensor layout of (d, c)
  double lambda = 0.0;
  double fudge = 1.4;
  BasisCatalog catalog;
  Eigen::VectorXd x_mean;  // at s-rule nodes
  Eigen::VectorXd y_mean;  // at t-rule nodes
  GcvTrace gcv_trace;
  // Original argument ranges before rescaling to [0,1] (identity by default).
  std::array<double, 2> x_arg_range{0.0, 1.0};
  std::array<double, 2> y_arg_range{0.0, 1.0};
};

/// Centers the curves by their cross-sectional means on the quadrature
/// grids, assembles the reduced design, selects lambda by modified GCV over
/// the config grid and solves at the minimizer.
FittedModel fit(const std::vector<Curve>& x_curves, const std::vector<Curve>& y_curves,
                const FitConfig& config = {});

/// beta_hat(t, s) = d^T psi(t,s) + c^T xi(t,s) at a single point of [0,1]^2.
double eval_beta(const FittedModel& model, double t, double s);

/// beta_hat on the grid ts x ss (rows index t).
Eigen::MatrixXd eval_beta_grid(const FittedModel& model, const Eigen::VectorXd& ts,
                               const Eigen::VectorXd& ss);

struct PredictionResult {
  std::vector<Curve> eta;           // y_mean(t) + integral of beta_hat against centered input
  std::vector<Curve> eta_centered;  // without the mean restoration
};

/// Predicts response trajectories for new predictor curves at the t-rule
/// nodes, or at an explicit grid when t_grid is nonempty. The s-integral
/// uses the model's s-rule, matching the training fit.
PredictionResult predict(const FittedModel& model, const std::vector<Curve>& x_new,
                         const Eigen::VectorXd& t_grid = Eigen::VectorXd());

/// Mean integrated squared error of the prediction functional against a true
/// surface over test predictors:
///   1/n* sum_i int { int (beta_hat - beta)(t,s) Xc_i(s) ds }^2 dt
/// with Xc_i centered by the model's x_mean. The inner integral uses a
/// piecewise Gauss rule split at the curve and mean-grid breakpoints, so it
/// is exact for the piecewise-linear curve representation.
double excess_risk(const FittedModel& model, const std::vector<Curve>& x_test,
                   const std::function<double(double, double)>& beta_true);

/// JSON-compatible model document (version-tagged, full precision).
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);

void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace fofreg

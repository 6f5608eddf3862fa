#pragma once

#include <Eigen/Dense>

#include <string>

#include "fofreg/kernels.hpp"

namespace fofreg {

/// Gauss-Legendre nodes and weights mapped onto a closed interval.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  double lo = 0.0;
  double hi = 1.0;

  Eigen::Index size() const { return nodes.size(); }
  double length() const { return hi - lo; }
};

/// m-point Gauss-Legendre rule on [lo, hi]. Exact for polynomials of
/// degree <= 2m-1. Nodes come from Newton iteration on the Legendre
/// polynomial with a 1e-15 convergence tolerance.
QuadratureRule gauss_legendre(int m, double lo = 0.0, double hi = 1.0);

/// Weighted sum sum_j alpha_j f(t_j) given the integrand values at the nodes.
double integrate(const QuadratureRule& rule, const Eigen::VectorXd& values_at_nodes);

/// One sampled curve: strictly increasing abscissae with matching ordinates.
struct Curve {
  Eigen::VectorXd args;
  Eigen::VectorXd values;
  std::string label;
};

/// Throws std::invalid_argument unless the curve has >= 2 finite points on
/// strictly increasing abscissae.
void validate_curve(const Curve& curve);

/// Piecewise-linear interpolation of the curve at the targets, with constant
/// extrapolation beyond the sampled range.
Eigen::VectorXd resample(const Curve& curve, const Eigen::VectorXd& targets);

/// Quadrature image of a curve under the penalized-part kernel:
///   (K1 f)(p) = sum_l alpha_l K1(p, u_l) f(u_l)
/// for each requested evaluation point p.
Eigen::VectorXd k1_convolve(const MarginalKernelPair& kernel,
                            const Eigen::VectorXd& values_at_nodes,
                            const QuadratureRule& rule,
                            const Eigen::VectorXd& eval_points);

}  // namespace fofreg

#include "fofreg/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace fofreg {

QuadratureRule gauss_legendre(int m, double lo, double hi) {
  if (m < 1 || m > 256) throw std::invalid_argument("gauss_legendre: m must be in [1, 256]");
  if (!(lo < hi)) throw std::invalid_argument("gauss_legendre: interval must satisfy lo < hi");

  Eigen::VectorXd x(m), w(m);
  const int half = (m + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi-style initial guess for the i-th root of P_m on [-1,1].
    double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence up to degree m at z.
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < m; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
      }
      pp = m * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x(i) = -z;
    x(m - 1 - i) = z;
    const double wi = 2.0 / ((1.0 - z * z) * pp * pp);
    w(i) = wi;
    w(m - 1 - i) = wi;
  }
  if (m % 2 == 1) x(m / 2) = 0.0;  // middle root is exactly zero

  QuadratureRule rule;
  const double mid = 0.5 * (lo + hi);
  const double halfw = 0.5 * (hi - lo);
  rule.nodes = (x.array() * halfw + mid).matrix();
  rule.weights = w * halfw;
  rule.lo = lo;
  rule.hi = hi;
  return rule;
}

double integrate(const QuadratureRule& rule, const Eigen::VectorXd& values_at_nodes) {
  if (rule.size() == 0) throw std::invalid_argument("integrate: empty rule");
  if (values_at_nodes.size() != rule.size())
    throw std::invalid_argument("integrate: values length does not match node count");
  return rule.weights.dot(values_at_nodes);
}

void validate_curve(const Curve& curve) {
  if (curve.args.size() < 2)
    throw std::invalid_argument("curve '" + curve.label + "': needs at least 2 points");
  if (curve.values.size() != curve.args.size())
    throw std::invalid_argument("curve '" + curve.label + "': args/values length mismatch");
  for (Eigen::Index i = 0; i < curve.args.size(); ++i) {
    if (!std::isfinite(curve.args(i)) || !std::isfinite(curve.values(i)))
      throw std::invalid_argument("curve '" + curve.label + "': non-finite entry");
    if (i > 0 && !(curve.args(i) > curve.args(i - 1)))
      throw std::invalid_argument("curve '" + curve.label +
                                  "': abscissae must be strictly increasing");
  }
}

Eigen::VectorXd resample(const Curve& curve, const Eigen::VectorXd& targets) {
  validate_curve(curve);
  const Eigen::Index p = curve.args.size();
  Eigen::VectorXd out(targets.size());
  for (Eigen::Index t = 0; t < targets.size(); ++t) {
    const double x = targets(t);
    if (x <= curve.args(0)) {
      out(t) = curve.values(0);
      continue;
    }
    if (x >= curve.args(p - 1)) {
      out(t) = curve.values(p - 1);
      continue;
    }
    // binary search for the segment containing x
    Eigen::Index hi = 1;
    Eigen::Index lo = 0;
    {
      Eigen::Index a = 0, b = p - 1;
      while (b - a > 1) {
        const Eigen::Index mid = (a + b) / 2;
        if (curve.args(mid) <= x)
          a = mid;
        else
          b = mid;
      }
      lo = a;
      hi = b;
    }
    const double frac = (x - curve.args(lo)) / (curve.args(hi) - curve.args(lo));
    out(t) = curve.values(lo) + frac * (curve.values(hi) - curve.values(lo));
  }
  return out;
}

Eigen::VectorXd k1_convolve(const MarginalKernelPair& kernel,
                            const Eigen::VectorXd& values_at_nodes,
                            const QuadratureRule& rule,
                            const Eigen::VectorXd& eval_points) {
  if (values_at_nodes.size() != rule.size())
    throw std::invalid_argument("k1_convolve: curve values not aligned with rule nodes");
  const Eigen::VectorXd wf = rule.weights.cwiseProduct(values_at_nodes);
  Eigen::VectorXd out(eval_points.size());
  for (Eigen::Index i = 0; i < eval_points.size(); ++i) {
    double acc = 0.0;
    for (Eigen::Index l = 0; l < rule.size(); ++l)
      acc += wf(l) * kernel.k1(eval_points(i), rule.nodes(l));
    out(i) = acc;
  }
  return out;
}

}  // namespace fofreg

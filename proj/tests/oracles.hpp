#pragma once

// Test-only oracles, independent of the library code paths they check.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fofreg/design.hpp"
#include "fofreg/solver.hpp"

namespace oracles {

// Composite Simpson rule; exact enough for every smooth reference here.
inline double fine_integral(const std::function<double(double)>& f, double a, double b,
                            int pieces = 4000) {
  const double h = (b - a) / pieces;
  double acc = f(a) + f(b);
  for (int i = 1; i < pieces; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

// Integral split at interior kinks, Simpson on each piece.
inline double piecewise_integral(const std::function<double(double)>& f,
                                 std::vector<double> breaks, int pieces_per_segment = 200) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double acc = 0.0;
  for (size_t k = 0; k + 1 < breaks.size(); ++k)
    acc += fine_integral(f, breaks[k], breaks[k + 1], pieces_per_segment);
  return acc;
}

inline double min_max_eig_ratio(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  return hi > 0.0 ? lo / hi : 0.0;
}

// Dense least-squares solve of the stacked system
//   [ Sw  Rw          ] theta ~ [ yw ]
//   [ 0   sqrt(nl) Q^{1/2} ]    [ 0  ]
// with Q^{1/2} from an eigendecomposition; reference for the pivoted solver.
inline Eigen::VectorXd augmented_least_squares(const fofreg::DesignSystem& sys, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.q);
  const Eigen::MatrixXd q_half = eig.eigenvectors() *
                                 eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                 eig.eigenvectors().transpose();
  const Eigen::Index nT = sys.yw.size();
  const Eigen::Index N = sys.sw.cols();
  const Eigen::Index L = sys.rw.cols();
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(nT + L, N + L);
  big.topLeftCorner(nT, N) = sys.sw;
  big.topRightCorner(nT, L) = sys.rw;
  big.bottomRightCorner(L, L) = std::sqrt(sys.n * lambda) * q_half;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nT + L);
  rhs.head(nT) = sys.yw;
  const auto qr = big.colPivHouseholderQr();
  Eigen::VectorXd x = qr.solve(rhs);
  for (int it = 0; it < 2; ++it) x += qr.solve(Eigen::VectorXd(rhs - big * x));
  return x;
}

// Relative coefficient difference on the numerically identifiable subspace:
// eigendirections of the stationarity matrix H below cutoff * max eigenvalue
// are unidentifiable at double precision (any exact minimizer may place
// arbitrary mass there), so they are excluded from the comparison.
inline double identifiable_rel_error(const fofreg::DesignSystem& sys, double lambda,
                                     const Eigen::VectorXd& theta, const Eigen::VectorXd& ref,
                                     double cutoff = 1e-11) {
  const Eigen::Index N = sys.sw.cols(), L = sys.rw.cols();
  Eigen::MatrixXd m(sys.yw.size(), N + L);
  m.leftCols(N) = sys.sw;
  m.rightCols(L) = sys.rw;
  Eigen::MatrixXd h = m.transpose() * m;
  h.bottomRightCorner(L, L) += (sys.n * lambda) * sys.q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  const double emax = eig.eigenvalues().maxCoeff();
  Eigen::VectorXd diff = Eigen::VectorXd::Zero(N + L), base = Eigen::VectorXd::Zero(N + L);
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
    if (eig.eigenvalues()(k) <= cutoff * emax) continue;
    const auto v = eig.eigenvectors().col(k);
    diff += v * v.dot(theta - ref);
    base += v * v.dot(ref);
  }
  return diff.norm() / base.norm();
}

// Smooth random curves: a few low-frequency cosines plus an affine part,
// sampled on a uniform inclusive grid.
inline fofreg::Curve random_smooth_curve(std::mt19937& gen, int points, int max_freq = 3) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double a0 = unif(gen), a1 = unif(gen);
  std::vector<double> amps(static_cast<size_t>(max_freq));
  for (auto& a : amps) a = 0.5 * unif(gen);
  fofreg::Curve curve;
  curve.args.setLinSpaced(points, 0.0, 1.0);
  curve.values.resize(points);
  for (int i = 0; i < points; ++i) {
    const double s = curve.args(i);
    double v = a0 + a1 * s;
    for (size_t k = 0; k < amps.size(); ++k)
      v += amps[k] * std::cos((static_cast<double>(k) + 1.0) * M_PI * s);
    curve.values(i) = v;
  }
  return curve;
}

struct RandomInstance {
  std::vector<fofreg::Curve> x;
  std::vector<fofreg::Curve> y;
  fofreg::BasisCatalog catalog;
  fofreg::DesignSystem system;
};

inline RandomInstance random_instance(int n, int t_nodes, int s_nodes, unsigned seed,
                                      int curve_points = 25) {
  std::mt19937 gen(seed);
  RandomInstance inst;
  for (int i = 0; i < n; ++i) {
    inst.x.push_back(random_smooth_curve(gen, curve_points));
    inst.y.push_back(random_smooth_curve(gen, curve_points));
  }
  const fofreg::QuadratureRule t_rule = fofreg::gauss_legendre(t_nodes);
  const fofreg::QuadratureRule s_rule = fofreg::gauss_legendre(s_nodes);
  inst.catalog = fofreg::build_catalog(inst.x, inst.y, t_rule, s_rule);
  inst.system = fofreg::assemble_from_catalog(inst.catalog);
  return inst;
}

// Inner products of the marginal basis factors computed from first
// principles: null-space pairings through the quadrature of the inner
// product formula, penalized pairings through the reproducing property.
// Index 0,1 are the null-space functions, 2+i the kernel convolutions of
// sample i. Used to rebuild Q entry by entry.
class FactorInnerProduct {
 public:
  FactorInnerProduct(const fofreg::MarginalKernelPair& kernel, const Eigen::MatrixXd& node_values,
                     const fofreg::QuadratureRule& rule)
      : kernel_(kernel), values_(node_values), rule_(rule) {}

  double operator()(Eigen::Index p, Eigen::Index q) const {
    if (p > q) std::swap(p, q);
    if (p < 2 && q < 2) {
      // <psi_a, psi_b> under (int f)(int g) + (int f')(int g')
      const auto psi = [this](Eigen::Index k, double u) { return kernel_.psi(static_cast<int>(k), u); };
      const auto dpsi = [](Eigen::Index k) { return k == 0 ? 0.0 : 1.0; };
      const double int_p = fine_integral([&](double u) { return psi(p, u); }, 0.0, 1.0);
      const double int_q = fine_integral([&](double u) { return psi(q, u); }, 0.0, 1.0);
      return int_p * int_q + dpsi(p) * dpsi(q);
    }
    if (p < 2) {
      // Convolutions lie in the penalized subspace: both their mean and the
      // integral of their derivative (boundary difference) must vanish, so
      // the pairing with any null-space function is zero. Evaluate it anyway.
      const Eigen::VectorXd coef = rule_.weights.cwiseProduct(values_.col(q - 2));
      const auto g = [&](double u) {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < rule_.size(); ++l) acc += coef(l) * kernel_.k1(u, rule_.nodes(l));
        return acc;
      };
      std::vector<double> breaks{0.0, 1.0};
      for (Eigen::Index l = 0; l < rule_.size(); ++l) breaks.push_back(rule_.nodes(l));
      const double mean_g = piecewise_integral(g, breaks);
      const double jump_g = g(1.0) - g(0.0);
      const double int_psi = p == 0 ? 1.0 : 0.0;
      const double dpsi = p == 0 ? 0.0 : 1.0;
      return int_psi * mean_g + dpsi * jump_g;
    }
    // <K1 f, K1 g> by the reproducing property: double quadrature of
    // f(u) K1(u,v) g(v).
    double acc = 0.0;
    for (Eigen::Index a = 0; a < rule_.size(); ++a)
      for (Eigen::Index b = 0; b < rule_.size(); ++b)
        acc += rule_.weights(a) * rule_.weights(b) * values_(a, p - 2) * values_(b, q - 2) *
               kernel_.k1(rule_.nodes(a), rule_.nodes(b));
    return acc;
  }

 private:
  const fofreg::MarginalKernelPair& kernel_;
  const Eigen::MatrixXd& values_;
  const fofreg::QuadratureRule& rule_;
};

// Factor indices (t-part, s-part) of the xi basis function k, matching the
// catalog ordering. 0,1 are null-space factors, 2+i convolution factors.
inline std::pair<Eigen::Index, Eigen::Index> xi_factors(Eigen::Index k, Eigen::Index n) {
  if (k < n) return {0, 2 + k};
  if (k < 2 * n) return {1, 2 + (k - n)};
  if (k < 3 * n) return {2 + (k - 2 * n), 0};
  if (k < 4 * n) return {2 + (k - 3 * n), 1};
  const Eigen::Index rest = k - 4 * n;
  return {2 + rest % n, 2 + rest / n};
}

}  // namespace oracles

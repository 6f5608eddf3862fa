#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

namespace fofreg {

/// Scaled Bernoulli polynomial r_nu(t) = B_nu(t)/nu! for nu in {1,2,4}.
double scaled_bernoulli(int nu, double t);

/// Marginal reproducing-kernel pair for the cubic-spline space on [0,1].
///
/// The space splits into a two-dimensional null space spanned by {1, r1}
/// (orthonormal under the null-space inner product) and its orthogonal
/// complement, whose kernels are
///   k0(u,v) = 1 + r1(u) r1(v)
///   k1(u,v) = r2(u) r2(v) - r4(|u-v|).
/// k1 sections have zero mean over [0,1].
struct MarginalKernelPair {
  double lo = 0.0;
  double hi = 1.0;
  int null_dim = 2;

  double k0(double u, double v) const;
  double k1(double u, double v) const;
  double k_full(double u, double v) const { return k0(u, v) + k1(u, v); }

  /// Null-space basis function: psi(0,.) = 1, psi(1,.) = r1.
  double psi(int k, double u) const;

  /// Throws std::domain_error when u lies outside [lo, hi] (beyond a small
  /// floating-point slack); otherwise returns u clamped to the interval.
  double check_inside(double u) const;
};

/// The [0,1] cubic-spline kernel pair.
MarginalKernelPair cubic_spline_kernel();

enum class KernelPart { k0, k1, full };

/// Tensor-product kernel on [0,1]^2, built from two marginal pairs.
///
/// k0((t1,s1),(t2,s2)) = k0y(t1,t2) k0x(s1,s2)
/// k1 = k0y k1x + k1y k0x + k1y k1x, and full = k0 + k1.
struct TensorKernel {
  MarginalKernelPair y_axis = cubic_spline_kernel();
  MarginalKernelPair x_axis = cubic_spline_kernel();

  double eval(KernelPart part, const std::array<double, 2>& p1,
              const std::array<double, 2>& p2) const;
};

/// Gram matrix G(i,j) = kernel(p_i, p_j) for a symmetric kernel callable.
template <class Kernel>
Eigen::MatrixXd gram_matrix(Kernel&& kernel, const std::vector<double>& points) {
  if (points.empty()) throw std::invalid_argument("gram_matrix: empty point list");
  const Eigen::Index m = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel(points[static_cast<size_t>(i)], points[static_cast<size_t>(j)]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

/// Gram matrix of a tensor-kernel part over (t,s) points.
Eigen::MatrixXd tensor_gram_matrix(const TensorKernel& kernel, KernelPart part,
                                   const std::vector<std::array<double, 2>>& points);

}  // namespace fofreg

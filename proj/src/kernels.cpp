#include "fofreg/kernels.hpp"

#include <cmath>

namespace fofreg {

namespace {
constexpr double kDomainSlack = 1e-12;
}

double scaled_bernoulli(int nu, double t) {
  switch (nu) {
    case 1:
      return t - 0.5;
    case 2:
      return (t * t - t + 1.0 / 6.0) / 2.0;
    case 4:
      return (((t - 2.0) * t + 1.0) * t * t - 1.0 / 30.0) / 24.0;
    default:
      throw std::invalid_argument("scaled_bernoulli: nu must be 1, 2 or 4");
  }
}

double MarginalKernelPair::check_inside(double u) const {
  if (u < lo - kDomainSlack || u > hi + kDomainSlack)
    throw std::domain_error("kernel argument outside [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
  return std::min(std::max(u, lo), hi);
}

double MarginalKernelPair::k0(double u, double v) const {
  u = check_inside(u);
  v = check_inside(v);
  return 1.0 + scaled_bernoulli(1, u) * scaled_bernoulli(1, v);
}

double MarginalKernelPair::k1(double u, double v) const {
  u = check_inside(u);
  v = check_inside(v);
  return scaled_bernoulli(2, u) * scaled_bernoulli(2, v) -
         scaled_bernoulli(4, std::abs(u - v));
}

double MarginalKernelPair::psi(int k, double u) const {
  u = check_inside(u);
  if (k == 0) return 1.0;
  if (k == 1) return scaled_bernoulli(1, u);
  throw std::invalid_argument("psi: index out of range for cubic-spline null space");
}

MarginalKernelPair cubic_spline_kernel() { return MarginalKernelPair{}; }

double TensorKernel::eval(KernelPart part, const std::array<double, 2>& p1,
                          const std::array<double, 2>& p2) const {
  const double k0y = y_axis.k0(p1[0], p2[0]);
  const double k0x = x_axis.k0(p1[1], p2[1]);
  switch (part) {
    case KernelPart::k0:
      return k0y * k0x;
    case KernelPart::k1: {
      const double k1y = y_axis.k1(p1[0], p2[0]);
      const double k1x = x_axis.k1(p1[1], p2[1]);
      return k0y * k1x + k1y * k0x + k1y * k1x;
    }
    case KernelPart::full:
      return eval(KernelPart::k0, p1, p2) + eval(KernelPart::k1, p1, p2);
  }
  throw std::invalid_argument("tensor kernel: unknown part");
}

Eigen::MatrixXd tensor_gram_matrix(const TensorKernel& kernel, KernelPart part,
                                   const std::vector<std::array<double, 2>>& points) {
  if (points.empty()) throw std::invalid_argument("tensor_gram_matrix: empty point list");
  const Eigen::Index m = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v =
          kernel.eval(part, points[static_cast<size_t>(i)], points[static_cast<size_t>(j)]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

}  // namespace fofreg

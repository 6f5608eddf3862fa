#include <doctest.h>

#include <random>

#include "fofreg/kernels.hpp"
#include "oracles.hpp"

using namespace fofreg;

TEST_CASE("scaled Bernoulli polynomials") {
  CHECK(scaled_bernoulli(1, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(scaled_bernoulli(2, 0.0) == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
  CHECK(scaled_bernoulli(4, 0.5) == doctest::Approx(7.0 / 5760.0).epsilon(1e-12));
  CHECK(scaled_bernoulli(1, 0.0) == doctest::Approx(-0.5));
  CHECK_THROWS_AS(scaled_bernoulli(3, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(scaled_bernoulli(0, 0.5), std::invalid_argument);
}

TEST_CASE("marginal kernel closed forms") {
  const MarginalKernelPair k = cubic_spline_kernel();
  CHECK(k.k0(0.5, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k.k0(0.0, 0.0) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(k.k0(0.0, 1.0) == doctest::Approx(0.75).epsilon(1e-15));

  CHECK(k.k1(0.0, 0.0) == doctest::Approx(1.0 / 120.0).epsilon(1e-13));
  CHECK(k.k1(0.5, 0.5) == doctest::Approx(1.0 / 320.0).epsilon(1e-13));
  CHECK(k.k1(0.0, 1.0) == doctest::Approx(1.0 / 120.0).epsilon(1e-13));

  CHECK(k.psi(0, 0.3) == 1.0);
  CHECK(k.psi(1, 0.3) == doctest::Approx(-0.2));
  CHECK_THROWS_AS(k.psi(2, 0.3), std::invalid_argument);

  CHECK_THROWS_AS(k.k0(-0.1, 0.5), std::domain_error);
  CHECK_THROWS_AS(k.k1(0.5, 1.2), std::domain_error);
}

TEST_CASE("tensor kernel products and additivity") {
  const TensorKernel k;
  const std::array<double, 2> mid{0.5, 0.5};
  CHECK(k.eval(KernelPart::k0, mid, mid) == doctest::Approx(1.0).epsilon(1e-15));
  const double m = 1.0 / 320.0;
  CHECK(k.eval(KernelPart::k1, mid, mid) == doctest::Approx(2.0 * m + m * m).epsilon(1e-12));

  std::mt19937 gen(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::array<double, 2> p1{unif(gen), unif(gen)}, p2{unif(gen), unif(gen)};
    CHECK(k.eval(KernelPart::full, p1, p2) ==
          doctest::Approx(k.eval(KernelPart::k0, p1, p2) + k.eval(KernelPart::k1, p1, p2))
              .epsilon(1e-15));
  }
}

TEST_CASE("kernel symmetry on random pairs") {
  const MarginalKernelPair k = cubic_spline_kernel();
  const TensorKernel tk;
  std::mt19937 gen(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double u = unif(gen), v = unif(gen);
    CHECK(std::abs(k.k0(u, v) - k.k0(v, u)) < 1e-14);
    CHECK(std::abs(k.k1(u, v) - k.k1(v, u)) < 1e-14);
    const std::array<double, 2> p1{unif(gen), unif(gen)}, p2{unif(gen), unif(gen)};
    for (const KernelPart part : {KernelPart::k0, KernelPart::k1, KernelPart::full})
      CHECK(std::abs(tk.eval(part, p1, p2) - tk.eval(part, p2, p1)) < 1e-14);
  }
}

TEST_CASE("Gram matrices are positive semi-definite") {
  const MarginalKernelPair k = cubic_spline_kernel();
  const TensorKernel tk;
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (const int m : {5, 20, 50}) {
    std::vector<double> pts;
    std::vector<std::array<double, 2>> pts2;
    for (int i = 0; i < m; ++i) {
      pts.push_back(unif(gen));
      pts2.push_back({unif(gen), unif(gen)});
    }
    const auto g0 = gram_matrix([&k](double u, double v) { return k.k0(u, v); }, pts);
    const auto g1 = gram_matrix([&k](double u, double v) { return k.k1(u, v); }, pts);
    CHECK(oracles::min_max_eig_ratio(g0) >= -1e-8);
    CHECK(oracles::min_max_eig_ratio(g1) >= -1e-8);
    CHECK((g1 - g1.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    for (const KernelPart part : {KernelPart::k0, KernelPart::k1, KernelPart::full})
      CHECK(oracles::min_max_eig_ratio(tensor_gram_matrix(tk, part, pts2)) >= -1e-8);
  }
}

TEST_CASE("gram_matrix edge cases") {
  const MarginalKernelPair k = cubic_spline_kernel();
  const auto k1 = [&k](double u, double v) { return k.k1(u, v); };

  const auto single = gram_matrix(k1, {0.3});
  CHECK(single.rows() == 1);
  CHECK(single(0, 0) == doctest::Approx(k.k1(0.3, 0.3)));

  const auto dup = gram_matrix(k1, {0.2, 0.2, 0.8});
  CHECK(oracles::min_max_eig_ratio(dup) >= -1e-8);
  CHECK(std::abs(dup.determinant()) < 1e-12);

  std::vector<double> uniform;
  for (int i = 0; i < 10; ++i) uniform.push_back(i / 9.0);
  CHECK(oracles::min_max_eig_ratio(gram_matrix(k1, uniform)) >= -1e-8);

  CHECK_THROWS_AS(gram_matrix(k1, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("penalized-part sections have zero mean") {
  const MarginalKernelPair k = cubic_spline_kernel();
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double v = unif(gen);
    // split at the |u - v| kink so the reference quadrature is accurate
    const double integral =
        oracles::piecewise_integral([&](double u) { return k.k1(u, v); }, {0.0, v, 1.0});
    CHECK(std::abs(integral) < 1e-10);
  }
}

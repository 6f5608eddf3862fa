#include <doctest.h>

#include <random>

#include "fofreg/design.hpp"
#include "oracles.hpp"

using namespace fofreg;

namespace {

std::vector<Curve> constant_curves(int n, double value, int points = 9) {
  std::vector<Curve> out;
  for (int i = 0; i < n; ++i) {
    Curve c;
    c.args.setLinSpaced(points, 0.0, 1.0);
    c.values.setConstant(points, value);
    c.label = "c" + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST_CASE("catalog dimensions") {
  auto inst = oracles::random_instance(3, 5, 6, 1);
  CHECK(inst.catalog.num_psi() == 4);
  CHECK(inst.catalog.num_xi() == 21);
  CHECK(inst.catalog.t_factors.rows() == 5);
  CHECK(inst.catalog.t_factors.cols() == 5);
  CHECK(inst.catalog.x_moments.rows() == 3);
  CHECK(inst.catalog.qx.rows() == 3);

  BasisCatalog big;
  big.n = 30;
  CHECK(big.num_xi() == 1020);

  CHECK_THROWS_AS(build_catalog({inst.x[0]}, {inst.y[0]}, inst.catalog.t_rule,
                                inst.catalog.s_rule),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_catalog(inst.x, {inst.y[0], inst.y[1]}, inst.catalog.t_rule,
                                inst.catalog.s_rule),
                  std::invalid_argument);
}

TEST_CASE("constant predictors are annihilated") {
  // Dense rules: plain Gauss-Legendre needs ~128 nodes to push the kinked
  // kernel sections below 1e-10.
  const QuadratureRule t_rule = gauss_legendre(16);
  const QuadratureRule s_rule = gauss_legendre(128);
  const auto x = constant_curves(3, 1.0);
  const auto y = constant_curves(3, 0.7);
  const BasisCatalog cat = build_catalog(x, y, t_rule, s_rule);
  CHECK(cat.hx_nodes.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(cat.qx.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("build_S closed-form entries") {
  const QuadratureRule t_rule = gauss_legendre(4);
  const QuadratureRule s_rule = gauss_legendre(20);

  SUBCASE("unit predictors") {
    const auto x = constant_curves(2, 1.0);
    const auto y = constant_curves(2, 0.5);
    const BasisCatalog cat = build_catalog(x, y, t_rule, s_rule);
    const Eigen::MatrixXd s = build_S(cat);
    for (Eigen::Index row = 0; row < s.rows(); ++row) {
      CHECK(s(row, 0) == doctest::Approx(1.0).epsilon(1e-14));  // psi_1 = 1*1
      CHECK(std::abs(s(row, 1)) < 1e-14);                       // x-part r1 integrates to 0
    }
  }

  SUBCASE("linear predictor against psi_1") {
    std::vector<Curve> x, y;
    for (int i = 0; i < 2; ++i) {
      Curve c;
      c.args.setLinSpaced(11, 0.0, 1.0);
      c.values = c.args;
      x.push_back(c);
      y.push_back(constant_curves(1, 0.3)[0]);
    }
    const BasisCatalog cat = build_catalog(x, y, t_rule, s_rule);
    const Eigen::MatrixXd s = build_S(cat);
    CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    // t-part r1 columns scale by r1(t_j)
    CHECK(s(1, 2) == doctest::Approx(0.5 * scaled_bernoulli(1, t_rule.nodes(1))).epsilon(1e-12));
  }
}

TEST_CASE("build_R structure and refined-quadrature oracle") {
  SUBCASE("unit predictors zero the convolution blocks") {
    const QuadratureRule t_rule = gauss_legendre(4);
    const QuadratureRule s_rule = gauss_legendre(128);
    const auto x = constant_curves(3, 1.0);
    auto inst = oracles::random_instance(3, 4, 6, 2);
    const BasisCatalog cat = build_catalog(x, inst.y, t_rule, s_rule);
    const Eigen::MatrixXd r = build_R(cat);
    // blocks 1-2 carry int (K1x X_j) X_i = qx entries, zero for constants
    CHECK(r.leftCols(2 * 3).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("zero predictors give a zero matrix") {
    auto inst = oracles::random_instance(3, 4, 6, 3);
    const BasisCatalog cat = build_catalog(constant_curves(3, 0.0), inst.y, inst.catalog.t_rule,
                                           inst.catalog.s_rule);
    CHECK(build_R(cat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(build_S(cat).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("entries match direct fine-grid quadrature") {
    // Affine predictors are represented exactly by the piecewise-linear
    // resampling, so the only quadrature error left is the kernel kink.
    const int n = 3;
    std::mt19937 gen(17);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<Curve> x, y;
    for (int i = 0; i < n; ++i) {
      Curve c;
      c.args.setLinSpaced(31, 0.0, 1.0);
      c.values = (unif(gen) + unif(gen) * c.args.array()).matrix();
      x.push_back(c);
      y.push_back(oracles::random_smooth_curve(gen, 31));
    }
    const QuadratureRule t_rule = gauss_legendre(5);
    const QuadratureRule s_rule = gauss_legendre(64);
    const BasisCatalog cat = build_catalog(x, y, t_rule, s_rule);
    const Eigen::MatrixXd r = build_R(cat);

    std::vector<double> breaks{0.0, 1.0};
    for (Eigen::Index l = 0; l < s_rule.size(); ++l) breaks.push_back(s_rule.nodes(l));

    // one representative xi per block
    for (const Eigen::Index k : {Eigen::Index(1), Eigen::Index(n + 2), Eigen::Index(2 * n),
                                 Eigen::Index(3 * n + 1), Eigen::Index(4 * n + n + 2)}) {
      const auto [tf, sf] = oracles::xi_factors(k, n);
      for (const Eigen::Index row : {Eigen::Index(0), Eigen::Index(7), Eigen::Index(11)}) {
        const Eigen::Index i = row / t_rule.size();
        const Eigen::Index j = row % t_rule.size();
        const double t_val = tf < 2 ? cat.ky.psi(static_cast<int>(tf), t_rule.nodes(j))
                                    : cat.gy_nodes(j, tf - 2);
        const auto s_factor = [&](double s) {
          if (sf < 2) return cat.kx.psi(static_cast<int>(sf), s);
          Eigen::VectorXd pt(1);
          pt << s;
          return k1_convolve(cat.kx, cat.x_nodes.col(sf - 2), s_rule, pt)(0);
        };
        const Curve& xc = x[static_cast<size_t>(i)];
        const double oracle = oracles::piecewise_integral(
            [&](double s) { return t_val * s_factor(s) * resample(xc, Eigen::VectorXd::Constant(1, s))(0); },
            breaks, 40);
        CHECK(r(row, k) == doctest::Approx(oracle).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("build_Q matches the reproducing-property oracle") {
  auto inst = oracles::random_instance(3, 5, 8, 23);
  const BasisCatalog& cat = inst.catalog;
  const Eigen::MatrixXd q = build_Q(cat);
  const Eigen::Index n = cat.n, L = cat.num_xi();

  CHECK(q.rows() == L);
  // block 5 is n^2 x n^2
  CHECK(L - 4 * n == n * n);

  const oracles::FactorInnerProduct ip_y(cat.ky, cat.y_nodes, cat.t_rule);
  const oracles::FactorInnerProduct ip_x(cat.kx, cat.x_nodes, cat.s_rule);

  double max_err = 0.0, max_offblock = 0.0;
  for (Eigen::Index a = 0; a < L; ++a) {
    const auto [ta, sa] = oracles::xi_factors(a, n);
    for (Eigen::Index b = 0; b <= a; ++b) {
      const auto [tb, sb] = oracles::xi_factors(b, n);
      const double oracle = ip_y(ta, tb) * ip_x(sa, sb);
      max_err = std::max(max_err, std::abs(q(a, b) - oracle));
      const bool same_block =
          (a / n == b / n) || (a >= 4 * n && b >= 4 * n);
      if (!same_block) max_offblock = std::max(max_offblock, std::abs(oracle));
    }
  }
  CHECK(max_err < 1e-8);
  CHECK(max_offblock < 1e-10);

  SUBCASE("symmetry and PSD") {
    CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(oracles::min_max_eig_ratio(q) >= -1e-8);
  }

  SUBCASE("sample relabeling permutes Q accordingly") {
    const std::vector<size_t> perm{2, 0, 1};
    std::vector<Curve> xp, yp;
    for (const size_t p : perm) {
      xp.push_back(inst.x[p]);
      yp.push_back(inst.y[p]);
    }
    const BasisCatalog cat_p = build_catalog(xp, yp, cat.t_rule, cat.s_rule);
    const Eigen::MatrixXd qp = build_Q(cat_p);

    // permutation of the xi index induced by the sample relabeling
    const auto xi_perm = [&](Eigen::Index k) {
      const auto [tf, sf] = oracles::xi_factors(k, n);
      const Eigen::Index ti = tf < 2 ? tf : 2 + static_cast<Eigen::Index>(perm[tf - 2]);
      const Eigen::Index si = sf < 2 ? sf : 2 + static_cast<Eigen::Index>(perm[sf - 2]);
      if (ti < 2 && si >= 2) return (ti == 0 ? Eigen::Index(0) : n) + (si - 2);
      if (ti >= 2 && si < 2) return 2 * n + (si == 0 ? Eigen::Index(0) : n) + (ti - 2);
      return 4 * n + (si - 2) * n + (ti - 2);
    };
    double max_diff = 0.0;
    for (Eigen::Index a = 0; a < L; ++a)
      for (Eigen::Index b = 0; b < L; ++b)
        max_diff = std::max(max_diff, std::abs(qp(a, b) - q(xi_perm(a), xi_perm(b))));
    CHECK(max_diff < 1e-13);
  }
}

TEST_CASE("assemble stacks weights and responses as documented") {
  auto inst = oracles::random_instance(2, 3, 6, 31);
  const DesignSystem& sys = inst.system;
  CHECK(sys.yw.size() == 6);
  CHECK(sys.w_diag.size() == 6);
  for (int j = 0; j < 3; ++j) {
    CHECK(sys.w_diag(j) == inst.catalog.t_rule.weights(j));
    CHECK(sys.w_diag(3 + j) == inst.catalog.t_rule.weights(j));
  }

  // sw = W^{1/2} S elementwise
  const Eigen::MatrixXd s = build_S(inst.catalog);
  for (Eigen::Index r = 0; r < sys.sw.rows(); ++r)
    for (Eigen::Index c = 0; c < sys.sw.cols(); ++c)
      CHECK(sys.sw(r, c) == doctest::Approx(std::sqrt(sys.w_diag(r)) * s(r, c)).epsilon(1e-14));

  CHECK(sys.yw.allFinite());
  CHECK(sys.rw.allFinite());
  CHECK(sys.q.allFinite());

  // zero responses give a zero yw
  const BasisCatalog zero_cat = build_catalog(inst.x, constant_curves(2, 0.0),
                                              inst.catalog.t_rule, inst.catalog.s_rule);
  CHECK(assemble_from_catalog(zero_cat).yw.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reduced system matches the full design") {
  auto inst = oracles::random_instance(4, 6, 7, 57);
  const ReducedSystem red = build_reduced(inst.catalog);
  const Eigen::Index n = inst.catalog.n, T = inst.catalog.t_rule.size();
  CHECK(red.a.rows() == T);
  CHECK(red.b.rows() == n);
  CHECK(red.uy.cols() <= n);
  CHECK(red.ux.cols() <= n);

  // The reduced penalized block must reproduce the xi span: check that the
  // weighted design built from (a, b) spans the same fitted values as
  // [Sw Rw] on random coefficient probes, via the Gram matrices.
  const Eigen::Index nT = n * T;
  Eigen::MatrixXd full(nT, 4 + inst.catalog.num_xi());
  full.leftCols(4) = inst.system.sw;
  full.rightCols(inst.catalog.num_xi()) = inst.system.rw;

  Eigen::MatrixXd reduced(nT, red.a.cols() * red.b.cols());
  for (Eigen::Index q = 0; q < red.b.cols(); ++q)
    for (Eigen::Index p = 0; p < red.a.cols(); ++p)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < T; ++j)
          reduced(i * T + j, q * red.a.cols() + p) =
              std::sqrt(inst.catalog.t_rule.weights(j)) * red.a(j, p) * red.b(i, q);

  // column spaces agree: projecting either onto the other's span is lossless
  const Eigen::MatrixXd qr_full = Eigen::HouseholderQR<Eigen::MatrixXd>(full)
                                      .householderQ() *
                                  Eigen::MatrixXd::Identity(nT, std::min(nT, full.cols()));
  const Eigen::MatrixXd proj = qr_full * (qr_full.transpose() * reduced);
  CHECK((proj - reduced).cwiseAbs().maxCoeff() < 1e-9);
}

#include "fofreg/design.hpp"

#include <stdexcept>

namespace fofreg {

namespace {

Eigen::MatrixXd resample_all(const std::vector<Curve>& curves, const QuadratureRule& rule) {
  Eigen::MatrixXd nodes(rule.size(), static_cast<Eigen::Index>(curves.size()));
  for (size_t i = 0; i < curves.size(); ++i)
    nodes.col(static_cast<Eigen::Index>(i)) = resample(curves[i], rule.nodes);
  return nodes;
}

// Node Gram of the penalized-part kernel, conjugated by the rule weights:
// M = diag(w) K1(nodes) diag(w), so that f^T M g is the double quadrature
// of f(u) K1(u,v) g(v).
Eigen::MatrixXd weighted_k1_gram(const MarginalKernelPair& kernel, const QuadratureRule& rule) {
  const Eigen::Index m = rule.size();
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel.k1(rule.nodes(i), rule.nodes(j)) * rule.weights(i) * rule.weights(j);
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

}  // namespace

BasisCatalog build_catalog(const std::vector<Curve>& x_curves, const std::vector<Curve>& y_curves,
                           const QuadratureRule& t_rule, const QuadratureRule& s_rule) {
  if (x_curves.size() != y_curves.size())
    throw std::invalid_argument("build_catalog: predictor/response curve counts differ");
  if (x_curves.size() < 2) throw std::invalid_argument("build_catalog: need at least 2 samples");
  for (const auto& c : x_curves) validate_curve(c);
  for (const auto& c : y_curves) validate_curve(c);
  return build_catalog_from_nodes(resample_all(x_curves, s_rule), resample_all(y_curves, t_rule),
                                  t_rule, s_rule);
}

BasisCatalog build_catalog_from_nodes(Eigen::MatrixXd x_nodes, Eigen::MatrixXd y_nodes,
                                      QuadratureRule t_rule, QuadratureRule s_rule) {
  if (x_nodes.cols() != y_nodes.cols())
    throw std::invalid_argument("build_catalog: predictor/response sample counts differ");
  if (x_nodes.cols() < 2) throw std::invalid_argument("build_catalog: need at least 2 samples");
  if (x_nodes.rows() != s_rule.size() || y_nodes.rows() != t_rule.size())
    throw std::invalid_argument("build_catalog: node matrices do not match the rules");

  BasisCatalog cat;
  cat.n = static_cast<int>(x_nodes.cols());
  cat.t_rule = std::move(t_rule);
  cat.s_rule = std::move(s_rule);
  cat.x_nodes = std::move(x_nodes);
  cat.y_nodes = std::move(y_nodes);

  const Eigen::Index n = cat.n;
  const Eigen::Index mt = cat.t_rule.size();
  const Eigen::Index ms = cat.s_rule.size();

  cat.hx_nodes.resize(ms, n);
  for (Eigen::Index j = 0; j < n; ++j)
    cat.hx_nodes.col(j) = k1_convolve(cat.kx, cat.x_nodes.col(j), cat.s_rule, cat.s_rule.nodes);
  cat.gy_nodes.resize(mt, n);
  for (Eigen::Index i = 0; i < n; ++i)
    cat.gy_nodes.col(i) = k1_convolve(cat.ky, cat.y_nodes.col(i), cat.t_rule, cat.t_rule.nodes);

  // qx(i,j) = double quadrature of X_i(u) K1x(u,v) X_j(v); same for qy.
  {
    const Eigen::MatrixXd mx = weighted_k1_gram(cat.kx, cat.s_rule);
    cat.qx = cat.x_nodes.transpose() * mx * cat.x_nodes;
    cat.qx = 0.5 * (cat.qx + cat.qx.transpose()).eval();
    const Eigen::MatrixXd my = weighted_k1_gram(cat.ky, cat.t_rule);
    cat.qy = cat.y_nodes.transpose() * my * cat.y_nodes;
    cat.qy = 0.5 * (cat.qy + cat.qy.transpose()).eval();
  }

  cat.t_factors.resize(mt, 2 + n);
  for (Eigen::Index j = 0; j < mt; ++j) {
    cat.t_factors(j, 0) = 1.0;
    cat.t_factors(j, 1) = scaled_bernoulli(1, cat.t_rule.nodes(j));
  }
  cat.t_factors.rightCols(n) = cat.gy_nodes;

  cat.x_moments.resize(n, 2 + n);
  Eigen::VectorXd r1s(ms);
  for (Eigen::Index l = 0; l < ms; ++l) r1s(l) = scaled_bernoulli(1, cat.s_rule.nodes(l));
  cat.x_moments.col(0) = cat.x_nodes.transpose() * cat.s_rule.weights;
  cat.x_moments.col(1) = cat.x_nodes.transpose() * cat.s_rule.weights.cwiseProduct(r1s);
  cat.x_moments.rightCols(n) = cat.qx;

  return cat;
}

Eigen::MatrixXd build_S(const BasisCatalog& catalog) {
  const Eigen::Index n = catalog.n;
  const Eigen::Index T = catalog.t_rule.size();
  Eigen::MatrixXd s(n * T, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < T; ++j)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          s(i * T + j, 2 * a + b) = catalog.t_factors(j, a) * catalog.x_moments(i, b);
  return s;
}

Eigen::MatrixXd build_R(const BasisCatalog& catalog) {
  const Eigen::Index n = catalog.n;
  const Eigen::Index T = catalog.t_rule.size();
  Eigen::MatrixXd r(n * T, catalog.num_xi());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < T; ++j) {
      const Eigen::Index row = i * T + j;
      for (Eigen::Index jj = 0; jj < n; ++jj) {
        const double sx = catalog.x_moments(i, 2 + jj);  // int (K1x X_jj) X_i
        r(row, jj) = catalog.t_factors(j, 0) * sx;
        r(row, n + jj) = catalog.t_factors(j, 1) * sx;
      }
      for (Eigen::Index ii = 0; ii < n; ++ii) {
        const double gt = catalog.t_factors(j, 2 + ii);  // (K1y Y_ii)(t_j)
        r(row, 2 * n + ii) = gt * catalog.x_moments(i, 0);
        r(row, 3 * n + ii) = gt * catalog.x_moments(i, 1);
        for (Eigen::Index jj = 0; jj < n; ++jj)
          r(row, 4 * n + jj * n + ii) = gt * catalog.x_moments(i, 2 + jj);
      }
    }
  }
  return r;
}

Eigen::MatrixXd build_Q(const BasisCatalog& catalog) {
  const Eigen::Index n = catalog.n;
  const Eigen::Index L = catalog.num_xi();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(L, L);
  q.block(0, 0, n, n) = catalog.qx;
  q.block(n, n, n, n) = catalog.qx;
  q.block(2 * n, 2 * n, n, n) = catalog.qy;
  q.block(3 * n, 3 * n, n, n) = catalog.qy;
  for (Eigen::Index j1 = 0; j1 < n; ++j1)
    for (Eigen::Index j2 = 0; j2 < n; ++j2)
      q.block(4 * n + j1 * n, 4 * n + j2 * n, n, n) = catalog.qx(j1, j2) * catalog.qy;
  return q;
}

DesignSystem assemble(const std::vector<Curve>& x_curves, const std::vector<Curve>& y_curves,
                      const QuadratureRule& t_rule, const QuadratureRule& s_rule) {
  return assemble_from_catalog(build_catalog(x_curves, y_curves, t_rule, s_rule));
}

DesignSystem assemble_from_catalog(const BasisCatalog& catalog) {
  DesignSystem sys;
  sys.n = catalog.n;
  sys.T = static_cast<int>(catalog.t_rule.size());
  sys.t_rule = catalog.t_rule;
  sys.s_rule = catalog.s_rule;

  const Eigen::Index n = sys.n, T = sys.T;
  sys.w_diag.resize(n * T);
  for (Eigen::Index i = 0; i < n; ++i) sys.w_diag.segment(i * T, T) = catalog.t_rule.weights;
  const Eigen::VectorXd w_sqrt = sys.w_diag.cwiseSqrt();

  Eigen::VectorXd y(n * T);
  for (Eigen::Index i = 0; i < n; ++i) y.segment(i * T, T) = catalog.y_nodes.col(i);
  sys.yw = w_sqrt.cwiseProduct(y);

  sys.sw = w_sqrt.asDiagonal() * build_S(catalog);
  sys.rw = w_sqrt.asDiagonal() * build_R(catalog);
  sys.q = build_Q(catalog);
  return sys;
}

ReducedSystem build_reduced(const BasisCatalog& catalog, double eig_drop_tol) {
  const Eigen::Index n = catalog.n;
  const Eigen::Index T = catalog.t_rule.size();

  // Rotate the convolution factors onto unit-penalized-norm eigendirections.
  // Eigenvalues at or below the drop tolerance correspond to combinations
  // that vanish identically and carry no data or penalty content.
  const auto reduce = [eig_drop_tol](const Eigen::MatrixXd& gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd& vals = eig.eigenvalues();  // ascending
    const double max_val = vals.size() > 0 ? std::max(vals(vals.size() - 1), 0.0) : 0.0;
    const double cut = max_val * eig_drop_tol;
    Eigen::Index first = vals.size();
    for (Eigen::Index k = 0; k < vals.size(); ++k)
      if (vals(k) > cut && vals(k) > 0.0) {
        first = k;
        break;
      }
    const Eigen::Index r = vals.size() - first;
    Eigen::MatrixXd u(gram.rows(), r);
    for (Eigen::Index k = 0; k < r; ++k)
      u.col(k) = eig.eigenvectors().col(first + k) / std::sqrt(vals(first + k));
    return u;
  };

  ReducedSystem red;
  red.n = catalog.n;
  red.T = static_cast<int>(T);
  red.uy = reduce(catalog.qy);
  red.ux = reduce(catalog.qx);

  const Eigen::Index ry = red.uy.cols(), rx = red.ux.cols();
  red.a.resize(T, 2 + ry);
  red.a.leftCols(2) = catalog.t_factors.leftCols(2);
  red.a.rightCols(ry) = catalog.gy_nodes * red.uy;

  red.b.resize(n, 2 + rx);
  red.b.leftCols(2) = catalog.x_moments.leftCols(2);
  red.b.rightCols(rx) = catalog.qx * red.ux;

  red.y_stacked.resize(n * T);
  for (Eigen::Index i = 0; i < n; ++i) red.y_stacked.segment(i * T, T) = catalog.y_nodes.col(i);
  red.w_sqrt = catalog.t_rule.weights.cwiseSqrt();
  return red;
}

}  // namespace fofreg

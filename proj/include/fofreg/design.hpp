#pragma once

#include <Eigen/Dense>

#include <vector>

#include "fofreg/quadrature.hpp"

namespace fofreg {

/// Catalog of the representer basis built from n training curve pairs.
///
/// The estimate lives in the span of N = 4 null-space products psi and
/// L = n(n+4) data-adaptive xi functions. Every xi factors as a t-part
/// times an s-part; the catalog caches both factor families at the
/// quadrature grids:
///   t-parts: 1, r1(t), (K1y Y_i)(t)  for i = 1..n
///   s-parts: 1, r1(s), (K1x X_j)(s)  for j = 1..n
///
/// xi ordering (0-based k):
///   block 1, k in [0,n):     1      x (K1x X_j),  j = k
///   block 2, k in [n,2n):    r1(t)  x (K1x X_j),  j = k-n
///   block 3, k in [2n,3n):   (K1y Y_i) x 1,       i = k-2n
///   block 4, k in [3n,4n):   (K1y Y_i) x r1(s),   i = k-3n
///   block 5, k in [4n,L):    (K1y Y_i)(K1x X_j),  k-4n = j*n + i
/// so that the block-5 penalty Gram equals qx kron qy.
struct BasisCatalog {
  int n = 0;
  QuadratureRule t_rule;
  QuadratureRule s_rule;
  MarginalKernelPair ky;
  MarginalKernelPair kx;

  Eigen::MatrixXd x_nodes;   // m_s x n, centered X_j at s-rule nodes
  Eigen::MatrixXd y_nodes;   // m_t x n, centered Y_i at t-rule nodes
  Eigen::MatrixXd hx_nodes;  // m_s x n, (K1x X_j) at s-rule nodes
  Eigen::MatrixXd gy_nodes;  // m_t x n, (K1y Y_i) at t-rule nodes

  Eigen::MatrixXd qx;  // n x n, <K1x X_i, K1x X_j> in the penalized norm
  Eigen::MatrixXd qy;  // n x n, <K1y Y_i, K1y Y_j>

  Eigen::MatrixXd t_factors;  // T x (2+n): [1, r1(t_j), (K1y Y_i)(t_j)]
  Eigen::MatrixXd x_moments;  // n x (2+n): [int X_i, int r1 X_i, qx row i]

  int num_psi() const { return 4; }
  Eigen::Index num_xi() const { return static_cast<Eigen::Index>(n) * (n + 4); }
};

/// Builds the catalog from already-centered curves, resampling each curve at
/// the rule nodes by piecewise-linear interpolation.
BasisCatalog build_catalog(const std::vector<Curve>& x_curves, const std::vector<Curve>& y_curves,
                           const QuadratureRule& t_rule, const QuadratureRule& s_rule);

/// Same, from node-value matrices (m_s x n and m_t x n).
BasisCatalog build_catalog_from_nodes(Eigen::MatrixXd x_nodes, Eigen::MatrixXd y_nodes,
                                      QuadratureRule t_rule, QuadratureRule s_rule);

/// nT x N matrix with entry ((i)T+j, nu) = int psi_nu(t_j, s) X_i(s) ds,
/// psi_nu = psi_{a,y} psi_{b,x} with nu = 2a + b.
Eigen::MatrixXd build_S(const BasisCatalog& catalog);

/// nT x L matrix with entry ((i)T+j, k) = int xi_k(t_j, s) X_i(s) ds.
Eigen::MatrixXd build_R(const BasisCatalog& catalog);

/// L x L penalty matrix diag(qx, qx, qy, qy, qx kron qy).
Eigen::MatrixXd build_Q(const BasisCatalog& catalog);

/// The weighted matrices of the penalized least-squares problem.
struct DesignSystem {
  Eigen::VectorXd yw;      // nT, W^{1/2} Y stacked curve-major
  Eigen::MatrixXd sw;      // nT x N
  Eigen::MatrixXd rw;      // nT x L
  Eigen::MatrixXd q;       // L x L
  Eigen::VectorXd w_diag;  // nT, diagonal of W (t-rule weights repeated n times)
  int n = 0;
  int T = 0;
  QuadratureRule t_rule;
  QuadratureRule s_rule;
};

/// Assembles the full system from centered curves. Memory grows like
/// L^2 = n^2 (n+4)^2; intended for n up to a few dozen. Larger fits go
/// through the reduced form below.
DesignSystem assemble(const std::vector<Curve>& x_curves, const std::vector<Curve>& y_curves,
                      const QuadratureRule& t_rule, const QuadratureRule& s_rule);

DesignSystem assemble_from_catalog(const BasisCatalog& catalog);

/// Rank-reduced tensor form of the same problem.
///
/// The t-parts of the basis span at most 2 + rank(qy) directions and the
/// s-parts at most 2 + rank(qx). Rotating the kernel-convolution factors
/// onto eigenvectors of qy/qx scaled to unit penalized norm turns the
/// penalty into the identity on the non-null coordinates, and the whole
/// objective into a small tensor ridge problem. The reduction is exact:
/// discarded eigen-directions are zero functions.
struct ReducedSystem {
  Eigen::MatrixXd a;   // T x (2+ry): [1, r1(t_j), orthonormalized t-parts]
  Eigen::MatrixXd b;   // n x (2+rx): [int X_i, int r1 X_i, orthonormalized s-moments]
  Eigen::MatrixXd uy;  // n x ry, sample coefficients of the rotated t-parts
  Eigen::MatrixXd ux;  // n x rx
  Eigen::VectorXd y_stacked;  // nT, unweighted response values curve-major
  Eigen::VectorXd w_sqrt;     // T, sqrt of t-rule weights
  int n = 0;
  int T = 0;
};

ReducedSystem build_reduced(const BasisCatalog& catalog, double eig_drop_tol = 1e-14);

}  // namespace fofreg

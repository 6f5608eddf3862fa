#pragma once

#include <Eigen/Dense>

#include <vector>

#include "fofreg/design.hpp"
#include "fofreg/errors.hpp"

namespace fofreg {

/// Rank-revealing Cholesky factorization with diagonal pivoting. The matrix
/// is Jacobi-equilibrated first (the basis functions behind it differ by
/// orders of magnitude in natural scale), then pivots at or below drop_tol
/// times the largest equilibrated pivot end the factorization; coefficients
/// in the dropped trailing block are set to zero when solving.
class PivotedCholesky {
 public:
  void compute(const Eigen::MatrixXd& a, double drop_tol = 1e-10);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  Eigen::Index rank() const { return rank_; }
  double max_pivot() const { return max_pivot_; }
  bool healthy() const { return healthy_; }

 private:
  Eigen::MatrixXd l_;  // m x rank lower-triangular factor, permuted order
  Eigen::VectorXd scale_;
  std::vector<Eigen::Index> perm_;
  Eigen::Index rank_ = 0;
  double max_pivot_ = 0.0;
  bool healthy_ = false;
};

struct PenalizedSolution {
  Eigen::VectorXd d;  // length N = 4
  Eigen::VectorXd c;  // length L = n(n+4)
  double lambda = 0.0;
  double effective_df = 0.0;  // trace of A(lambda)
  double rss = 0.0;           // weighted residual sum of squares
};

/// Minimizes (yw - Sw d - Rw c)^T (yw - Sw d - Rw c) + n lambda c^T Q c
/// by pivoted Cholesky on the stationarity system, with a single
/// ridge-jitter retry before declaring the system singular.
PenalizedSolution solve_penalized(const DesignSystem& system, double lambda);

/// Dense smoothing matrix A(lambda) with fitted_w = A(lambda) yw.
Eigen::MatrixXd hat_matrix(const DesignSystem& system, double lambda);

/// tr A(lambda) via N+L coefficient-space probe solves.
double hat_trace_by_probes(const DesignSystem& system, double lambda);

enum class TracePath { dense, probes };

/// Modified GCV score
///   V(lambda) = (nT)^{-1} ||(I - A) yw||^2 / {(nT)^{-1} tr(I - fudge A)}^2.
/// Throws DegenerateSmootherError when the denominator trace is nonpositive.
double gcv_score(const DesignSystem& system, double lambda, double fudge,
                 TracePath path = TracePath::probes);

struct GcvTrace {
  Eigen::VectorXd lambdas;  // descending
  Eigen::VectorXd scores;   // NaN marks a degenerate lambda
  Eigen::VectorXd edf;
  Eigen::Index chosen = -1;
  double fudge = 1.0;

  double chosen_lambda() const { return lambdas(chosen); }
  double chosen_score() const { return scores(chosen); }
};

/// Evaluates V over the grid and picks the minimizer; ties break toward the
/// larger lambda. Degenerate grid points score NaN and are skipped; if all
/// are degenerate a SelectionFailureError is thrown.
GcvTrace select_lambda(const DesignSystem& system, const Eigen::VectorXd& grid, double fudge);

/// count log-spaced values from hi down to lo.
Eigen::VectorXd log_lambda_grid(double lo, double hi, int count);

/// Solver on the rank-reduced tensor form. One SVD up front makes every
/// lambda evaluation O(rank), so GCV sweeps are cheap at any sample size.
/// Produces the same minimizer as solve_penalized on the assembled system.
class ReducedSolver {
 public:
  explicit ReducedSolver(const ReducedSystem& system);

  double rss(double lambda) const;
  double edf(double lambda) const;
  /// NaN when tr(I - fudge A) <= 0.
  double gcv(double lambda, double fudge) const;
  GcvTrace select(const Eigen::VectorXd& grid, double fudge) const;

  struct Coefficients {
    Eigen::VectorXd d;
    Eigen::VectorXd c;
    Eigen::MatrixXd coef;  // (2+n) x (2+n) tensor coefficient matrix
  };
  Coefficients solve(double lambda) const;

  /// Unweighted fitted values, stacked curve-major like the design rows.
  Eigen::VectorXd fitted(double lambda) const;

  Eigen::Index num_obs() const { return yw_.size(); }

 private:
  Eigen::VectorXd theta_c(double lambda) const;
  Eigen::VectorXd theta_psi(const Eigen::VectorXd& tc) const;

  int n_ = 0, T_ = 0;
  Eigen::Index ry_ = 0, rx_ = 0;
  Eigen::MatrixXd uy_, ux_;
  Eigen::VectorXd w_sqrt_;
  Eigen::VectorXd yw_;
  Eigen::MatrixXd d_psi_;   // nT x 4 weighted null-space design
  Eigen::MatrixXd d_c_;     // nT x mc weighted penalized design
  Eigen::MatrixXd u_psi_;   // orthonormal basis of col(d_psi_)
  Eigen::MatrixXd v_psi_;
  Eigen::VectorXd sig_psi_;
  Eigen::Index rank_psi_ = 0;
  Eigen::MatrixXd u_, v_;  // SVD of the projected penalized design
  Eigen::VectorXd sig_;
  Eigen::VectorXd z_;      // U^T projected response
  double y2_ = 0.0;        // response energy orthogonal to both blocks
  std::vector<std::array<Eigen::Index, 2>> c_cols_;  // (p,q) per d_c_ column
};

}  // namespace fofreg

#include "fofreg/solver.hpp"

#include <cmath>
#include <limits>

namespace fofreg {

namespace {

constexpr double kDropTol = 1e-13;

// Penalized stationarity operator in a stabilized coefficient basis.
//
// The raw system [Sw Rw] with penalty diag(0, Q) is numerically treacherous:
// the xi functions differ by orders of magnitude in scale and Q carries a
// fast-decaying spectrum, so directions with simultaneously tiny data and
// penalty content dominate the roundoff at small lambda. Rotating the
// penalized block onto the eigenbasis of Q, rescaled to unit penalized norm,
// removes the imbalance: the penalty becomes the identity on the rotated
// coordinates and the data columns stay bounded (point evaluation is
// bounded by the penalized norm). The transform is invertible, so solutions
// map back to the original (d, c) layout exactly.
struct PenalizedOperator {
  Eigen::MatrixXd mt;        // nT x (N+L), transformed design
  Eigen::MatrixXd gt;        // mt^T mt
  Eigen::VectorXd rhs;       // mt^T yw
  Eigen::VectorXd pen_mask;  // 1 on penalized coordinates, else 0
  Eigen::MatrixXd tc;        // L x L change of basis for the c-block
  Eigen::VectorXd yw;
  Eigen::Index n_null = 0;  // N
  double n_scale = 0.0;     // sample count multiplying lambda

  explicit PenalizedOperator(const DesignSystem& system) {
    if (!system.yw.allFinite() || !system.sw.allFinite() || !system.rw.allFinite() ||
        !system.q.allFinite())
      throw NumericalInputError("penalized solve: non-finite matrix entries");

    const Eigen::Index N = system.sw.cols();
    const Eigen::Index L = system.rw.cols();
    n_null = N;
    n_scale = system.n;
    yw = system.yw;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system.q);
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double vmax = std::max(vals.size() > 0 ? vals(vals.size() - 1) : 0.0, 0.0);
    pen_mask = Eigen::VectorXd::Zero(N + L);
    Eigen::VectorXd scale(L);
    for (Eigen::Index k = 0; k < L; ++k) {
      if (vals(k) > 1e-14 * vmax && vals(k) > 0.0) {
        scale(k) = 1.0 / std::sqrt(vals(k));
        pen_mask(N + k) = 1.0;
      } else {
        scale(k) = 1.0;  // numerically zero penalty: the direction is inert
      }
    }
    tc = eig.eigenvectors() * scale.asDiagonal();

    mt.resize(system.yw.size(), N + L);
    mt.leftCols(N) = system.sw;
    mt.rightCols(L).noalias() = system.rw * tc;
    gt.noalias() = mt.transpose() * mt;
    rhs.noalias() = mt.transpose() * yw;
  }

  Eigen::MatrixXd h(double lambda) const {
    Eigen::MatrixXd out = gt;
    out.diagonal() += (n_scale * lambda) * pen_mask;
    return out;
  }

  // Transformed coefficients back to the (d, c) layout.
  Eigen::VectorXd untransform(const Eigen::VectorXd& theta_t) const {
    Eigen::VectorXd theta(theta_t.size());
    theta.head(n_null) = theta_t.head(n_null);
    theta.tail(theta_t.size() - n_null).noalias() = tc * theta_t.tail(theta_t.size() - n_null);
    return theta;
  }
};

// Factor with a single relative-jitter retry; throws on breakdown.
PivotedCholesky factor_with_retry(Eigen::MatrixXd h) {
  PivotedCholesky chol;
  chol.compute(h, kDropTol);
  if (chol.healthy()) return chol;
  h.diagonal() *= (1.0 + 1e-10);
  chol.compute(h, kDropTol);
  if (!chol.healthy()) throw SingularSystemError("penalized system: factorization breakdown");
  return chol;
}

// One step of iterative refinement sharpens the zero-filled solve.
Eigen::MatrixXd refined_solve(const PivotedCholesky& chol, const Eigen::MatrixXd& h,
                              const Eigen::MatrixXd& rhs, int steps = 1) {
  Eigen::MatrixXd x = chol.solve(rhs);
  for (int it = 0; it < steps; ++it) x += chol.solve(Eigen::MatrixXd(rhs - h * x));
  return x;
}

double trace_by_probes(const PivotedCholesky& chol, const Eigen::MatrixXd& h,
                       const Eigen::MatrixXd& g) {
  double tr = 0.0;
  for (Eigen::Index k = 0; k < g.cols(); ++k)
    tr += refined_solve(chol, h, Eigen::MatrixXd(g.col(k)))(k, 0);
  return tr;
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
}

}  // namespace

void PivotedCholesky::compute(const Eigen::MatrixXd& a, double drop_tol) {
  const Eigen::Index m = a.rows();
  scale_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    scale_(i) = a(i, i) > 0.0 ? 1.0 / std::sqrt(a(i, i)) : 1.0;
  Eigen::MatrixXd work = scale_.asDiagonal() * a * scale_.asDiagonal();
  perm_.resize(static_cast<size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) perm_[static_cast<size_t>(i)] = i;

  rank_ = 0;
  max_pivot_ = 0.0;
  healthy_ = true;

  for (Eigen::Index k = 0; k < m; ++k) {
    // Largest remaining diagonal becomes the next pivot.
    Eigen::Index best = k;
    for (Eigen::Index i = k + 1; i < m; ++i)
      if (work(i, i) > work(best, best)) best = i;
    const double pivot = work(best, best);
    if (k == 0) max_pivot_ = pivot;
    if (!std::isfinite(pivot)) {
      healthy_ = false;
      break;
    }
    if (pivot <= 0.0 || pivot <= drop_tol * max_pivot_) break;

    if (best != k) {
      work.row(k).swap(work.row(best));
      work.col(k).swap(work.col(best));
      std::swap(perm_[static_cast<size_t>(k)], perm_[static_cast<size_t>(best)]);
    }

    const double root = std::sqrt(pivot);
    work(k, k) = root;
    if (k + 1 < m) {
      work.col(k).tail(m - k - 1) /= root;
      // full rank-1 downdate keeps the trailing block symmetric, so later
      // row/column pivot swaps stay valid
      const auto v = work.col(k).tail(m - k - 1);
      work.bottomRightCorner(m - k - 1, m - k - 1).noalias() -= v * v.transpose();
    }
    ++rank_;
  }

  l_ = work.leftCols(rank_);
  for (Eigen::Index j = 0; j < rank_; ++j)
    l_.col(j).head(j).setZero();
  if (!l_.allFinite()) healthy_ = false;
}

Eigen::VectorXd PivotedCholesky::solve(const Eigen::VectorXd& rhs) const {
  return solve(Eigen::MatrixXd(rhs)).col(0);
}

Eigen::MatrixXd PivotedCholesky::solve(const Eigen::MatrixXd& rhs) const {
  const Eigen::Index m = static_cast<Eigen::Index>(perm_.size());
  Eigen::MatrixXd b(rank_, rhs.cols());
  for (Eigen::Index i = 0; i < rank_; ++i) {
    const Eigen::Index src = perm_[static_cast<size_t>(i)];
    b.row(i) = scale_(src) * rhs.row(src);
  }

  // L z = b, then L^T x = z on the retained block.
  l_.topRows(rank_).triangularView<Eigen::Lower>().solveInPlace(b);
  l_.topRows(rank_).transpose().triangularView<Eigen::Upper>().solveInPlace(b);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, rhs.cols());
  for (Eigen::Index i = 0; i < rank_; ++i) {
    const Eigen::Index dst = perm_[static_cast<size_t>(i)];
    x.row(dst) = scale_(dst) * b.row(i);
  }
  return x;
}

PenalizedSolution solve_penalized(const DesignSystem& system, double lambda) {
  check_lambda(lambda);
  const PenalizedOperator op(system);
  const Eigen::MatrixXd h = op.h(lambda);
  const PivotedCholesky chol = factor_with_retry(h);

  const Eigen::VectorXd theta_t = refined_solve(chol, h, op.rhs, 2);
  if (!theta_t.allFinite())
    throw SingularSystemError("penalized system: solve produced non-finite values");
  const Eigen::VectorXd theta = op.untransform(theta_t);

  PenalizedSolution sol;
  const Eigen::Index N = system.sw.cols();
  sol.d = theta.head(N);
  sol.c = theta.tail(theta.size() - N);
  sol.lambda = lambda;
  sol.rss = (op.yw - op.mt * theta_t).squaredNorm();
  sol.effective_df = trace_by_probes(chol, h, op.gt);
  return sol;
}

Eigen::MatrixXd hat_matrix(const DesignSystem& system, double lambda) {
  check_lambda(lambda);
  const PenalizedOperator op(system);
  const Eigen::MatrixXd h = op.h(lambda);
  const PivotedCholesky chol = factor_with_retry(h);
  const Eigen::MatrixXd x = refined_solve(chol, h, Eigen::MatrixXd(op.mt.transpose()));
  return op.mt * x;
}

double hat_trace_by_probes(const DesignSystem& system, double lambda) {
  check_lambda(lambda);
  const PenalizedOperator op(system);
  const Eigen::MatrixXd h = op.h(lambda);
  const PivotedCholesky chol = factor_with_retry(h);
  return trace_by_probes(chol, h, op.gt);
}

namespace {

double gcv_from_parts(double rss, double trace, Eigen::Index nT, double fudge) {
  const double denom_tr = static_cast<double>(nT) - fudge * trace;
  if (!(denom_tr > 0.0))
    throw DegenerateSmootherError("gcv_score: tr(I - fudge A) is nonpositive");
  const double n_inv = 1.0 / static_cast<double>(nT);
  return (n_inv * rss) / ((n_inv * denom_tr) * (n_inv * denom_tr));
}

double gcv_with_operator(const PenalizedOperator& op, double lambda, double fudge,
                         TracePath path, double* edf_out) {
  check_lambda(lambda);
  if (!(fudge >= 1.0)) throw std::invalid_argument("gcv_score: fudge factor must be >= 1");
  const Eigen::MatrixXd h = op.h(lambda);
  const PivotedCholesky chol = factor_with_retry(h);

  double rss = 0.0, trace = 0.0;
  if (path == TracePath::dense) {
    const Eigen::MatrixXd x = refined_solve(chol, h, Eigen::MatrixXd(op.mt.transpose()));
    const Eigen::MatrixXd a = op.mt * x;
    rss = (op.yw - a * op.yw).squaredNorm();
    trace = a.trace();
  } else {
    const Eigen::VectorXd theta_t = refined_solve(chol, h, op.rhs, 2);
    rss = (op.yw - op.mt * theta_t).squaredNorm();
    trace = trace_by_probes(chol, h, op.gt);
  }
  if (edf_out) *edf_out = trace;
  return gcv_from_parts(rss, trace, op.yw.size(), fudge);
}

}  // namespace

double gcv_score(const DesignSystem& system, double lambda, double fudge, TracePath path) {
  const PenalizedOperator op(system);
  return gcv_with_operator(op, lambda, fudge, path, nullptr);
}

namespace {

// Shared argmin convention: grid descending, NaN skipped, ties keep the
// earlier (larger) lambda.
GcvTrace finish_trace(Eigen::VectorXd lambdas, Eigen::VectorXd scores, Eigen::VectorXd edf,
                      double fudge) {
  GcvTrace trace;
  trace.fudge = fudge;
  trace.lambdas = std::move(lambdas);
  trace.scores = std::move(scores);
  trace.edf = std::move(edf);
  trace.chosen = -1;
  for (Eigen::Index i = 0; i < trace.scores.size(); ++i) {
    if (std::isnan(trace.scores(i))) continue;
    if (trace.chosen < 0 || trace.scores(i) < trace.scores(trace.chosen)) trace.chosen = i;
  }
  if (trace.chosen < 0)
    throw SelectionFailureError("lambda selection: every grid point was degenerate");
  return trace;
}

Eigen::VectorXd sort_descending(const Eigen::VectorXd& grid) {
  if (grid.size() == 0) throw std::invalid_argument("lambda selection: empty grid");
  std::vector<double> g(grid.data(), grid.data() + grid.size());
  std::sort(g.begin(), g.end(), std::greater<double>());
  return Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

}  // namespace

GcvTrace select_lambda(const DesignSystem& system, const Eigen::VectorXd& grid, double fudge) {
  const Eigen::VectorXd lambdas = sort_descending(grid);
  Eigen::VectorXd scores(lambdas.size()), edf(lambdas.size());
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    try {
      scores(i) = gcv_score(system, lambdas(i), fudge, TracePath::probes);
      edf(i) = hat_trace_by_probes(system, lambdas(i));
    } catch (const DegenerateSmootherError&) {
      scores(i) = std::numeric_limits<double>::quiet_NaN();
      edf(i) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return finish_trace(lambdas, scores, edf, fudge);
}

Eigen::VectorXd log_lambda_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 1)
    throw std::invalid_argument("log_lambda_grid: need 0 < lo < hi and count >= 1");
  Eigen::VectorXd grid(count);
  if (count == 1) {
    grid(0) = hi;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i) grid(i) = std::exp(std::log(hi) - i * step);
  return grid;
}

ReducedSolver::ReducedSolver(const ReducedSystem& system) {
  n_ = system.n;
  T_ = system.T;
  uy_ = system.uy;
  ux_ = system.ux;
  ry_ = uy_.cols();
  rx_ = ux_.cols();
  w_sqrt_ = system.w_sqrt;

  const Eigen::Index nT = static_cast<Eigen::Index>(n_) * T_;
  yw_.resize(nT);
  for (Eigen::Index i = 0; i < n_; ++i)
    yw_.segment(i * T_, T_) = w_sqrt_.cwiseProduct(system.y_stacked.segment(i * T_, T_));

  const Eigen::MatrixXd aw = w_sqrt_.asDiagonal() * system.a;  // T x (2+ry)
  const Eigen::Index pa = 2 + ry_, pb = 2 + rx_;
  const Eigen::Index mc = pa * pb - 4;

  d_psi_.resize(nT, 4);
  d_c_.resize(nT, mc);
  c_cols_.clear();
  c_cols_.reserve(static_cast<size_t>(mc));
  Eigen::Index cc = 0;
  for (Eigen::Index q = 0; q < pb; ++q) {
    for (Eigen::Index p = 0; p < pa; ++p) {
      const bool is_psi = (p < 2 && q < 2);
      Eigen::Index target = is_psi ? (q * 2 + p) : cc;
      for (Eigen::Index i = 0; i < n_; ++i) {
        const double scale = system.b(i, q);
        if (is_psi)
          d_psi_.col(target).segment(i * T_, T_) = scale * aw.col(p);
        else
          d_c_.col(target).segment(i * T_, T_) = scale * aw.col(p);
      }
      if (!is_psi) {
        c_cols_.push_back({p, q});
        ++cc;
      }
    }
  }

  // Null-space block: SVD for rank detection and min-norm solves.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_psi(d_psi_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double psi_tol =
      std::max(nT, Eigen::Index(4)) * std::numeric_limits<double>::epsilon() *
      (svd_psi.singularValues().size() > 0 ? svd_psi.singularValues()(0) : 0.0);
  rank_psi_ = 0;
  for (Eigen::Index k = 0; k < svd_psi.singularValues().size(); ++k)
    if (svd_psi.singularValues()(k) > psi_tol) ++rank_psi_;
  u_psi_ = svd_psi.matrixU().leftCols(rank_psi_);
  v_psi_ = svd_psi.matrixV().leftCols(rank_psi_);
  sig_psi_ = svd_psi.singularValues().head(rank_psi_);

  if (mc > 0) {
    Eigen::MatrixXd m_proj = d_c_;
    if (rank_psi_ > 0) m_proj.noalias() -= u_psi_ * (u_psi_.transpose() * d_c_);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m_proj, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    sig_ = svd.singularValues();
  } else {
    u_.resize(nT, 0);
    v_.resize(0, 0);
    sig_.resize(0);
  }

  Eigen::VectorXd y_proj = yw_;
  if (rank_psi_ > 0) y_proj.noalias() -= u_psi_ * (u_psi_.transpose() * yw_);
  z_ = u_.transpose() * y_proj;
  y2_ = std::max(0.0, y_proj.squaredNorm() - z_.squaredNorm());
}

double ReducedSolver::rss(double lambda) const {
  const double nl = n_ * lambda;
  double acc = y2_;
  for (Eigen::Index k = 0; k < sig_.size(); ++k) {
    const double s2 = sig_(k) * sig_(k);
    const double shrink = nl / (s2 + nl);
    acc += z_(k) * z_(k) * shrink * shrink;
  }
  return acc;
}

double ReducedSolver::edf(double lambda) const {
  const double nl = n_ * lambda;
  double tr = static_cast<double>(rank_psi_);
  for (Eigen::Index k = 0; k < sig_.size(); ++k) {
    const double s2 = sig_(k) * sig_(k);
    tr += s2 / (s2 + nl);
  }
  return tr;
}

double ReducedSolver::gcv(double lambda, double fudge) const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(fudge >= 1.0)) throw std::invalid_argument("gcv: fudge factor must be >= 1");
  const double nT = static_cast<double>(num_obs());
  const double denom_tr = nT - fudge * edf(lambda);
  if (!(denom_tr > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return (rss(lambda) / nT) / ((denom_tr / nT) * (denom_tr / nT));
}

GcvTrace ReducedSolver::select(const Eigen::VectorXd& grid, double fudge) const {
  const Eigen::VectorXd lambdas = sort_descending(grid);
  Eigen::VectorXd scores(lambdas.size()), edfs(lambdas.size());
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    scores(i) = gcv(lambdas(i), fudge);
    edfs(i) = std::isnan(scores(i)) ? std::numeric_limits<double>::quiet_NaN() : edf(lambdas(i));
  }
  return finish_trace(lambdas, scores, edfs, fudge);
}

Eigen::VectorXd ReducedSolver::theta_c(double lambda) const {
  const double nl = n_ * lambda;
  Eigen::VectorXd gain(sig_.size());
  for (Eigen::Index k = 0; k < sig_.size(); ++k)
    gain(k) = sig_(k) / (sig_(k) * sig_(k) + nl) * z_(k);
  return v_ * gain;
}

Eigen::VectorXd ReducedSolver::theta_psi(const Eigen::VectorXd& tc) const {
  Eigen::VectorXd resid = yw_;
  if (tc.size() > 0) resid.noalias() -= d_c_ * tc;
  if (rank_psi_ == 0) return Eigen::VectorXd::Zero(4);
  return v_psi_ * sig_psi_.cwiseInverse().cwiseProduct(u_psi_.transpose() * resid).eval();
}

ReducedSolver::Coefficients ReducedSolver::solve(double lambda) const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const Eigen::VectorXd tc = theta_c(lambda);
  const Eigen::VectorXd tp = theta_psi(tc);

  const Eigen::Index pa = 2 + ry_, pb = 2 + rx_;
  Eigen::MatrixXd ct = Eigen::MatrixXd::Zero(pa, pb);
  ct(0, 0) = tp(0);
  ct(1, 0) = tp(1);
  ct(0, 1) = tp(2);
  ct(1, 1) = tp(3);
  for (size_t k = 0; k < c_cols_.size(); ++k)
    ct(c_cols_[k][0], c_cols_[k][1]) = tc(static_cast<Eigen::Index>(k));

  // Rotate back to the per-sample factor basis.
  Coefficients out;
  out.coef = Eigen::MatrixXd::Zero(2 + n_, 2 + n_);
  out.coef.topLeftCorner(2, 2) = ct.topLeftCorner(2, 2);
  if (rx_ > 0) out.coef.topRightCorner(2, n_) = ct.topRightCorner(2, rx_) * ux_.transpose();
  if (ry_ > 0) out.coef.bottomLeftCorner(n_, 2) = uy_ * ct.bottomLeftCorner(ry_, 2);
  if (ry_ > 0 && rx_ > 0)
    out.coef.bottomRightCorner(n_, n_) = uy_ * ct.bottomRightCorner(ry_, rx_) * ux_.transpose();

  out.d.resize(4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) out.d(2 * a + b) = out.coef(a, b);

  const Eigen::Index n = n_;
  out.c.resize(n * (n + 4));
  for (Eigen::Index j = 0; j < n; ++j) {
    out.c(j) = out.coef(0, 2 + j);
    out.c(n + j) = out.coef(1, 2 + j);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    out.c(2 * n + i) = out.coef(2 + i, 0);
    out.c(3 * n + i) = out.coef(2 + i, 1);
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out.c(4 * n + j * n + i) = out.coef(2 + i, 2 + j);
  return out;
}

Eigen::VectorXd ReducedSolver::fitted(double lambda) const {
  const Eigen::VectorXd tc = theta_c(lambda);
  const Eigen::VectorXd tp = theta_psi(tc);
  Eigen::VectorXd f = d_psi_ * tp;
  if (tc.size() > 0) f.noalias() += d_c_ * tc;
  for (Eigen::Index i = 0; i < n_; ++i)
    f.segment(i * T_, T_) = f.segment(i * T_, T_).cwiseQuotient(w_sqrt_);
  return f;
}

}  // namespace fofreg

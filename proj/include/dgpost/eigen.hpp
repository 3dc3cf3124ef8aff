#ifndef DGPOST_EIGEN_HPP
#define DGPOST_EIGEN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dgpost {

/// Largest generalized eigenpair of a symmetric pencil.
struct EigResult {
  double lambda = 0.0;
  Eigen::VectorXd vector;
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;
};

/// lambda_max of A c = lambda B c for small dense symmetric A and positive
/// definite B: B = L L^T, C = L^{-1} A L^{-T}, symmetric eigensolve.
inline EigResult max_eig_pencil(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw InvalidArgument("pencil matrices must be square and of equal size");
  if (A.rows() == 0) throw InvalidArgument("empty pencil");
  const Eigen::MatrixXd Bs = 0.5 * (B + B.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(Bs);
  if (llt.info() != Eigen::Success) throw NumericFailure("B-form is not positive definite on the subspace");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd C = llt.matrixL().solve(0.5 * (A + A.transpose()));
  C = llt.matrixL().solve(C.transpose()).transpose();
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw NumericFailure("dense symmetric eigensolver failed");
  const Eigen::Index k = C.rows() - 1;
  EigResult out;
  out.lambda = es.eigenvalues()[k];
  out.vector = L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors().col(k));
  return out;
}

/// lambda_max of S^T A S c = lambda S^T B S c; the returned vector is S c.
inline EigResult max_eig_dense(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& S) {
  if (A.rows() != S.rows() || B.rows() != S.rows()) throw InvalidArgument("subspace rows differ from form size");
  EigResult r = max_eig_pencil(S.transpose() * A * S, S.transpose() * B * S);
  r.vector = S * r.vector;
  return r;
}

using LinearOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LobpcgOptions {
  double tol = 1e-3;
  int max_it = 500;
  std::uint64_t seed = 12345;
  /// Maps a vector onto the admissible subspace (x = Q v). Optional.
  LinearOp project;
  /// Transpose of `project`, applied to residuals (Q^T r). Optional.
  LinearOp project_t;
  /// Symmetric positive (semi)definite preconditioner T. Optional.
  LinearOp precond;
};

namespace detail {

// Rayleigh-Ritz on the columns of S for the largest pair. Columns are first
// orthonormalized in the B product; directions with small B-norm are dropped.
inline bool ritz_max(const Eigen::MatrixXd& GA, const Eigen::MatrixXd& GB, double& lambda,
                     Eigen::VectorXd& coef) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(0.5 * (GB + GB.transpose()));
  if (eb.info() != Eigen::Success) return false;
  const double top = eb.eigenvalues().maxCoeff();
  if (!(top > 0.0)) return false;
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < eb.eigenvalues().size(); ++i)
    if (eb.eigenvalues()[i] > 1e-12 * top) ++keep;
  Eigen::MatrixXd T(GB.rows(), keep);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < eb.eigenvalues().size(); ++i)
    if (eb.eigenvalues()[i] > 1e-12 * top) T.col(c++) = eb.eigenvectors().col(i) / std::sqrt(eb.eigenvalues()[i]);
  Eigen::MatrixXd R = T.transpose() * GA * T;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(0.5 * (R + R.transpose()));
  if (er.info() != Eigen::Success) return false;
  lambda = er.eigenvalues()[keep - 1];
  coef = T * er.eigenvectors().col(keep - 1);
  return true;
}

} // namespace detail

/// Largest eigenpair of the pencil (A, B) restricted to the range of the
/// optional projector, by block-size-one LOBPCG on the subspace
/// {x, T r, p}. The iterate is re-projected every step. On reaching max_it the
/// best Rayleigh quotient found is returned with converged = false.
inline EigResult max_eig_lobpcg(const LinearOp& A, const LinearOp& B, Eigen::Index n,
                                const LobpcgOptions& opt = {}) {
  if (n < 1) throw InvalidArgument("LOBPCG needs a positive problem size");
  auto proj = [&](const Eigen::VectorXd& v) { return opt.project ? opt.project(v) : v; };
  auto proj_t = [&](const Eigen::VectorXd& v) { return opt.project_t ? opt.project_t(v) : v; };
  auto prec = [&](const Eigen::VectorXd& v) { return opt.precond ? opt.precond(v) : v; };

  std::mt19937_64 gen(opt.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = uni(gen);
  // Spectral scale of the unprojected pencil, for the zero-eigenvalue test.
  const double lambda_ref = std::abs(x.dot(A(x)) / x.dot(B(x)));
  x = proj(x);

  Eigen::VectorXd Ax = A(x), Bx = B(x);
  double xBx = x.dot(Bx);
  if (!(xBx > 0.0)) throw NumericFailure("LOBPCG start vector has zero B-norm");
  double s = 1.0 / std::sqrt(xBx);
  x *= s;
  Ax *= s;
  Bx *= s;
  double lambda = x.dot(Ax);

  Eigen::VectorXd p, Ap, Bp;
  EigResult best;
  best.lambda = -std::numeric_limits<double>::infinity();

  for (int it = 1; it <= opt.max_it; ++it) {
    const Eigen::VectorXd r = proj_t(Ax - lambda * Bx);
    const double scale = std::max(std::abs(lambda), std::numeric_limits<double>::min()) * Bx.norm();
    const double rho = r.norm() / scale;
    if (lambda > best.lambda) {
      best.lambda = lambda;
      best.vector = x;
      best.residual = rho;
      best.iterations = it;
    }
    // The second test accepts a zero top eigenvalue (residual at rounding level).
    if (rho <= opt.tol || r.norm() <= 1e-12 * lambda_ref * Bx.norm()) {
      best.lambda = lambda;
      best.vector = x;
      best.residual = rho;
      best.iterations = it;
      best.converged = true;
      return best;
    }
    Eigen::VectorXd w = proj(prec(r));
    const Eigen::VectorXd Aw = A(w), Bw = B(w);

    const int m = p.size() > 0 ? 3 : 2;
    Eigen::MatrixXd S(n, m), AS(n, m), BS(n, m);
    S.col(0) = x;
    AS.col(0) = Ax;
    BS.col(0) = Bx;
    S.col(1) = w;
    AS.col(1) = Aw;
    BS.col(1) = Bw;
    if (m == 3) {
      S.col(2) = p;
      AS.col(2) = Ap;
      BS.col(2) = Bp;
    }
    // Normalize columns before forming the Gram matrices.
    for (int c = 0; c < m; ++c) {
      const double nb = std::sqrt(std::max(S.col(c).dot(BS.col(c)), 0.0));
      if (nb > 0.0) {
        S.col(c) /= nb;
        AS.col(c) /= nb;
        BS.col(c) /= nb;
      }
    }
    const Eigen::MatrixXd GA = S.transpose() * AS;
    const Eigen::MatrixXd GB = S.transpose() * BS;
    Eigen::VectorXd coef;
    double lam_new = lambda;
    if (!detail::ritz_max(0.5 * (GA + GA.transpose()), GB, lam_new, coef)) break;

    const Eigen::VectorXd xn = S * coef;
    p = S.rightCols(m - 1) * coef.tail(m - 1);
    Ap = AS.rightCols(m - 1) * coef.tail(m - 1);
    Bp = BS.rightCols(m - 1) * coef.tail(m - 1);
    x = proj(xn);
    Ax = A(x);
    Bx = B(x);
    xBx = x.dot(Bx);
    if (!(xBx > 0.0)) break;
    s = 1.0 / std::sqrt(xBx);
    x *= s;
    Ax *= s;
    Bx *= s;
    lambda = x.dot(Ax);
    best.iterations = it;
  }
  best.converged = false;
  best.iterations = opt.max_it;
  return best;
}

} // namespace dgpost

#endif

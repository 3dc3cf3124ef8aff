#ifndef DGPOST_LOCAL_CONSTANTS_HPP
#define DGPOST_LOCAL_CONSTANTS_HPP

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "eigen.hpp"
#include "errors.hpp"
#include "tensor_ops.hpp"

namespace dgpost {

enum class PenaltyRule { coercive, conservative, manual };

inline const char* to_string(PenaltyRule r) {
  switch (r) {
    case PenaltyRule::coercive: return "coercive";
    case PenaltyRule::conservative: return "conservative";
    case PenaltyRule::manual: return "manual";
  }
  return "?";
}

struct PenaltyOptions {
  PenaltyRule rule = PenaltyRule::coercive;
  double manual_value = 0.0;
  /// gamma floor in units of 1/h
  double floor_scale = 1.0;
};

/// gamma_kappa from d_kappa and theta under the selected rule.
inline double choose_penalty(double d, double theta, PenaltyRule rule, double manual_value,
                             double gamma_floor) {
  if (d < 0.0) throw InvalidArgument("d_kappa must be nonnegative");
  switch (rule) {
    case PenaltyRule::coercive:
      return std::max(0.5 * (1.0 + theta) * (1.0 + theta) * d * d, gamma_floor);
    case PenaltyRule::conservative:
      return std::max(2.0 * (1.0 + std::abs(theta)) * (1.0 + std::abs(theta)) * d * d, gamma_floor);
    case PenaltyRule::manual:
      if (!(manual_value > 0.0)) throw InvalidArgument("manual penalty must be positive");
      return manual_value;
  }
  return gamma_floor;
}

inline double choose_penalty(double d, double theta, const PenaltyOptions& opt, double h) {
  return choose_penalty(d, theta, opt.rule, opt.manual_value, opt.floor_scale / h);
}

enum class ConstantsMethod { lobpcg, dense };

inline const char* to_string(ConstantsMethod m) {
  return m == ConstantsMethod::dense ? "dense" : "lobpcg";
}

struct ConstantsOptions {
  ConstantsMethod method = ConstantsMethod::lobpcg;
  double tol = 1e-3;
  int max_it = 500;
  std::uint64_t seed = 12345;
  /// Apply K^{-1} (fast diagonalization) as LOBPCG preconditioner. Without
  /// it LOBPCG needs more than 500 iterations once n_g reaches about 100 (1D)
  /// or 48 (2D).
  bool precondition = true;
  /// Largest n_g^d for which the dense oracle may be used.
  Eigen::Index dense_limit = 2500;
};

struct LocalConstants {
  int element = 0;
  double a = 0.0;
  double b = 0.0;
  double d = 0.0;
  double gamma = 0.0;
  ConstantsMethod method = ConstantsMethod::lobpcg;
  int iterations_a = 0;
  int iterations_b = 0;
  double residual_a = 0.0;
  double residual_b = 0.0;
  bool converged = true;
  bool ill_conditioned = false;
};

/// d_kappa^2 = lambda_max of Phi^T M_delta Phi c = lambda Phi^T K Phi c.
inline double compute_dk(const BasisSpace& space, const TensorOperators& ops) {
  const Eigen::MatrixXd A = space.phi.transpose() * ops.apply(FormKind::bnd_grad, space.phi);
  const Eigen::MatrixXd B = space.phi.transpose() * ops.apply(FormKind::star, space.phi);
  const double lam = max_eig_pencil(A, B).lambda;
  return std::sqrt(std::max(lam, 0.0));
}

/// Orthonormal basis of range(Q) = null((K Phi)^T), the K-orthogonal complement of span(Phi).
inline Eigen::MatrixXd complement_basis(const BasisSpace& space, const TensorOperators& ops) {
  const Eigen::MatrixXd KPhi = ops.apply(FormKind::star, space.phi);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(KPhi);
  const Eigen::MatrixXd Qfull = qr.householderQ();
  return Qfull.rightCols(KPhi.rows() - KPhi.cols());
}

/// Dense oracle: lambda_max of (Z^T M Z, Z^T K Z) with Z spanning range(Q).
inline EigResult complement_eig_dense(const BasisSpace& space, const TensorOperators& ops,
                                      FormKind mass, Eigen::Index limit = 2500) {
  if (ops.size() > limit)
    throw ResourceError("dense constants oracle limited to n_g^d <= " + std::to_string(limit));
  const Eigen::MatrixXd Z = complement_basis(space, ops);
  const Eigen::MatrixXd A = Z.transpose() * ops.apply(mass, Z);
  const Eigen::MatrixXd B = Z.transpose() * ops.apply(FormKind::star, Z);
  EigResult r = max_eig_pencil(A, B);
  r.vector = Z * r.vector;
  return r;
}

/// Matrix-free path: LOBPCG on (Q^T M Q, Q^T K Q) with the iterate re-projected by Q.
inline EigResult complement_eig_lobpcg(const Projector& proj, const TensorOperators& ops, FormKind mass,
                                       const ConstantsOptions& opt) {
  LobpcgOptions lo;
  lo.tol = opt.tol;
  lo.max_it = opt.max_it;
  lo.seed = opt.seed;
  lo.project = [&proj](const Eigen::VectorXd& v) { return proj.apply_q(v); };
  lo.project_t = [&proj](const Eigen::VectorXd& v) { return proj.apply_qt(v); };
  if (opt.precondition) lo.precond = [&ops](const Eigen::VectorXd& v) { return ops.apply_star_inverse(v); };
  return max_eig_lobpcg([&ops, mass](const Eigen::VectorXd& v) { return ops.apply(mass, v); },
                        [&ops](const Eigen::VectorXd& v) { return ops.apply(FormKind::star, v); },
                        ops.size(), lo);
}

/// a_kappa and b_kappa (stored in `out`) by the selected method.
inline void compute_ak_bk(const BasisSpace& space, const Projector& proj, const TensorOperators& ops,
                          const ConstantsOptions& opt, LocalConstants& out) {
  out.method = opt.method;
  if (space.size() >= ops.size()) {
    // Q = 0: the complement is trivial.
    out.a = out.b = 0.0;
    return;
  }
  EigResult ra, rb;
  if (opt.method == ConstantsMethod::dense) {
    ra = complement_eig_dense(space, ops, FormKind::l2, opt.dense_limit);
    rb = complement_eig_dense(space, ops, FormKind::bnd, opt.dense_limit);
  } else {
    ra = complement_eig_lobpcg(proj, ops, FormKind::l2, opt);
    rb = complement_eig_lobpcg(proj, ops, FormKind::bnd, opt);
  }
  out.a = std::sqrt(std::max(ra.lambda, 0.0));
  out.b = std::sqrt(std::max(rb.lambda, 0.0));
  out.iterations_a = ra.iterations;
  out.iterations_b = rb.iterations;
  out.residual_a = ra.residual;
  out.residual_b = rb.residual;
  out.converged = ra.converged && rb.converged;
}

/// All constants of one element: d, a, b and the penalty.
inline LocalConstants compute_local_constants(const BasisSpace& space, const TensorOperators& ops,
                                              double theta, const PenaltyOptions& pen,
                                              const ConstantsOptions& opt = {}) {
  LocalConstants lc;
  lc.element = space.element;
  lc.d = compute_dk(space, ops);
  Projector proj(space, ops);
  lc.ill_conditioned = proj.ill_conditioned();
  compute_ak_bk(space, proj, ops, opt, lc);
  lc.gamma = choose_penalty(lc.d, theta, pen, ops.h());
  return lc;
}

inline void write_constants_csv(std::ostream& os, const std::vector<LocalConstants>& rows) {
  os << "element,a,b,d,gamma,method,iterations,converged\n";
  os << std::setprecision(17);
  for (const auto& r : rows)
    os << r.element << ',' << r.a << ',' << r.b << ',' << r.d << ',' << r.gamma << ',' << to_string(r.method)
       << ',' << std::max(r.iterations_a, r.iterations_b) << ',' << (r.converged ? 1 : 0) << '\n';
}

} // namespace dgpost

#endif

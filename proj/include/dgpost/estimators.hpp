#ifndef DGPOST_ESTIMATORS_HPP
#define DGPOST_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "dg.hpp"
#include "errors.hpp"
#include "local_constants.hpp"
#include "reference.hpp"
#include "tensor_ops.hpp"

namespace dgpost {

enum class DkuMode { approx_dk, exact_reference };

inline const char* to_string(DkuMode m) { return m == DkuMode::approx_dk ? "approx_dk" : "exact_reference"; }

struct ElementEstimate {
  int element = 0;
  double eta_r = 0.0, eta_f = 0.0, eta_j = 0.0;
  double c_r = 0.0, c_f = 0.0, c_j = 0.0;
  double sigma = 0.0;
  bool sigma_degenerate = false;
  double xi = 0.0;        // robust (ratio of sums)
  double xi_max = 0.0;    // max of channel ratios
  double c = 0.0;         // c_kappa = d^u + d |theta|
  double dku = 0.0;       // d^u value used
  DkuMode dku_mode = DkuMode::approx_dk;
  int excluded_channels = 0;
  double jump_norm2 = 0.0;  // ||[[u_N]]||^2_{d kappa}
  double error = std::numeric_limits<double>::quiet_NaN();   // |||u - u_N|||_kappa when known
  double c_eta = std::numeric_limits<double>::quiet_NaN();
  double c_xi = std::numeric_limits<double>::quiet_NaN();

  double eta_sum() const { return eta_r + eta_f + eta_j; }
};

struct GlobalEstimate {
  double eta = 0.0;
  double xi = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
  /// ||V-^{1/2}(u-u_N)||^2 / |||u-u_N|||, only with a reference.
  std::optional<double> indefinite_extra;
  bool indefinite = false;
  double jump_energy = 0.0;   // E_J = sum gamma/2 ||[[u_N]]||^2
  double eta_j2 = 0.0;        // sum eta_J^2
  std::vector<ElementEstimate> elements;
};

/// R = f + Lap u_N - V u_N on one element.
inline Eigen::VectorXd residual_field(const DgProblem& pb, const NodalField& uN, int e) {
  return pb.f_nodal(e) + pb.ops().laplacian(uN[e]) - pb.v_nodal(e).cwiseProduct(uN[e]);
}

/// g(x) = prod_l sin^2(pi x_l / h) in element coordinates.
inline Eigen::VectorXd bubble(const TensorOperators& ops) {
  Eigen::VectorXd g = Eigen::VectorXd::Ones(ops.size());
  for (Eigen::Index I = 0; I < ops.size(); ++I)
    for (int l = 0; l < ops.dim(); ++l) {
      const double s = std::sin(std::numbers::pi * ops.coordinate(I, l) / ops.h());
      g[I] *= s * s;
    }
  return g;
}

/// Homogeneous Dirichlet solver for -Lap phi = rhs on the element, Galerkin on
/// the interior LGL nodes (polynomials of degree n_g - 1 vanishing on the
/// boundary) by fast diagonalization of the 1D interior pencil.
class DirichletSolver {
public:
  explicit DirichletSolver(const TensorOperators& ops) : ops_(&ops) {
    const int n = ops.points_1d();
    m_ = n - 2;
    if (m_ < 1) return;
    const Eigen::MatrixXd& D = ops.diff_1d();
    Eigen::MatrixXd S = D.transpose() * ops.rule().weights.asDiagonal() * D;
    S = 0.5 * (S + S.transpose());
    const Eigen::MatrixXd Si = S.block(1, 1, m_, m_);
    const Eigen::MatrixXd Wi = ops.rule().weights.segment(1, m_).asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Si, Wi);
    if (es.info() != Eigen::Success) throw NumericFailure("Dirichlet fast diagonalization failed");
    Z_ = es.eigenvectors();
    lam_ = es.eigenvalues();
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const TensorOperators& ops = *ops_;
    const int d = ops.dim(), n = ops.points_1d();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(ops.size());
    if (m_ < 1) return out;
    // Weighted right side restricted to interior nodes.
    const Eigen::VectorXd b = ops.weights().cwiseProduct(rhs);
    Eigen::Index total = 1;
    for (int l = 0; l < d; ++l) total *= m_;
    Eigen::VectorXd bi(total);
    std::vector<Eigen::Index> map(total);
    for (Eigen::Index J = 0; J < total; ++J) {
      Eigen::Index r = J, I = 0, stride = 1;
      for (int l = 0; l < d; ++l) {
        I += (r % m_ + 1) * stride;
        r /= m_;
        stride *= n;
      }
      map[J] = I;
      bi[J] = b[I];
    }
    std::vector<Eigen::MatrixXd> zt(d, Z_.transpose()), z(d, Z_);
    Eigen::VectorXd c = apply_tensor(zt, bi);
    for (Eigen::Index J = 0; J < total; ++J) {
      Eigen::Index r = J;
      double s = 0.0;
      for (int l = 0; l < d; ++l) {
        s += lam_[r % m_];
        r /= m_;
      }
      c[J] /= s;
    }
    const Eigen::VectorXd x = apply_tensor(z, c);
    for (Eigen::Index J = 0; J < total; ++J) out[map[J]] = x[J];
    return out;
  }

private:
  const TensorOperators* ops_;
  int m_ = 0;
  Eigen::MatrixXd Z_;
  Eigen::VectorXd lam_;
};

struct BubbleResult {
  Eigen::VectorXd g;
  Eigen::VectorXd phi;
  double sigma = 0.0;
  bool degenerate = false;
};

/// Bubble g, local Dirichlet solution phi of -Lap phi = V g R, and sigma.
inline BubbleResult bubble_phi(const TensorOperators& ops, const DirichletSolver& dir, const Eigen::VectorXd& vnodal,
                               const Eigen::VectorXd& R, double a) {
  BubbleResult out;
  out.g = bubble(ops);
  const Eigen::VectorXd rhs = vnodal.cwiseProduct(out.g).cwiseProduct(R);
  out.phi = rhs.cwiseAbs().maxCoeff() == 0.0 ? Eigen::VectorXd::Zero(ops.size()) : dir.solve(rhs);
  const double gr2 = ops.weights().dot(out.g.cwiseProduct(R.cwiseAbs2()));
  const double rn = std::sqrt(ops.form(FormKind::l2, R, R));
  if (!(gr2 > std::numeric_limits<double>::min()) || !(rn > 0.0)) {
    out.degenerate = true;
    out.sigma = std::numeric_limits<double>::infinity();
    return out;
  }
  out.sigma = a * rn / gr2;
  return out;
}

struct EstimatorOptions {
  DkuMode dku_mode = DkuMode::approx_dk;
};

/// Per-element upper and lower bound quantities. `dku` gives d^u per element
/// (d_kappa in approx mode, the reference-based value in exact mode).
inline std::vector<ElementEstimate> element_estimators(const DgProblem& pb, const NodalField& uN,
                                                       const std::vector<LocalConstants>& lc,
                                                       const std::vector<double>& dku, DkuMode mode) {
  const Mesh& mesh = pb.mesh();
  const TensorOperators& ops = pb.ops();
  const int K = mesh.element_count();
  if (static_cast<int>(lc.size()) != K || static_cast<int>(dku.size()) != K)
    throw InvalidArgument("constants and d^u required for every element");
  const DirichletSolver dir(ops);
  const double theta = std::abs(pb.theta());
  const double patch = 2.0 * mesh.dim() + 1.0;
  std::vector<ElementEstimate> out(K);
  for (int e = 0; e < K; ++e) {
    ElementEstimate& est = out[e];
    const LocalConstants& c = lc[e];
    const double gamma = pb.gamma()[e];
    est.element = e;
    est.dku = dku[e];
    est.dku_mode = mode;
    est.c = dku[e] + c.d * theta;

    const Eigen::VectorXd R = residual_field(pb, uN, e);
    est.eta_r = c.a * std::sqrt(ops.form(FormKind::l2, R, R));

    double gj2 = 0.0, j2 = 0.0;
    double dmax = dku[e];
    for (int face = 0; face < mesh.faces_per_element(); ++face) {
      const FaceTrace t = face_trace(mesh, ops, uN, e, face);
      gj2 += face_norm2(t.weights, t.grad_jump());
      j2 += face_norm2(t.weights, t.jump());
      dmax = std::max(dmax, dku[t.neighbor]);
    }
    est.jump_norm2 = j2;
    est.eta_f = 0.5 * c.b * std::sqrt(gj2);
    est.eta_j = (c.b * gamma + 0.5 * est.c) * std::sqrt(j2);

    const BubbleResult br = bubble_phi(ops, dir, pb.v_nodal(e), R, c.a);
    est.sigma = br.sigma;
    est.sigma_degenerate = br.degenerate;
    if (!br.degenerate) {
      const Eigen::VectorXd w = br.g.cwiseProduct(R) - br.phi;
      est.c_r = br.sigma * std::sqrt(ops.form(FormKind::grad, w, w));
    }
    est.c_f = c.b * std::sqrt(0.5 * patch) * dmax;
    est.c_j = std::sqrt(2.0 / gamma) * (c.b * gamma + 0.5 * est.c);

    // Channels with a vanishing denominator are left out of both forms.
    double num = 0.0, den = 0.0;
    const double etas[3] = {est.eta_r, est.eta_f, est.eta_j};
    const double cs[3] = {est.c_r, est.c_f, est.c_j};
    for (int k = 0; k < 3; ++k) {
      if (!(cs[k] > 0.0) || !std::isfinite(cs[k])) {
        ++est.excluded_channels;
        continue;
      }
      num += etas[k];
      den += cs[k];
      est.xi_max = std::max(est.xi_max, etas[k] / cs[k]);
    }
    est.xi = den > 0.0 ? num / den : 0.0;
  }
  return out;
}

/// eta = (sum_kappa (eta_R + eta_F + eta_J)^2)^{1/2}
inline double upper_bound(const std::vector<ElementEstimate>& est) {
  double s = 0.0;
  for (const auto& e : est) s += e.eta_sum() * e.eta_sum();
  return std::sqrt(s);
}

/// Global lower bound with b_omega^2 = max over faces of (b_kappa^2 + b_kappa'^2)/2.
inline double lower_bound(const Mesh& mesh, const std::vector<ElementEstimate>& est,
                          const std::vector<LocalConstants>& lc) {
  double den = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    double bw2 = 0.0;
    for (int face = 0; face < mesh.faces_per_element(); ++face) {
      const int nb = mesh.neighbor(e, face).element;
      bw2 = std::max(bw2, 0.5 * (lc[e].b * lc[e].b + lc[nb].b * lc[nb].b));
    }
    const double cr = std::isfinite(est[e].c_r) ? est[e].c_r : 0.0;
    den = std::max(den, cr * cr + bw2 * est[e].dku * est[e].dku + est[e].c_j * est[e].c_j);
  }
  if (!(den > 0.0)) return 0.0;
  return upper_bound(est) / (std::sqrt(3.0) * std::sqrt(den));
}

/// d^u per element: d_kappa, or the reference-based value (degenerate
/// elements fall back to d_kappa).
inline std::vector<double> dku_values(const DgProblem& pb, const NodalField& uN, const std::vector<LocalConstants>& lc,
                                      DkuMode mode, const NodalField* u) {
  std::vector<double> out;
  for (int e = 0; e < pb.mesh().element_count(); ++e) {
    if (mode == DkuMode::exact_reference) {
      if (u == nullptr) throw InvalidArgument("exact d^u mode needs a reference solution");
      const DkuResult r = dku_exact(pb.ops(), (*u)[e], uN[e]);
      out.push_back(r.degenerate ? lc[e].d : r.value);
    } else {
      out.push_back(lc[e].d);
    }
  }
  return out;
}

/// Full estimate; when a restricted reference `u` is given the true error,
/// effectivities and the indefinite extra term are filled in.
inline GlobalEstimate estimate(const DgProblem& pb, const NodalField& uN, const std::vector<LocalConstants>& lc,
                               DkuMode mode = DkuMode::approx_dk, const NodalField* u = nullptr) {
  GlobalEstimate g;
  const std::vector<double> dku = dku_values(pb, uN, lc, mode, u);
  g.elements = element_estimators(pb, uN, lc, dku, mode);
  g.eta = upper_bound(g.elements);
  g.xi = lower_bound(pb.mesh(), g.elements, lc);
  const NormVariant variant = default_variant(pb);
  for (int e = 0; e < pb.mesh().element_count(); ++e) {
    g.jump_energy += 0.5 * pb.gamma()[e] * g.elements[e].jump_norm2;
    g.eta_j2 += g.elements[e].eta_j * g.elements[e].eta_j;
    if (pb.v_nodal(e).minCoeff() < 0.0) g.indefinite = true;
  }
  if (u != nullptr) {
    const EnergyError err = energy_error(pb, uN, *u, variant);
    g.error = err.global;
    double vm = 0.0;
    for (int e = 0; e < pb.mesh().element_count(); ++e) {
      ElementEstimate& est = g.elements[e];
      est.error = err.elements[e];
      est.c_eta = est.eta_sum() / est.error;
      est.c_xi = est.xi / est.error;
      const Eigen::VectorXd diff = (*u)[e] - uN[e];
      vm += pb.ops().weights().dot(negative_part(pb.v_nodal(e)).cwiseProduct(diff.cwiseAbs2()));
    }
    if (g.error > 0.0) g.indefinite_extra = vm / g.error;
  }
  return g;
}

inline void write_estimates_csv(std::ostream& os, const std::vector<ElementEstimate>& est) {
  os << "element,eta_R,eta_F,eta_J,c_R,c_F,c_J,xi,error,C_eta,C_xi\n" << std::setprecision(17);
  for (const auto& e : est)
    os << e.element << ',' << e.eta_r << ',' << e.eta_f << ',' << e.eta_j << ',' << e.c_r << ',' << e.c_f << ','
       << e.c_j << ',' << e.xi << ',' << e.error << ',' << e.c_eta << ',' << e.c_xi << '\n';
}

} // namespace dgpost

#endif

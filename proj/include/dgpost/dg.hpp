#ifndef DGPOST_DG_HPP
#define DGPOST_DG_HPP

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "mesh.hpp"
#include "tensor_ops.hpp"

namespace dgpost {

/// Per-element nodal values on the LGL grids.
using NodalField = std::vector<Eigen::VectorXd>;

/// Interior-penalty DG problem -Lap u + V u = f on a periodic mesh. Nodal
/// samples of V and f are taken once at construction.
class DgProblem {
public:
  DgProblem(const Mesh& mesh, const TensorOperators& ops, std::vector<BasisSpace> spaces, FieldSpec V,
            FieldSpec f, double theta, std::vector<double> gamma)
      : mesh_(&mesh), ops_(&ops), spaces_(std::move(spaces)), V_(std::move(V)), f_(std::move(f)),
        theta_(theta), gamma_(std::move(gamma)) {
    const int K = mesh.element_count();
    if (static_cast<int>(spaces_.size()) != K) throw InvalidArgument("one basis space per element required");
    if (static_cast<int>(gamma_.size()) != K) throw InvalidArgument("one penalty per element required");
    if (mesh.dim() != ops.dim()) throw InvalidArgument("mesh and operator dimensions differ");
    if (std::abs(mesh.h() - ops.h()) > 1e-12 * mesh.h()) throw InvalidArgument("operator h differs from mesh h");
    if (theta != 1.0 && theta != -1.0) throw InvalidArgument("theta must be 1 or -1");
    offsets_.assign(K + 1, 0);
    for (int e = 0; e < K; ++e) {
      if (!(gamma_[e] > 0.0)) throw InvalidArgument("penalty must be positive on every element");
      if (spaces_[e].phi.rows() != ops.size()) throw InvalidArgument("basis table rows differ from n_g^d");
      offsets_[e + 1] = offsets_[e] + spaces_[e].size();
      const auto org = mesh.origin(e);
      const Eigen::MatrixXd X = element_points(ops, org.data());
      vnodal_.push_back(V_.evaluate(X));
      fnodal_.push_back(f_.evaluate(X));
    }
  }

  const Mesh& mesh() const { return *mesh_; }
  const TensorOperators& ops() const { return *ops_; }
  const std::vector<BasisSpace>& spaces() const { return spaces_; }
  const FieldSpec& potential() const { return V_; }
  const FieldSpec& source() const { return f_; }
  double theta() const { return theta_; }
  const std::vector<double>& gamma() const { return gamma_; }
  const Eigen::VectorXd& v_nodal(int e) const { return vnodal_[e]; }
  const Eigen::VectorXd& f_nodal(int e) const { return fnodal_[e]; }
  Eigen::Index offset(int e) const { return offsets_[e]; }
  Eigen::Index dofs() const { return offsets_.back(); }

private:
  const Mesh* mesh_;
  const TensorOperators* ops_;
  std::vector<BasisSpace> spaces_;
  FieldSpec V_;
  FieldSpec f_;
  double theta_;
  std::vector<double> gamma_;
  std::vector<Eigen::Index> offsets_;
  NodalField vnodal_;
  NodalField fnodal_;
};

/// Outward normal sign of face (axis, side): -1 on the low side, +1 on the high side.
inline double normal_sign(int face) { return face_side(face) == 0 ? -1.0 : 1.0; }

/// Rows of `table` at the nodes of `face`.
inline Eigen::MatrixXd face_rows(const TensorOperators& ops, int face, const Eigen::MatrixXd& table) {
  const auto idx = ops.face_nodes(face_axis(face), face_side(face));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = table.row(idx[k]);
  return out;
}

/// Outward normal derivative of each column of `table` at the nodes of `face`.
inline Eigen::MatrixXd face_normal_derivative(const TensorOperators& ops, int face, const Eigen::MatrixXd& table) {
  Eigen::MatrixXd d(table.rows(), table.cols());
  for (Eigen::Index c = 0; c < table.cols(); ++c)
    d.col(c) = ops.diff(face_axis(face), Eigen::VectorXd(table.col(c)));
  return normal_sign(face) * face_rows(ops, face, d);
}

/// Traces of a broken nodal field on one face of one element.
struct FaceTrace {
  int element = 0;
  int face = 0;
  int neighbor = 0;
  int neighbor_face = 0;
  Eigen::VectorXd weights;      // (d-1)-dim quadrature weights
  Eigen::VectorXd value_in;     // v_kappa
  Eigen::VectorXd value_out;    // v_kappa'
  Eigen::VectorXd dn_in;        // grad v_kappa . n_kappa
  Eigen::VectorXd dn_out;       // grad v_kappa' . n_kappa'

  /// [[v]] . n_kappa
  Eigen::VectorXd jump() const { return value_in - value_out; }
  /// [[grad v]] = grad v_kappa . n_kappa + grad v_kappa' . n_kappa'
  Eigen::VectorXd grad_jump() const { return dn_in + dn_out; }
  Eigen::VectorXd average() const { return 0.5 * (value_in + value_out); }
  /// {grad v} . n_kappa
  Eigen::VectorXd grad_average() const { return 0.5 * (dn_in - dn_out); }
};

inline FaceTrace face_trace(const Mesh& mesh, const TensorOperators& ops, const NodalField& v, int e, int face) {
  const FaceLink nb = mesh.neighbor(e, face);
  FaceTrace t;
  t.element = e;
  t.face = face;
  t.neighbor = nb.element;
  t.neighbor_face = nb.face;
  t.weights = ops.face_weights(face_axis(face));
  t.value_in = face_rows(ops, face, v[e]);
  t.value_out = face_rows(ops, nb.face, v[nb.element]);
  t.dn_in = face_normal_derivative(ops, face, v[e]);
  t.dn_out = face_normal_derivative(ops, nb.face, v[nb.element]);
  return t;
}

/// Squared weighted face norm.
inline double face_norm2(const Eigen::VectorXd& w, const Eigen::VectorXd& x) { return w.dot(x.cwiseAbs2()); }

struct DgSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

/// Dense assembly of a(phi_j, phi_i) in the element-boundary form and of (f, phi_i).
inline DgSystem assemble(const DgProblem& pb) {
  const Mesh& mesh = pb.mesh();
  const TensorOperators& ops = pb.ops();
  const int K = mesh.element_count();
  DgSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(pb.dofs(), pb.dofs());
  sys.rhs = Eigen::VectorXd::Zero(pb.dofs());
  const double theta = pb.theta();

  for (int e = 0; e < K; ++e) {
    const Eigen::MatrixXd& phi = pb.spaces()[e].phi;
    const Eigen::Index oe = pb.offset(e), ne = phi.cols();
    Eigen::MatrixXd vol = ops.apply(FormKind::grad, phi);
    vol += ops.weights().cwiseProduct(pb.v_nodal(e)).asDiagonal() * phi;
    sys.matrix.block(oe, oe, ne, ne) += phi.transpose() * vol;
    sys.rhs.segment(oe, ne) = phi.transpose() * ops.weights().cwiseProduct(pb.f_nodal(e));

    const double g = pb.gamma()[e];
    for (int face = 0; face < mesh.faces_per_element(); ++face) {
      const FaceLink nb = mesh.neighbor(e, face);
      const Eigen::MatrixXd& phn = pb.spaces()[nb.element].phi;
      const Eigen::Index on = pb.offset(nb.element), nn = phn.cols();
      const Eigen::VectorXd w = ops.face_weights(face_axis(face));
      const Eigen::MatrixXd Tin = face_rows(ops, face, phi);
      const Eigen::MatrixXd Dn = face_normal_derivative(ops, face, phi);
      const Eigen::MatrixXd Tout = face_rows(ops, nb.face, phn);
      const Eigen::MatrixXd WTin = w.asDiagonal() * Tin;
      const Eigen::MatrixXd WTout = w.asDiagonal() * Tout;
      const Eigen::MatrixXd WDn = w.asDiagonal() * Dn;

      // -1/2 (grad w . n, v_in - v_out)
      sys.matrix.block(oe, oe, ne, ne) -= 0.5 * Tin.transpose() * WDn;
      sys.matrix.block(on, oe, nn, ne) += 0.5 * Tout.transpose() * WDn;
      // -theta/2 (w_in - w_out, grad v . n)
      sys.matrix.block(oe, oe, ne, ne) -= 0.5 * theta * Dn.transpose() * WTin;
      sys.matrix.block(oe, on, ne, nn) += 0.5 * theta * Dn.transpose() * WTout;
      // gamma/2 (w_in - w_out, v_in - v_out)
      sys.matrix.block(oe, oe, ne, ne) += 0.5 * g * Tin.transpose() * WTin;
      sys.matrix.block(oe, on, ne, nn) -= 0.5 * g * Tin.transpose() * WTout;
      sys.matrix.block(on, oe, nn, ne) -= 0.5 * g * Tout.transpose() * WTin;
      sys.matrix.block(on, on, nn, nn) += 0.5 * g * Tout.transpose() * WTout;
    }
  }
  return sys;
}

struct DgSolution {
  std::vector<Eigen::VectorXd> coefficients;
  NodalField values;
  double residual = 0.0;
  double rcond = 0.0;
};

/// Nodal values Phi_kappa c_kappa of a global coefficient vector.
inline NodalField nodal_values(const DgProblem& pb, const Eigen::VectorXd& c) {
  NodalField out;
  for (int e = 0; e < pb.mesh().element_count(); ++e)
    out.push_back(pb.spaces()[e].phi * c.segment(pb.offset(e), pb.spaces()[e].size()));
  return out;
}

/// Dense LU solve; throws NumericFailure with the reciprocal condition estimate
/// when the system is numerically singular.
inline DgSolution solve(const DgProblem& pb, const DgSystem& sys) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.matrix);
  DgSolution sol;
  sol.rcond = lu.rcond();
  if (!(sol.rcond > 1e-14))
    throw NumericFailure("DG system numerically singular (rcond " + std::to_string(sol.rcond) + ")");
  const Eigen::VectorXd c = lu.solve(sys.rhs);
  sol.residual = (sys.matrix * c - sys.rhs).norm() / std::max(sys.rhs.norm(), 1e-300);
  for (int e = 0; e < pb.mesh().element_count(); ++e)
    sol.coefficients.push_back(c.segment(pb.offset(e), pb.spaces()[e].size()));
  sol.values = nodal_values(pb, c);
  return sol;
}

inline DgSolution solve(const DgProblem& pb) { return solve(pb, assemble(pb)); }

enum class NormVariant { poisson, indefinite };

/// |||v|||_kappa^2 = ||grad v||^2 (+ ||V+^{1/2} v||^2) + gamma/2 ||[[v]]||^2_{d kappa}, per element.
inline Eigen::VectorXd energy_norm2_elements(const Mesh& mesh, const TensorOperators& ops,
                                             const std::vector<double>& gamma, const NodalField& vplus,
                                             const NodalField& v, NormVariant variant) {
  const int K = mesh.element_count();
  Eigen::VectorXd out(K);
  for (int e = 0; e < K; ++e) {
    double s = ops.form(FormKind::grad, v[e], v[e]);
    if (variant == NormVariant::indefinite)
      s += ops.weights().dot(vplus[e].cwiseProduct(v[e].cwiseAbs2()));
    for (int face = 0; face < mesh.faces_per_element(); ++face) {
      const FaceLink nb = mesh.neighbor(e, face);
      const Eigen::VectorXd jump = face_rows(ops, face, v[e]) - face_rows(ops, nb.face, v[nb.element]);
      s += 0.5 * gamma[e] * face_norm2(ops.face_weights(face_axis(face)), jump);
    }
    out[e] = s;
  }
  return out;
}

/// V+ nodal values per element.
inline NodalField positive_potential(const DgProblem& pb) {
  NodalField out;
  for (int e = 0; e < pb.mesh().element_count(); ++e) out.push_back(positive_part(pb.v_nodal(e)));
  return out;
}

inline double energy_norm(const DgProblem& pb, const NodalField& v, NormVariant variant) {
  return std::sqrt(
      energy_norm2_elements(pb.mesh(), pb.ops(), pb.gamma(), positive_potential(pb), v, variant).sum());
}

/// Element-wise and global broken-norm error of u - u_N.
struct EnergyError {
  Eigen::VectorXd elements;  // |||u - u_N|||_kappa
  double global = 0.0;
};

inline EnergyError energy_error(const DgProblem& pb, const NodalField& uN, const NodalField& u,
                                NormVariant variant) {
  NodalField diff;
  for (std::size_t e = 0; e < uN.size(); ++e) diff.push_back(u[e] - uN[e]);
  const Eigen::VectorXd n2 =
      energy_norm2_elements(pb.mesh(), pb.ops(), pb.gamma(), positive_potential(pb), diff, variant);
  EnergyError out;
  out.elements = n2.cwiseSqrt();
  out.global = std::sqrt(n2.sum());
  return out;
}

/// Default norm for a problem: the modified norm with V+ whenever V is not zero.
inline NormVariant default_variant(const DgProblem& pb) {
  if (pb.potential().is_constant() && pb.potential().constant_value() == 0.0) return NormVariant::poisson;
  return NormVariant::indefinite;
}

/// Per-element CSV: element, i0[, i1[, i2]], x0[, x1[, x2]], value.
inline void write_field_csv(std::ostream& os, const Mesh& mesh, const TensorOperators& ops, const NodalField& v) {
  const int d = mesh.dim();
  os << "element";
  for (int l = 0; l < d; ++l) os << ",i" << l;
  for (int l = 0; l < d; ++l) os << ",x" << l;
  os << ",value\n" << std::setprecision(17);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto org = mesh.origin(e);
    for (Eigen::Index I = 0; I < ops.size(); ++I) {
      os << e;
      for (int l = 0; l < d; ++l) os << ',' << ops.index_along(I, l);
      for (int l = 0; l < d; ++l) os << ',' << org[l] + ops.coordinate(I, l);
      os << ',' << v[e][I] << '\n';
    }
  }
}

} // namespace dgpost

#endif

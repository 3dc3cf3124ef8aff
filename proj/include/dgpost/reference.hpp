#ifndef DGPOST_REFERENCE_HPP
#define DGPOST_REFERENCE_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/IterativeSolvers>

#include "dg.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "fourier.hpp"
#include "mesh.hpp"
#include "tensor_ops.hpp"

namespace dgpost {

/// -Lap + V applied to samples on a uniform periodic grid through the
/// trigonometric interpolant.
class PeriodicOperator {
public:
  PeriodicOperator(int n, int dim, double period, Eigen::VectorXd vgrid)
      : n_(n), dim_(dim), c1_(spectral_laplacian(n, period)), v_(std::move(vgrid)) {
    size_ = 1;
    for (int l = 0; l < dim; ++l) size_ *= n;
    if (v_.size() != size_) throw InvalidArgument("potential samples do not match grid size");
  }
  Eigen::Index size() const { return size_; }
  int dim() const { return dim_; }
  int points() const { return n_; }
  const Eigen::MatrixXd& laplacian_1d() const { return c1_; }
  const Eigen::VectorXd& potential() const { return v_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = v_.cwiseProduct(u);
    for (int l = 0; l < dim_; ++l) out += apply_along_axis(c1_, l, dim_, u);
    return out;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(size_, size_);
    for (Eigen::Index j = 0; j < size_; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(size_);
      e[j] = 1.0;
      H.col(j) = apply(e);
    }
    return 0.5 * (H + H.transpose());
  }

private:
  int n_;
  int dim_;
  Eigen::Index size_ = 0;
  Eigen::MatrixXd c1_;
  Eigen::VectorXd v_;
};

namespace detail {

// Matrix-free wrapper so Eigen's GMRES can drive PeriodicOperator.
class OperatorRef;

} // namespace detail
} // namespace dgpost

namespace Eigen::internal {
template <>
struct traits<dgpost::detail::OperatorRef> : public traits<Eigen::SparseMatrix<double>> {};
} // namespace Eigen::internal

namespace dgpost::detail {

class OperatorRef : public Eigen::EigenBase<OperatorRef> {
public:
  using Scalar = double;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  explicit OperatorRef(const PeriodicOperator& op) : op_(&op) {}
  Eigen::Index rows() const { return op_->size(); }
  Eigen::Index cols() const { return op_->size(); }

  template <typename Rhs>
  Eigen::Product<OperatorRef, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<OperatorRef, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }
  const PeriodicOperator& op() const { return *op_; }

private:
  const PeriodicOperator* op_;
};

// (-Lap + s)^{-1} by diagonalizing the 1D spectral Laplacian along every axis.
class ShiftedLaplacianPreconditioner {
public:
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

  ShiftedLaplacianPreconditioner() = default;
  template <typename M>
  explicit ShiftedLaplacianPreconditioner(const M& m) { compute(m); }

  template <typename M>
  ShiftedLaplacianPreconditioner& analyzePattern(const M&) { return *this; }
  template <typename M>
  ShiftedLaplacianPreconditioner& factorize(const M&) { return *this; }
  template <typename M>
  ShiftedLaplacianPreconditioner& compute(const M& m) {
    const PeriodicOperator& op = m.op();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.laplacian_1d());
    U_ = es.eigenvectors();
    dim_ = op.dim();
    const int n = op.points();
    // Shift by the mean of |V| plus one so the preconditioner stays definite
    // for indefinite problems.
    const double shift = op.potential().cwiseAbs().mean() + 1.0;
    inv_.resize(op.size());
    for (Eigen::Index I = 0; I < op.size(); ++I) {
      double s = shift;
      Eigen::Index r = I;
      for (int l = 0; l < dim_; ++l) {
        s += es.eigenvalues()[r % n];
        r /= n;
      }
      inv_[I] = 1.0 / s;
    }
    return *this;
  }

  template <typename Rhs>
  Eigen::VectorXd solve(const Eigen::MatrixBase<Rhs>& b) const {
    std::vector<Eigen::MatrixXd> ut(dim_, U_.transpose()), u(dim_, U_);
    Eigen::VectorXd c = apply_tensor(ut, Eigen::VectorXd(b));
    return apply_tensor(u, Eigen::VectorXd(c.cwiseProduct(inv_)));
  }
  Eigen::ComputationInfo info() const { return Eigen::Success; }

private:
  Eigen::MatrixXd U_;
  Eigen::VectorXd inv_;
  int dim_ = 1;
};

} // namespace dgpost::detail

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<dgpost::detail::OperatorRef, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<dgpost::detail::OperatorRef, Rhs,
                                generic_product_impl<dgpost::detail::OperatorRef, Rhs>> {
  using Scalar = typename Product<dgpost::detail::OperatorRef, Rhs>::Scalar;
  template <typename Dest>
  static void scaleAndAddTo(Dest& dst, const dgpost::detail::OperatorRef& lhs, const Rhs& rhs,
                            const Scalar& alpha) {
    dst.noalias() += alpha * lhs.op().apply(Eigen::VectorXd(rhs));
  }
};
} // namespace Eigen::internal

namespace dgpost {

/// Periodic reference solution sampled on a uniform n^d grid over [0,L)^d.
struct ReferenceSolution {
  int n = 0;
  int dim = 1;
  double length = 0.0;
  Eigen::VectorXd values;
  double residual = 0.0;    // ||H u - f|| / ||f||
  std::string method;
};

inline constexpr Eigen::Index reference_dense_limit = 4096;

inline int default_reference_points(int dim) { return dim == 1 ? 256 : 96; }

/// Planewave solve of -Lap u + V u = f. Constant V divides Fourier
/// coefficients; otherwise the grid operator is solved densely (n^d <= 4096)
/// or by preconditioned GMRES.
inline ReferenceSolution solve_reference(const FieldSpec& V, const FieldSpec& f, double L, int dim, int n) {
  if (n < 2) throw InvalidArgument("reference grid needs at least 2 points per axis");
  const Eigen::MatrixXd X = uniform_grid(n, dim, std::vector<double>(dim, 0.0), L);
  const Eigen::VectorXd fg = f.evaluate(X);
  ReferenceSolution ref;
  ref.n = n;
  ref.dim = dim;
  ref.length = L;
  const double fnorm = std::max(fg.norm(), 1e-300);

  if (V.is_constant()) {
    const double v0 = V.constant_value();
    Eigen::VectorXcd c = dft_coefficients(fg, n, dim);
    const double omega = 2.0 * std::numbers::pi / L;
    const double cmax = c.cwiseAbs().maxCoeff();
    for (Eigen::Index I = 0; I < c.size(); ++I) {
      double k2 = 0.0;
      Eigen::Index r = I;
      for (int l = 0; l < dim; ++l) {
        const double k = omega * wavenumber_index(static_cast<int>(r % n), n);
        k2 += k * k;
        r /= n;
      }
      const double den = k2 + v0;
      if (std::abs(den) <= 1e-12 * std::max(1.0, std::abs(v0))) {
        if (std::abs(c[I]) <= 1e-13 * std::max(cmax, 1e-300)) {
          c[I] = 0.0;
          continue;
        }
        throw ResonanceError("constant potential resonates with a Fourier mode of the source");
      }
      c[I] /= den;
    }
    ref.values = inverse_dft(c, n, dim);
    ref.method = "fourier_diagonal";
  } else {
    PeriodicOperator op(n, dim, L, V.evaluate(X));
    if (op.size() <= reference_dense_limit) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(op.dense());
      if (!(lu.rcond() > 1e-14)) throw ResonanceError("reference operator is numerically singular");
      ref.values = lu.solve(fg);
      ref.method = "dense_lu";
    } else {
      detail::OperatorRef A(op);
      Eigen::GMRES<detail::OperatorRef, detail::ShiftedLaplacianPreconditioner> gmres;
      gmres.setTolerance(1e-13);
      gmres.setMaxIterations(2000);
      gmres.set_restart(200);
      gmres.compute(A);
      ref.values = gmres.solve(fg);
      ref.method = "gmres";
    }
    ref.residual = (op.apply(ref.values) - fg).norm() / fnorm;
    if (!(ref.residual <= 1e-10))
      throw NumericFailure("reference solve residual " + std::to_string(ref.residual) + " above 1e-10");
    return ref;
  }
  PeriodicOperator op(n, dim, L, V.evaluate(X));
  ref.residual = (op.apply(ref.values) - fg).norm() / fnorm;
  return ref;
}

/// Trigonometric interpolation of the reference onto every element's LGL grid.
inline NodalField restrict_to_mesh(const ReferenceSolution& ref, const Mesh& mesh, const TensorOperators& ops) {
  if (mesh.dim() != ref.dim) throw InvalidArgument("reference and mesh dimensions differ");
  const int d = mesh.dim();
  NodalField out;
  // The 1D interpolation matrices depend only on the element index along each axis.
  std::vector<Eigen::MatrixXd> per_axis;
  for (int j = 0; j < mesh.elements_per_axis(); ++j) {
    const Eigen::VectorXd t = ops.rule().nodes.array() + j * mesh.h();
    per_axis.push_back(interpolation_matrix(ref.n, 0.0, ref.length, t));
  }
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto idx = mesh.multi_index(e);
    std::vector<Eigen::MatrixXd> factors;
    for (int l = 0; l < d; ++l) factors.push_back(per_axis[idx[l]]);
    out.push_back(apply_tensor(factors, ref.values));
  }
  return out;
}

struct DkuResult {
  double value = 0.0;
  bool degenerate = false;
};

/// d^u_kappa(u_N) = ||grad(u - u_N) . n||_{d kappa} / ||grad(u - u_N)||_kappa.
inline DkuResult dku_exact(const TensorOperators& ops, const Eigen::VectorXd& u, const Eigen::VectorXd& uN) {
  const Eigen::VectorXd e = u - uN;
  const double num = ops.form(FormKind::bnd_grad, e, e);
  const double den = ops.form(FormKind::grad, e, e);
  const double scale = std::max(ops.form(FormKind::grad, u, u), 1e-300);
  DkuResult r;
  if (!(den > 1e-28 * scale)) {
    r.degenerate = true;
    return r;
  }
  r.value = std::sqrt(std::max(num, 0.0) / den);
  return r;
}

/// Number of negative eigenvalues of the periodic operator -Lap + V truncated
/// to n points per axis. Constant V counts lattice modes exactly.
inline int count_negative_eigenvalues(const FieldSpec& V, double L, int dim, int n) {
  const double omega = 2.0 * std::numbers::pi / L;
  if (V.is_constant()) {
    Eigen::Index total = 1;
    for (int l = 0; l < dim; ++l) total *= n;
    int count = 0;
    for (Eigen::Index I = 0; I < total; ++I) {
      double k2 = 0.0;
      Eigen::Index r = I;
      for (int l = 0; l < dim; ++l) {
        const double k = omega * wavenumber_index(static_cast<int>(r % n), n);
        k2 += k * k;
        r /= n;
      }
      if (k2 + V.constant_value() < 0.0) ++count;
    }
    return count;
  }
  const Eigen::MatrixXd X = uniform_grid(n, dim, std::vector<double>(dim, 0.0), L);
  PeriodicOperator op(n, dim, L, V.evaluate(X));
  if (op.size() > reference_dense_limit) throw ResourceError("eigenvalue count limited to n^d <= 4096");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericFailure("reference eigensolver failed");
  int count = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] < 0.0) ++count;
  return count;
}

} // namespace dgpost

#endif

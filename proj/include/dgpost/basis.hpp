#ifndef DGPOST_BASIS_HPP
#define DGPOST_BASIS_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "field.hpp"
#include "fourier.hpp"
#include "mesh.hpp"
#include "tensor_ops.hpp"

namespace dgpost {

enum class BasisKind { polynomial, alb, custom };

inline const char* to_string(BasisKind k) {
  switch (k) {
    case BasisKind::polynomial: return "polynomial";
    case BasisKind::alb: return "alb";
    case BasisKind::custom: return "custom";
  }
  return "?";
}

/// Nodal value table Phi (n_g^d x N) of a local approximation space, with
/// columns orthonormal in the discrete L2(kappa) product.
struct BasisSpace {
  int element = 0;
  BasisKind kind = BasisKind::custom;
  int parameter = 0;        // p for polynomial spaces, requested N for ALB
  Eigen::MatrixXd phi;
  int dropped = 0;          // directions removed as numerically dependent
  bool constant_appended = false;

  int size() const { return static_cast<int>(phi.cols()); }
};

inline constexpr double default_drop_tol = 1e-8;

/// Orthonormalize in discrete L2(kappa) by an SVD of W^{1/2} Phi_raw, dropping
/// singular directions below drop_tol * sigma_max.
inline BasisSpace orthonormalize(const Eigen::MatrixXd& raw, const TensorOperators& ops,
                                 double drop_tol = default_drop_tol) {
  if (raw.cols() == 0) throw InvalidArgument("orthonormalize: empty table");
  if (raw.rows() != ops.size()) throw InvalidArgument("orthonormalize: row count differs from n_g^d");
  const Eigen::VectorXd sw = ops.weights().cwiseSqrt();
  Eigen::MatrixXd B = sw.asDiagonal() * raw;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) throw NumericFailure("orthonormalize: all columns dropped");
  Eigen::Index keep = 0;
  while (keep < s.size() && s[keep] > drop_tol * s[0]) ++keep;
  BasisSpace out;
  out.phi = sw.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(keep);
  out.dropped = static_cast<int>(raw.cols() - keep);
  return out;
}

/// Relative discrete-L2 residual of projecting the constant 1 onto span(Phi)
/// (Phi assumed L2-orthonormal).
inline double constant_residual(const BasisSpace& space, const TensorOperators& ops) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(ops.size());
  const Eigen::VectorXd coef = space.phi.transpose() * ops.weights().cwiseProduct(one);
  const Eigen::VectorXd r = one - space.phi * coef;
  return std::sqrt(ops.form(FormKind::l2, r, r) / ops.volume());
}

/// Append the constant function and re-orthonormalize when it is not already
/// represented.
inline void ensure_constant(BasisSpace& space, const TensorOperators& ops, double drop_tol,
                            double tol = 1e-10) {
  if (constant_residual(space, ops) <= tol) return;
  Eigen::MatrixXd raw(space.phi.rows(), space.phi.cols() + 1);
  raw.col(0).setOnes();
  raw.rightCols(space.phi.cols()) = space.phi;
  BasisSpace redone = orthonormalize(raw, ops, drop_tol);
  space.phi = std::move(redone.phi);
  space.dropped += redone.dropped;
  space.constant_appended = true;
}

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Total-degree polynomial space { prod_l x_l^{j_l} : sum j_l <= p } on the
/// element. Sampled through Legendre products in the scaled coordinate
/// 2x/h - 1 (same span as the monomials, far better conditioned).
inline BasisSpace polynomial_space(const TensorOperators& ops, int element, int p,
                                   double drop_tol = default_drop_tol) {
  if (p < 0) throw InvalidArgument("polynomial degree must be nonnegative");
  const int d = ops.dim();
  const std::int64_t N = binomial(p + d, d);
  if (N > ops.size()) throw InvalidArgument("polynomial space dimension exceeds n_g^d");
  if (p >= ops.points_1d()) throw InvalidArgument("polynomial degree must be below n_g");
  const int n = ops.points_1d();
  // Legendre values per 1D node and degree.
  Eigen::MatrixXd leg(n, p + 1);
  for (int j = 0; j < n; ++j) {
    const double xi = 2.0 * ops.rule().nodes[j] / ops.h() - 1.0;
    double p0 = 1.0, p1 = xi;
    leg(j, 0) = 1.0;
    if (p >= 1) leg(j, 1) = xi;
    for (int k = 2; k <= p; ++k) {
      const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
      leg(j, k) = p2;
    }
  }
  std::vector<std::array<int, 3>> degrees;
  for (int a = 0; a <= p; ++a)
    for (int b = 0; b <= (d >= 2 ? p - a : 0); ++b)
      for (int c = 0; c <= (d >= 3 ? p - a - b : 0); ++c) degrees.push_back({a, b, c});
  Eigen::MatrixXd raw(ops.size(), static_cast<Eigen::Index>(degrees.size()));
  for (std::size_t col = 0; col < degrees.size(); ++col)
    for (Eigen::Index I = 0; I < ops.size(); ++I) {
      double v = 1.0;
      for (int l = 0; l < d; ++l) v *= leg(ops.index_along(I, l), degrees[col][l]);
      raw(I, static_cast<Eigen::Index>(col)) = v;
    }
  BasisSpace out = orthonormalize(raw, ops, drop_tol);
  if (out.size() != N) throw NumericFailure("polynomial space lost rank during orthonormalization");
  out.element = element;
  out.kind = BasisKind::polynomial;
  out.parameter = p;
  return out;
}

/// Constants only (N = 1).
inline BasisSpace constant_space(const TensorOperators& ops, int element) {
  return polynomial_space(ops, element, 0);
}

/// Options for adaptive local basis generation.
struct AlbOptions {
  int planewaves = 0;                 // per axis; 0 -> 48 (1D) or 32 (2D, 3D)
  double drop_tol = default_drop_tol;
  double cluster_tol = 1e-8;          // relative gap treated as degenerate
};

inline int default_planewaves(int dim) { return dim == 1 ? 48 : 32; }

/// Low eigenpairs of -Lap + V on the extended element (the element and its
/// 3^d - 1 periodic neighbors) with periodic boundary conditions. The operator
/// is assembled densely on the uniform grid of the extended element as the
/// Kronecker sum of spectral second derivatives plus diag(V), which has the same
/// spectrum as the planewave form. Eigenpairs are computed once and restricted
/// to the element on demand by trigonometric interpolation.
class AlbGenerator {
public:
  AlbGenerator(const Mesh& mesh, int element, const PotentialSpec& V, const TensorOperators& ops,
               AlbOptions opt = {})
      : mesh_(mesh), element_(element), ops_(ops), opt_(opt) {
    const int d = mesh.dim();
    if (opt_.planewaves <= 0) opt_.planewaves = default_planewaves(d);
    const int n = opt_.planewaves;
    ext_length_ = 3.0 * mesh.h();
    const auto org = mesh.origin(element);
    ext_origin_.assign(d, 0.0);
    for (int l = 0; l < d; ++l) ext_origin_[l] = org[l] - mesh.h();
    Eigen::Index total = 1;
    for (int l = 0; l < d; ++l) total *= n;
    if (total > 8192) throw ResourceError("extended-element planewave basis too large");

    const Eigen::MatrixXd C1 = spectral_laplacian(n, ext_length_);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total, total);
    for (int l = 0; l < d; ++l) {
      // Kronecker placement of C1 along axis l.
      Eigen::Index inner = 1;
      for (int k = 0; k < l; ++k) inner *= n;
      for (Eigen::Index I = 0; I < total; ++I) {
        const Eigen::Index jl = (I / inner) % n;
        const Eigen::Index base = I - jl * inner;
        for (int m = 0; m < n; ++m) H(I, base + m * inner) += C1(jl, m);
      }
    }
    const Eigen::MatrixXd X = uniform_grid(n, d, ext_origin_, ext_length_);
    H.diagonal() += V.evaluate(X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw NumericFailure("extended-element eigensolver failed");
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
  }

  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& grid_eigenvectors() const { return eigenvectors_; }
  double extended_length() const { return ext_length_; }

  /// Number of eigenpairs taken for a request of N: extends N to the end of a
  /// degenerate cluster straddling the cutoff.
  Eigen::Index cluster_count(int N) const {
    if (N < 1) throw InvalidArgument("ALB size must be >= 1");
    if (N > eigenvalues_.size()) throw InvalidArgument("ALB size exceeds planewave count");
    Eigen::Index k = N;
    const double scale = std::max(1.0, eigenvalues_.cwiseAbs().maxCoeff());
    while (k < eigenvalues_.size() &&
           eigenvalues_[k] - eigenvalues_[N - 1] <= opt_.cluster_tol * scale)
      ++k;
    return k;
  }

  /// Restrict the selected eigenfunctions to the element's LGL grid.
  Eigen::MatrixXd restricted(Eigen::Index count) const {
    const int d = mesh_.dim();
    const auto org = mesh_.origin(element_);
    std::vector<Eigen::VectorXd> targets;
    for (int l = 0; l < d; ++l)
      targets.push_back(ops_.rule().nodes.array() + org[l]);
    std::vector<Eigen::MatrixXd> factors;
    for (int l = 0; l < d; ++l)
      factors.push_back(interpolation_matrix(opt_.planewaves, ext_origin_[l], ext_length_, targets[l]));
    Eigen::MatrixXd raw(ops_.size(), count);
    for (Eigen::Index c = 0; c < count; ++c)
      raw.col(c) = apply_tensor(factors, Eigen::VectorXd(eigenvectors_.col(c)));
    return raw;
  }

  BasisSpace space(int N) const {
    const Eigen::Index count = cluster_count(N);
    BasisSpace out = orthonormalize(restricted(count), ops_, opt_.drop_tol);
    out.element = element_;
    out.kind = BasisKind::alb;
    out.parameter = N;
    ensure_constant(out, ops_, opt_.drop_tol);
    return out;
  }

private:
  const Mesh& mesh_;
  int element_;
  const TensorOperators& ops_;
  AlbOptions opt_;
  double ext_length_ = 0.0;
  std::vector<double> ext_origin_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

inline BasisSpace alb_space(const Mesh& mesh, int element, int N, const PotentialSpec& V,
                            const TensorOperators& ops, AlbOptions opt = {}) {
  return AlbGenerator(mesh, element, V, ops, opt).space(N);
}

/// Star-product projector onto span(Phi): Pi = Phi Psi^T with
/// Psi = K Phi (Phi^T K Phi)^{-1}; Q = I - Pi, Q^T = I - Psi Phi^T.
class Projector {
public:
  Projector(const BasisSpace& space, const TensorOperators& ops) : ops_(&ops), phi_(space.phi) {
    if (phi_.rows() != ops.size()) throw InvalidArgument("projector: basis rows differ from n_g^d");
    kphi_ = ops.apply(FormKind::star, phi_);
    Eigen::MatrixXd G = phi_.transpose() * kphi_;
    G = 0.5 * (G + G.transpose());
    llt_.compute(G);
    if (llt_.info() != Eigen::Success) throw NumericFailure("Phi^T K Phi is not positive definite");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    condition_ = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    psi_ = llt_.solve(kphi_.transpose()).transpose();
  }

  int rank() const { return static_cast<int>(phi_.cols()); }
  double condition_estimate() const { return condition_; }
  bool ill_conditioned() const { return condition_ > 1e12; }
  const Eigen::MatrixXd& phi() const { return phi_; }
  const Eigen::MatrixXd& psi() const { return psi_; }

  Eigen::VectorXd apply_pi(const Eigen::VectorXd& v) const { return phi_ * (psi_.transpose() * v); }
  Eigen::VectorXd apply_q(const Eigen::VectorXd& v) const { return v - apply_pi(v); }
  Eigen::VectorXd apply_qt(const Eigen::VectorXd& v) const { return v - psi_ * (phi_.transpose() * v); }

private:
  const TensorOperators* ops_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd kphi_;
  Eigen::MatrixXd psi_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double condition_ = 1.0;
};

/// Debug dump of basis tables: one line per entry
/// element,N,n_g,row,col,value with Phi in row-major order.
inline void write_basis_csv(std::ostream& os, const std::vector<BasisSpace>& spaces, int n_g) {
  os << "element,N,n_g,row,col,value\n";
  os << std::setprecision(17);
  for (const auto& s : spaces)
    for (Eigen::Index r = 0; r < s.phi.rows(); ++r)
      for (Eigen::Index c = 0; c < s.phi.cols(); ++c)
        os << s.element << ',' << s.size() << ',' << n_g << ',' << r << ',' << c << ',' << s.phi(r, c)
           << '\n';
}

/// Binary dump: per space int32 element, N, n_g, rows; then rows*N doubles row-major.
inline void write_basis_binary(std::ostream& os, const std::vector<BasisSpace>& spaces, int n_g) {
  for (const auto& s : spaces) {
    const std::int32_t hdr[4] = {s.element, s.size(), n_g, static_cast<std::int32_t>(s.phi.rows())};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    for (Eigen::Index r = 0; r < s.phi.rows(); ++r)
      for (Eigen::Index c = 0; c < s.phi.cols(); ++c) {
        const double v = s.phi(r, c);
        os.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
}

} // namespace dgpost

#endif

#ifndef DGPOST_TENSOR_OPS_HPP
#define DGPOST_TENSOR_OPS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lgl.hpp"

namespace dgpost {

/// Which discrete bilinear form on an element.
///   l2       : u^T W v
///   grad     : sum_l (D_l u)^T W (D_l v)
///   star     : grad + (w^T u)(w^T v) / |kappa|
///   bnd      : u^T (sum_l Wt_l) v
///   bnd_grad : sum_l (D_l u)^T Wt_l (D_l v)
enum class FormKind { l2, grad, star, bnd, bnd_grad };

inline constexpr std::size_t default_node_budget = std::size_t{1} << 21;

/// Apply a 1D n x n matrix along `axis` of a tensor vector with n^dim entries
/// (first axis fastest).
inline Eigen::VectorXd apply_along_axis(const Eigen::MatrixXd& A, int axis, int dim,
                                        const Eigen::VectorXd& v) {
  const Eigen::Index n = A.cols();
  const Eigen::Index m = A.rows();
  Eigen::Index inner = 1, outer = 1;
  for (int l = 0; l < axis; ++l) inner *= n;
  for (int l = axis + 1; l < dim; ++l) outer *= n;
  // Outer extent is measured on the input size; the output keeps it.
  Eigen::VectorXd out(inner * m * outer);
  for (Eigen::Index o = 0; o < outer; ++o) {
    Eigen::Map<const Eigen::MatrixXd> in_block(v.data() + o * inner * n, inner, n);
    Eigen::Map<Eigen::MatrixXd> out_block(out.data() + o * inner * m, inner, m);
    out_block.noalias() = in_block * A.transpose();
  }
  return out;
}

/// Apply a different 1D matrix along each axis (rectangular factors allowed,
/// e.g. an interpolation from a source grid to target points).
inline Eigen::VectorXd apply_tensor(const std::vector<Eigen::MatrixXd>& factors,
                                    const Eigen::VectorXd& v) {
  const int dim = static_cast<int>(factors.size());
  Eigen::VectorXd cur = v;
  // Track the per-axis extents as they change from cols to rows.
  std::vector<Eigen::Index> ext(dim);
  for (int l = 0; l < dim; ++l) ext[l] = factors[l].cols();
  for (int l = 0; l < dim; ++l) {
    const auto& A = factors[l];
    Eigen::Index inner = 1, outer = 1;
    for (int k = 0; k < l; ++k) inner *= ext[k];
    for (int k = l + 1; k < dim; ++k) outer *= ext[k];
    const Eigen::Index n = A.cols(), m = A.rows();
    Eigen::VectorXd out(inner * m * outer);
    for (Eigen::Index o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXd> in_block(cur.data() + o * inner * n, inner, n);
      Eigen::Map<Eigen::MatrixXd> out_block(out.data() + o * inner * m, inner, m);
      out_block.noalias() = in_block * A.transpose();
    }
    cur.swap(out);
    ext[l] = m;
  }
  return cur;
}

/// Discrete quadrature, differentiation and boundary operators on [0,h]^d built
/// from a 1D LGL rule. Operators are kept as 1D factors and applied axis-wise.
class TensorOperators {
public:
  TensorOperators(const LglRule& rule, int dim, std::size_t node_budget = default_node_budget)
      : rule_(rule), dim_(dim) {
    if (dim < 1 || dim > 3) throw InvalidArgument("tensor operators need dimension 1, 2 or 3");
    std::size_t total = 1;
    for (int l = 0; l < dim; ++l) total *= static_cast<std::size_t>(rule.points);
    if (total > node_budget)
      throw ResourceError("n_g^d = " + std::to_string(total) + " exceeds node budget " +
                          std::to_string(node_budget));
    size_ = static_cast<Eigen::Index>(total);
    D_ = diff_matrix(rule);
    volume_ = 1.0;
    for (int l = 0; l < dim; ++l) volume_ *= rule.h;

    weights_ = tensor_weights(std::vector<int>{});
    boundary_.resize(dim);
    for (int l = 0; l < dim; ++l) {
      boundary_[l] = Eigen::VectorXd::Zero(size_);
      Eigen::VectorXd wl = tensor_weights(std::vector<int>{l});
      for (Eigen::Index I = 0; I < size_; ++I) {
        const int jl = index_along(I, l);
        if (jl == 0 || jl == rule.points - 1) boundary_[l][I] = wl[I];
      }
    }
    build_star_inverse();
  }

  int dim() const { return dim_; }
  int points_1d() const { return rule_.points; }
  Eigen::Index size() const { return size_; }
  double h() const { return rule_.h; }
  double volume() const { return volume_; }
  const LglRule& rule() const { return rule_; }
  const Eigen::MatrixXd& diff_1d() const { return D_; }
  /// w^[d]
  const Eigen::VectorXd& weights() const { return weights_; }
  /// diagonal of Wt_l^[d]
  const Eigen::VectorXd& boundary_weights(int axis) const { return boundary_[axis]; }

  /// 1D index j_axis of the stacked index I.
  int index_along(Eigen::Index I, int axis) const {
    for (int l = 0; l < axis; ++l) I /= rule_.points;
    return static_cast<int>(I % rule_.points);
  }

  /// Physical coordinate (relative to the element origin) of node I along axis.
  double coordinate(Eigen::Index I, int axis) const { return rule_.nodes[index_along(I, axis)]; }

  Eigen::VectorXd diff(int axis, const Eigen::VectorXd& v) const {
    check(v);
    return apply_along_axis(D_, axis, dim_, v);
  }
  Eigen::VectorXd diff_transpose(int axis, const Eigen::VectorXd& v) const {
    check(v);
    return apply_along_axis(D_.transpose(), axis, dim_, v);
  }
  /// Nodal Laplacian sum_l D_l D_l v.
  Eigen::VectorXd laplacian(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
    for (int l = 0; l < dim_; ++l) out += diff(l, diff(l, v));
    return out;
  }

  /// (1/|kappa|) w^T v
  double mean(const Eigen::VectorXd& v) const {
    check(v);
    return weights_.dot(v) / volume_;
  }

  /// u^T M v for the selected form. Each factor is computed separately and
  /// combined with a weighted elementwise product, so the result is exactly
  /// symmetric in (u, v).
  double form(FormKind kind, const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    check(u);
    check(v);
    switch (kind) {
      case FormKind::l2:
        return weights_.dot(u.cwiseProduct(v));
      case FormKind::grad: {
        double s = 0.0;
        for (int l = 0; l < dim_; ++l) s += weights_.dot(diff(l, u).cwiseProduct(diff(l, v)));
        return s;
      }
      case FormKind::star:
        return form(FormKind::grad, u, v) + weights_.dot(u) * weights_.dot(v) / volume_;
      case FormKind::bnd: {
        double s = 0.0;
        for (int l = 0; l < dim_; ++l) s += boundary_[l].dot(u.cwiseProduct(v));
        return s;
      }
      case FormKind::bnd_grad: {
        double s = 0.0;
        for (int l = 0; l < dim_; ++l) s += boundary_[l].dot(diff(l, u).cwiseProduct(diff(l, v)));
        return s;
      }
    }
    return 0.0;
  }

  /// M v for the selected form.
  Eigen::VectorXd apply(FormKind kind, const Eigen::VectorXd& v) const {
    check(v);
    switch (kind) {
      case FormKind::l2:
        return weights_.cwiseProduct(v);
      case FormKind::grad: {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
        for (int l = 0; l < dim_; ++l)
          out += diff_transpose(l, weights_.cwiseProduct(diff(l, v)));
        return out;
      }
      case FormKind::star:
        return apply(FormKind::grad, v) + weights_ * (weights_.dot(v) / volume_);
      case FormKind::bnd: {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
        for (int l = 0; l < dim_; ++l) out += boundary_[l].cwiseProduct(v);
        return out;
      }
      case FormKind::bnd_grad: {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
        for (int l = 0; l < dim_; ++l)
          out += diff_transpose(l, boundary_[l].cwiseProduct(diff(l, v)));
        return out;
      }
    }
    return {};
  }

  /// Column-wise application to a table of nodal vectors.
  Eigen::MatrixXd apply(FormKind kind, const Eigen::MatrixXd& V) const {
    Eigen::MatrixXd out(V.rows(), V.cols());
    for (Eigen::Index c = 0; c < V.cols(); ++c) out.col(c) = apply(kind, Eigen::VectorXd(V.col(c)));
    return out;
  }

  /// K^{-1} v by fast diagonalization of the 1D pencil (D^T W D, W).
  Eigen::VectorXd apply_star_inverse(const Eigen::VectorXd& v) const {
    check(v);
    std::vector<Eigen::MatrixXd> zt(dim_, Z_.transpose());
    Eigen::VectorXd c = apply_tensor(zt, v);
    c = c.cwiseQuotient(star_spectrum_);
    std::vector<Eigen::MatrixXd> z(dim_, Z_);
    return apply_tensor(z, c);
  }

  /// Dense n_g^d x n_g^d matrix of a form; only for small oracle checks.
  Eigen::MatrixXd dense(FormKind kind, Eigen::Index max_size = 4096) const {
    if (size_ > max_size)
      throw ResourceError("dense operator of size " + std::to_string(size_) + " exceeds limit " +
                          std::to_string(max_size));
    Eigen::MatrixXd M(size_, size_);
    for (Eigen::Index j = 0; j < size_; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(size_);
      e[j] = 1.0;
      M.col(j) = apply(kind, e);
    }
    return 0.5 * (M + M.transpose());
  }

  /// Stacked indices of the nodes on face (axis, side), ordered with the
  /// remaining axes first-fastest, and the matching (d-1)-dim weights.
  std::vector<Eigen::Index> face_nodes(int axis, int side) const {
    std::vector<Eigen::Index> out;
    const int target = side == 0 ? 0 : rule_.points - 1;
    for (Eigen::Index I = 0; I < size_; ++I)
      if (index_along(I, axis) == target) out.push_back(I);
    return out;
  }
  Eigen::VectorXd face_weights(int axis) const {
    Eigen::VectorXd out(size_ / rule_.points);
    Eigen::Index k = 0;
    for (Eigen::Index I = 0; I < size_; ++I) {
      if (index_along(I, axis) != 0) continue;
      double w = 1.0;
      for (int l = 0; l < dim_; ++l)
        if (l != axis) w *= rule_.weights[index_along(I, l)];
      out[k++] = w;
    }
    return out;
  }

private:
  void check(const Eigen::VectorXd& v) const {
    if (v.size() != size_)
      throw InvalidArgument("nodal vector has length " + std::to_string(v.size()) + ", expected " +
                            std::to_string(size_));
  }

  // Tensor product of the 1D weights over every axis not listed in `skip`.
  Eigen::VectorXd tensor_weights(const std::vector<int>& skip) const {
    Eigen::VectorXd out = Eigen::VectorXd::Ones(size_);
    for (Eigen::Index I = 0; I < size_; ++I)
      for (int l = 0; l < dim_; ++l) {
        bool skipped = false;
        for (int s : skip) skipped = skipped || s == l;
        if (!skipped) out[I] *= rule_.weights[index_along(I, l)];
      }
    return out;
  }

  void build_star_inverse() {
    const int n = rule_.points;
    Eigen::MatrixXd S = D_.transpose() * rule_.weights.asDiagonal() * D_;
    S = 0.5 * (S + S.transpose());
    Eigen::MatrixXd W = rule_.weights.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, W);
    if (es.info() != Eigen::Success) throw NumericFailure("fast diagonalization of the 1D stiffness failed");
    Z_ = es.eigenvectors();
    Eigen::VectorXd lam = es.eigenvalues();
    // The first pair is the constant mode; pin it to its exact value.
    Z_.col(0).setConstant(1.0 / std::sqrt(rule_.h));
    lam[0] = 0.0;
    star_spectrum_ = Eigen::VectorXd::Zero(size_);
    for (Eigen::Index I = 0; I < size_; ++I)
      for (int l = 0; l < dim_; ++l) star_spectrum_[I] += lam[index_along(I, l)];
    // w w^T / |kappa| acts as +1 on the all-constant mode in these coordinates.
    star_spectrum_[0] += 1.0;
    (void)n;
  }

  LglRule rule_;
  int dim_;
  Eigen::Index size_ = 0;
  double volume_ = 1.0;
  Eigen::MatrixXd D_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::VectorXd> boundary_;
  Eigen::MatrixXd Z_;
  Eigen::VectorXd star_spectrum_;
};

/// Physical coordinates of every node of an element with lower corner `origin`.
inline Eigen::MatrixXd element_points(const TensorOperators& ops, const double* origin) {
  Eigen::MatrixXd X(ops.dim(), ops.size());
  for (Eigen::Index I = 0; I < ops.size(); ++I)
    for (int l = 0; l < ops.dim(); ++l) X(l, I) = origin[l] + ops.coordinate(I, l);
  return X;
}

} // namespace dgpost

#endif

#ifndef DGPOST_MESH_HPP
#define DGPOST_MESH_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace dgpost {

/// Face numbering on an element: face = 2*axis + side, side 0 sits at
/// x_axis = origin, side 1 at x_axis = origin + h.
inline constexpr int face_index(int axis, int side) { return 2 * axis + side; }
inline constexpr int face_axis(int face) { return face / 2; }
inline constexpr int face_side(int face) { return face % 2; }
inline constexpr int opposite_face(int face) { return face ^ 1; }

struct FaceLink {
  int element = -1;
  int face = -1;
};

/// Uniform periodic partition of [0,L]^d into m^d square elements.
/// Elements are numbered with the first axis running fastest.
class Mesh {
public:
  Mesh(int dim, double domain_length, int elements_per_axis)
      : dim_(dim), length_(domain_length), per_axis_(elements_per_axis) {
    if (dim < 1 || dim > 3) throw InvalidArgument("mesh dimension must be 1, 2 or 3");
    if (!(domain_length > 0.0)) throw InvalidArgument("domain length must be positive");
    if (elements_per_axis < 1) throw InvalidArgument("elements per axis must be >= 1");
    h_ = length_ / per_axis_;
    count_ = 1;
    for (int l = 0; l < dim_; ++l) count_ *= per_axis_;
    links_.resize(static_cast<std::size_t>(count_) * 2 * dim_);
    for (int e = 0; e < count_; ++e) {
      auto idx = multi_index(e);
      for (int l = 0; l < dim_; ++l) {
        for (int s = 0; s < 2; ++s) {
          auto nb = idx;
          nb[l] = (idx[l] + (s == 0 ? per_axis_ - 1 : 1)) % per_axis_;
          links_[slot(e, face_index(l, s))] = {linear_index(nb), face_index(l, 1 - s)};
        }
      }
    }
  }

  int dim() const { return dim_; }
  double domain_length() const { return length_; }
  int elements_per_axis() const { return per_axis_; }
  double h() const { return h_; }
  int element_count() const { return count_; }
  int faces_per_element() const { return 2 * dim_; }
  double element_volume() const {
    double v = 1.0;
    for (int l = 0; l < dim_; ++l) v *= h_;
    return v;
  }

  std::array<int, 3> multi_index(int element) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int l = 0; l < dim_; ++l) {
      idx[l] = element % per_axis_;
      element /= per_axis_;
    }
    return idx;
  }

  int linear_index(const std::array<int, 3>& idx) const {
    int e = 0;
    for (int l = dim_ - 1; l >= 0; --l) e = e * per_axis_ + idx[l];
    return e;
  }

  /// Lower corner of the element.
  std::array<double, 3> origin(int element) const {
    auto idx = multi_index(element);
    std::array<double, 3> o{0.0, 0.0, 0.0};
    for (int l = 0; l < dim_; ++l) o[l] = idx[l] * h_;
    return o;
  }

  /// Neighbor element across `face` and the id of the shared face seen from it.
  FaceLink neighbor(int element, int face) const { return links_[slot(element, face)]; }

  /// Distinct face neighbors of an element (the patch without the element itself).
  std::vector<int> face_neighbors(int element) const {
    std::vector<int> out;
    for (int f = 0; f < faces_per_element(); ++f) out.push_back(neighbor(element, f).element);
    return out;
  }

private:
  std::size_t slot(int element, int face) const {
    return static_cast<std::size_t>(element) * 2 * dim_ + face;
  }

  int dim_;
  double length_;
  int per_axis_;
  double h_ = 0.0;
  int count_ = 0;
  std::vector<FaceLink> links_;
};

} // namespace dgpost

#endif

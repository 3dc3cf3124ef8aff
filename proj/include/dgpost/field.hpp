#ifndef DGPOST_FIELD_HPP
#define DGPOST_FIELD_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fourier.hpp"

namespace dgpost {

/// magnitude * exp(-|x - center|^2 / (2 width^2)), summed over periodic images.
struct GaussianTerm {
  std::vector<double> center;
  double width = 1.0;
  double magnitude = 0.0;
};

/// amplitude * cos(wave . x + phase)
struct TrigTerm {
  double amplitude = 1.0;
  std::vector<double> wave;
  double phase = 0.0;
};

/// A periodic scalar field on [0,L)^d: the potential V or the source f.
class FieldSpec {
public:
  enum class Kind { constant, gaussian_sum, trig_sum, nodal_table };

  static FieldSpec constant(double c) {
    FieldSpec f;
    f.kind_ = Kind::constant;
    f.constant_ = c;
    return f;
  }

  /// Gaussian sum plus an optional constant offset. `period` is the box length.
  static FieldSpec gaussian_sum(std::vector<GaussianTerm> terms, double period, double offset = 0.0) {
    if (!(period > 0.0)) throw InvalidArgument("gaussian field needs a positive period");
    for (const auto& t : terms)
      if (!(t.width > 0.0)) throw InvalidArgument("gaussian width must be positive");
    FieldSpec f;
    f.kind_ = Kind::gaussian_sum;
    f.gaussians_ = std::move(terms);
    f.period_ = period;
    f.constant_ = offset;
    return f;
  }

  static FieldSpec trig_sum(std::vector<TrigTerm> terms, double offset = 0.0) {
    FieldSpec f;
    f.kind_ = Kind::trig_sum;
    f.trig_ = std::move(terms);
    f.constant_ = offset;
    return f;
  }

  /// Samples on a uniform periodic grid (n per axis) over [0, period)^dim,
  /// evaluated elsewhere by trigonometric interpolation.
  static FieldSpec nodal_table(Eigen::VectorXd samples, int n, int dim, double period) {
    Eigen::Index total = 1;
    for (int l = 0; l < dim; ++l) total *= n;
    if (samples.size() != total) throw InvalidArgument("nodal table size does not match n^d");
    FieldSpec f;
    f.kind_ = Kind::nodal_table;
    f.table_ = std::move(samples);
    f.table_n_ = n;
    f.table_dim_ = dim;
    f.period_ = period;
    return f;
  }

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::constant; }
  double constant_value() const { return constant_; }
  const std::vector<GaussianTerm>& gaussians() const { return gaussians_; }
  const std::vector<TrigTerm>& trig_terms() const { return trig_; }
  double period() const { return period_; }
  const Eigen::VectorXd& table() const { return table_; }
  int table_points() const { return table_n_; }

  double value(std::span<const double> x) const {
    switch (kind_) {
      case Kind::constant:
        return constant_;
      case Kind::gaussian_sum: {
        double s = constant_;
        for (const auto& g : gaussians_) s += g.magnitude * periodic_gaussian(g, x);
        return s;
      }
      case Kind::trig_sum: {
        double s = constant_;
        for (const auto& t : trig_) {
          double arg = t.phase;
          for (std::size_t l = 0; l < x.size() && l < t.wave.size(); ++l) arg += t.wave[l] * x[l];
          s += t.amplitude * std::cos(arg);
        }
        return s;
      }
      case Kind::nodal_table: {
        std::vector<Eigen::VectorXd> targets;
        for (int l = 0; l < table_dim_; ++l) targets.push_back(Eigen::VectorXd::Constant(1, x[l]));
        return fourier_interpolate(table_, table_n_, std::vector<double>(table_dim_, 0.0), period_,
                                   targets)[0];
      }
    }
    return 0.0;
  }

  /// Values at the columns of a dim x npts coordinate matrix.
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.cols());
    if (kind_ == Kind::constant) return out.setConstant(constant_);
    std::vector<double> p(X.rows());
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      for (Eigen::Index l = 0; l < X.rows(); ++l) p[l] = X(l, i);
      out[i] = value(p);
    }
    return out;
  }

  /// Scale every term by s (used for f -> s f).
  FieldSpec scaled(double s) const {
    FieldSpec f = *this;
    f.constant_ *= s;
    for (auto& g : f.gaussians_) g.magnitude *= s;
    for (auto& t : f.trig_) t.amplitude *= s;
    f.table_ *= s;
    return f;
  }

  /// Translate the field: returns x -> this(x - shift).
  FieldSpec shifted(const std::vector<double>& shift) const {
    FieldSpec f = *this;
    for (auto& g : f.gaussians_)
      for (std::size_t l = 0; l < g.center.size() && l < shift.size(); ++l) g.center[l] += shift[l];
    for (auto& t : f.trig_)
      for (std::size_t l = 0; l < t.wave.size() && l < shift.size(); ++l) t.phase -= t.wave[l] * shift[l];
    if (kind_ == Kind::nodal_table) throw InvalidArgument("shifting a nodal table is not supported");
    return f;
  }

private:
  double periodic_gaussian(const GaussianTerm& g, std::span<const double> x) const {
    // Images within +-3 periods; the tails beyond are below double precision
    // for any width smaller than the box.
    const int dim = static_cast<int>(x.size());
    const double inv = 1.0 / (2.0 * g.width * g.width);
    std::vector<double> base(dim);
    for (int l = 0; l < dim; ++l) {
      const double c = l < static_cast<int>(g.center.size()) ? g.center[l] : 0.0;
      double d = std::fmod(x[l] - c, period_);
      if (d < -0.5 * period_) d += period_;
      if (d > 0.5 * period_) d -= period_;
      base[l] = d;
    }
    // Separable: product over axes of the 1D image sums.
    double prod = 1.0;
    for (int l = 0; l < dim; ++l) {
      double s = 0.0;
      for (int k = -3; k <= 3; ++k) {
        const double d = base[l] + k * period_;
        s += std::exp(-d * d * inv);
      }
      prod *= s;
    }
    return prod;
  }

  Kind kind_ = Kind::constant;
  double constant_ = 0.0;
  double period_ = 0.0;
  std::vector<GaussianTerm> gaussians_;
  std::vector<TrigTerm> trig_;
  Eigen::VectorXd table_;
  int table_n_ = 0;
  int table_dim_ = 0;
};

using PotentialSpec = FieldSpec;

/// Positive and negative parts V+ = max(V,0), V- = max(-V,0) of nodal values.
inline Eigen::VectorXd positive_part(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }
inline Eigen::VectorXd negative_part(const Eigen::VectorXd& v) { return (-v).cwiseMax(0.0); }

} // namespace dgpost

#endif

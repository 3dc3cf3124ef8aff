#ifndef DGPOST_FOURIER_HPP
#define DGPOST_FOURIER_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "tensor_ops.hpp"

namespace dgpost {

// Trigonometric interpolation on a uniform periodic grid x_m = x0 + m * period / n.
// For even n the Nyquist mode is split symmetrically (cos term only), which keeps
// the interpolant of real samples real.

/// Periodic cardinal function: psi(x_m - x_0) = delta_{m0}.
inline double periodic_cardinal(int n, double period, double t) {
  const double omega = 2.0 * std::numbers::pi / period;
  double s = 1.0;
  const int kmax = (n % 2 == 0) ? n / 2 - 1 : (n - 1) / 2;
  for (int k = 1; k <= kmax; ++k) s += 2.0 * std::cos(k * omega * t);
  if (n % 2 == 0) s += std::cos(0.5 * n * omega * t);
  return s / n;
}

/// E(i, m) = psi(targets_i - x_m): maps grid samples to interpolant values.
inline Eigen::MatrixXd interpolation_matrix(int n, double origin, double period,
                                            const Eigen::VectorXd& targets) {
  Eigen::MatrixXd E(targets.size(), n);
  for (Eigen::Index i = 0; i < targets.size(); ++i)
    for (int m = 0; m < n; ++m)
      E(i, m) = periodic_cardinal(n, period, targets[i] - (origin + m * period / n));
  return E;
}

/// Real symmetric matrix of -d^2/dx^2 acting on grid samples through the
/// trigonometric interpolant; its eigenvalues are the squared wavenumbers.
inline Eigen::MatrixXd spectral_laplacian(int n, double period) {
  const double omega = 2.0 * std::numbers::pi / period;
  Eigen::MatrixXd C(n, n);
  const int kmax = (n % 2 == 0) ? n / 2 - 1 : (n - 1) / 2;
  for (int r = 0; r < n; ++r) {
    const double t = r * period / n;
    double s = 0.0;
    for (int k = 1; k <= kmax; ++k) s += 2.0 * (k * omega) * (k * omega) * std::cos(k * omega * t);
    if (n % 2 == 0) {
      const double kn = 0.5 * n * omega;
      s += kn * kn * std::cos(kn * t);
    }
    for (int m = 0; m < n; ++m) C((m + r) % n, m) = s / n;
  }
  return 0.5 * (C + C.transpose());
}

/// Signed integer wavenumber index for DFT slot j of an n-point grid.
inline int wavenumber_index(int j, int n) { return j <= n / 2 ? j : j - n; }

/// Evaluate the trigonometric interpolant of samples on a uniform periodic grid
/// (n points per axis, lower corner `origin`, period `period`) at the tensor
/// points targets[0] x targets[1] x ... (first axis fastest).
inline Eigen::VectorXd fourier_interpolate(const Eigen::VectorXd& values, int n,
                                           const std::vector<double>& origin, double period,
                                           const std::vector<Eigen::VectorXd>& targets) {
  const int dim = static_cast<int>(targets.size());
  std::size_t expect = 1;
  for (int l = 0; l < dim; ++l) expect *= static_cast<std::size_t>(n);
  if (static_cast<std::size_t>(values.size()) != expect)
    throw InvalidArgument("grid sample count does not match n^d");
  std::vector<Eigen::MatrixXd> factors;
  for (int l = 0; l < dim; ++l) factors.push_back(interpolation_matrix(n, origin[l], period, targets[l]));
  return apply_tensor(factors, values);
}

/// Complex DFT coefficients c_k = (1/n^d) sum_m u_m exp(-i k . x_m), slot
/// ordering as numpy.fft (first axis fastest).
inline Eigen::VectorXcd dft_coefficients(const Eigen::VectorXd& values, int n, int dim) {
  Eigen::MatrixXcd F(n, n);
  for (int j = 0; j < n; ++j)
    for (int m = 0; m < n; ++m)
      F(j, m) = std::polar(1.0 / n, -2.0 * std::numbers::pi * j * m / n);
  Eigen::VectorXcd cur = values.cast<std::complex<double>>();
  for (int l = 0; l < dim; ++l) {
    Eigen::Index inner = 1, outer = 1;
    for (int k = 0; k < l; ++k) inner *= n;
    for (int k = l + 1; k < dim; ++k) outer *= n;
    Eigen::VectorXcd out(cur.size());
    for (Eigen::Index o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXcd> in_block(cur.data() + o * inner * n, inner, n);
      Eigen::Map<Eigen::MatrixXcd> out_block(out.data() + o * inner * n, inner, n);
      out_block.noalias() = in_block * F.transpose();
    }
    cur.swap(out);
  }
  return cur;
}

/// Inverse of dft_coefficients (real part returned).
inline Eigen::VectorXd inverse_dft(const Eigen::VectorXcd& coeffs, int n, int dim) {
  Eigen::MatrixXcd G(n, n);
  for (int m = 0; m < n; ++m)
    for (int j = 0; j < n; ++j) G(m, j) = std::polar(1.0, 2.0 * std::numbers::pi * j * m / n);
  Eigen::VectorXcd cur = coeffs;
  for (int l = 0; l < dim; ++l) {
    Eigen::Index inner = 1, outer = 1;
    for (int k = 0; k < l; ++k) inner *= n;
    for (int k = l + 1; k < dim; ++k) outer *= n;
    Eigen::VectorXcd out(cur.size());
    for (Eigen::Index o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXcd> in_block(cur.data() + o * inner * n, inner, n);
      Eigen::Map<Eigen::MatrixXcd> out_block(out.data() + o * inner * n, inner, n);
      out_block.noalias() = in_block * G.transpose();
    }
    cur.swap(out);
  }
  return cur.real();
}

/// Coordinates of a uniform periodic grid with n points per axis.
inline Eigen::MatrixXd uniform_grid(int n, int dim, const std::vector<double>& origin, double period) {
  Eigen::Index total = 1;
  for (int l = 0; l < dim; ++l) total *= n;
  Eigen::MatrixXd X(dim, total);
  for (Eigen::Index I = 0; I < total; ++I) {
    Eigen::Index r = I;
    for (int l = 0; l < dim; ++l) {
      X(l, I) = origin[l] + (r % n) * period / n;
      r /= n;
    }
  }
  return X;
}

} // namespace dgpost

#endif

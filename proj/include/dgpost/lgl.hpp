#ifndef DGPOST_LGL_HPP
#define DGPOST_LGL_HPP

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dgpost {

/// Legendre-Gauss-Lobatto nodes and weights on [0, h].
struct LglRule {
  int points = 0;
  double h = 0.0;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

namespace detail {

// Legendre P_n and P_{n-1} at x by the three-term recurrence.
inline void legendre_pair(int n, double x, double& pn, double& pn1) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    pn = 1.0;
    pn1 = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  pn = p1;
  pn1 = p0;
}

} // namespace detail

/// Newton iteration on the roots of (1 - x^2) P'_{n-1}(x), started from the
/// Chebyshev-Gauss-Lobatto points. Only half the nodes are iterated; the rest
/// are mirrored so the rule is exactly symmetric about h/2.
inline LglRule lgl_rule(int n_g, double h) {
  if (n_g < 2) throw InvalidArgument("LGL rule needs at least 2 points");
  if (!(h > 0.0)) throw InvalidArgument("LGL interval length must be positive");
  const int N = n_g - 1;
  Eigen::VectorXd x(n_g), w(n_g);
  for (int j = 0; j < n_g; ++j) {
    if (j == 0 || j == N) continue;
    if (2 * j > N) continue;
    // Node j counted from x = -1.
    double xj = -std::cos(std::numbers::pi * j / N);
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double pn, pn1;
      detail::legendre_pair(N, xj, pn, pn1);
      const double step = (xj * pn - pn1) / (n_g * pn);
      xj -= step;
      if (std::abs(step) < 1e-16) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      // One more sweep can only be limited by rounding; accept if the residual is tiny.
      double pn, pn1;
      detail::legendre_pair(N, xj, pn, pn1);
      if (std::abs(xj * pn - pn1) > 1e-13) throw NumericFailure("LGL Newton iteration did not converge");
    }
    x[j] = xj;
  }
  x[0] = -1.0;
  x[N] = 1.0;
  for (int j = 1; j < N; ++j)
    if (2 * j > N) x[j] = -x[N - j];
  if (N % 2 == 0) x[N / 2] = 0.0;
  for (int j = 0; j < n_g; ++j) {
    double pn, pn1;
    detail::legendre_pair(N, x[j], pn, pn1);
    w[j] = 2.0 / (N * (N + 1.0) * pn * pn);
  }
  for (int j = 0; 2 * j < N; ++j) {
    const double s = 0.5 * (w[j] + w[N - j]);
    w[j] = w[N - j] = s;
  }

  LglRule rule;
  rule.points = n_g;
  rule.h = h;
  rule.nodes.resize(n_g);
  rule.weights = 0.5 * h * w;
  for (int j = 0; j < n_g; ++j) rule.nodes[j] = 0.5 * h * (x[j] + 1.0);
  rule.nodes[0] = 0.0;
  rule.nodes[N] = h;
  for (int j = 1; j < N; ++j)
    if (2 * j > N) rule.nodes[j] = h - rule.nodes[N - j];
  return rule;
}

/// Barycentric weights of the Lagrange basis on `nodes`, rescaled so the
/// largest magnitude is one (only ratios enter the differentiation formula).
inline Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& nodes) {
  const Eigen::Index n = nodes.size();
  Eigen::VectorXd logw(n);
  Eigen::VectorXd sign = Eigen::VectorXd::Ones(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == j) continue;
      const double diff = nodes[j] - nodes[k];
      acc -= std::log(std::abs(diff));
      if (diff < 0) sign[j] = -sign[j];
    }
    logw[j] = acc;
  }
  const double shift = logw.maxCoeff();
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) out[j] = sign[j] * std::exp(logw[j] - shift);
  return out;
}

/// D(i,j) = p_j'(y_i) for the Lagrange basis on the rule's nodes. Diagonal
/// entries use the negative-sum identity so D annihilates constants.
inline Eigen::MatrixXd diff_matrix(const LglRule& rule) {
  const int n = rule.points;
  const Eigen::VectorXd lam = barycentric_weights(rule.nodes);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      D(i, j) = (lam[j] / lam[i]) / (rule.nodes[i] - rule.nodes[j]);
      row += D(i, j);
    }
    D(i, i) = -row;
  }
  return D;
}

} // namespace dgpost

#endif

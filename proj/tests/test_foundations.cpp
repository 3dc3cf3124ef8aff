#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <dgpost/dgpost.hpp>

using namespace dgpost;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

VectorXd nodal(const TensorOperators& ops, const std::function<double(const double*)>& fn) {
  VectorXd v(ops.size());
  double x[3] = {0, 0, 0};
  for (Eigen::Index I = 0; I < ops.size(); ++I) {
    for (int l = 0; l < ops.dim(); ++l) x[l] = ops.coordinate(I, l);
    v[I] = fn(x);
  }
  return v;
}

VectorXd random_vector(Eigen::Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(gen);
  return v;
}

} // namespace

// ---------------------------------------------------------------- LGL rule

TEST(LglRule, TwoPointsIsTrapezoid) {
  const LglRule r = lgl_rule(2, 1.0);
  EXPECT_NEAR(r.nodes[0], 0.0, 1e-15);
  EXPECT_NEAR(r.nodes[1], 1.0, 1e-15);
  EXPECT_NEAR(r.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(r.weights[1], 0.5, 1e-15);
}

TEST(LglRule, ThreePointsIsSimpson) {
  const LglRule r = lgl_rule(3, 1.0);
  EXPECT_NEAR(r.nodes[1], 0.5, 1e-15);
  EXPECT_NEAR(r.weights[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(r.weights[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.weights[2], 1.0 / 6.0, 1e-15);
}

TEST(LglRule, WeightsSumToLength) {
  EXPECT_NEAR(lgl_rule(10, 2.0 * pi).weights.sum(), 2.0 * pi, 1e-12);
}

TEST(LglRule, ExactUpToDegree2nMinus3) {
  for (int n : {4, 7, 12, 25}) {
    const double h = 1.7;
    const LglRule r = lgl_rule(n, h);
    for (int k = 0; k <= 2 * n - 3; ++k) {
      double q = 0.0;
      for (int j = 0; j < n; ++j) q += r.weights[j] * std::pow(r.nodes[j] / h, k);
      EXPECT_NEAR(q, h / (k + 1), 1e-12) << "n=" << n << " k=" << k;
    }
  }
}

TEST(LglRule, RejectsBadArguments) {
  EXPECT_THROW(lgl_rule(1, 1.0), InvalidArgument);
  EXPECT_THROW(lgl_rule(5, 0.0), InvalidArgument);
}

TEST(DiffMatrix, LinearTwoPoint) {
  const MatrixXd D = diff_matrix(lgl_rule(2, 1.0));
  EXPECT_NEAR(D(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(D(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(D(1, 0), -1.0, 1e-15);
  EXPECT_NEAR(D(1, 1), 1.0, 1e-15);
}

TEST(DiffMatrix, AnnihilatesConstants) {
  const MatrixXd D = diff_matrix(lgl_rule(17, 0.3));
  EXPECT_LT((D * VectorXd::Ones(17)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DiffMatrix, DifferentiatesQuadratic) {
  const LglRule r = lgl_rule(5, 1.0);
  const VectorXd x2 = r.nodes.cwiseAbs2();
  EXPECT_LT((diff_matrix(r) * x2 - 2.0 * r.nodes).cwiseAbs().maxCoeff(), 1e-12);
}

// ------------------------------------------------------ tensor operators

TEST(TensorOperators, StarMatrix1D) {
  const LglRule r = lgl_rule(6, 0.7);
  const TensorOperators ops(r, 1);
  const MatrixXd D = diff_matrix(r);
  const MatrixXd K = D.transpose() * r.weights.asDiagonal() * D + r.weights * r.weights.transpose() / r.h;
  EXPECT_LT((ops.dense(FormKind::star) - K).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TensorOperators, ConstantHasStarNormVolume) {
  for (int d : {1, 2, 3}) {
    const TensorOperators ops(lgl_rule(5, 0.8), d);
    const VectorXd one = VectorXd::Ones(ops.size());
    EXPECT_NEAR(ops.form(FormKind::star, one, one), std::pow(0.8, d), 1e-13);
  }
}

TEST(TensorOperators, SimpleForms) {
  const TensorOperators ops1(lgl_rule(6, 1.0), 1);
  const VectorXd x = ops1.rule().nodes;
  EXPECT_NEAR(ops1.form(FormKind::grad, x, x), 1.0, 1e-13);
  EXPECT_NEAR(ops1.form(FormKind::bnd, x, x), 1.0, 1e-13);
  EXPECT_NEAR(ops1.mean(x), 0.5, 1e-13);
  EXPECT_NEAR(ops1.mean(VectorXd::Constant(6, 3.25)), 3.25, 1e-13);
  const TensorOperators ops2(lgl_rule(6, 1.0), 2);
  const VectorXd one = VectorXd::Ones(ops2.size());
  EXPECT_NEAR(ops2.form(FormKind::star, one, one), 1.0, 1e-13);
}

TEST(TensorOperators, MeanOfPeriodicSineVanishes) {
  const TensorOperators ops(lgl_rule(20, 2.0), 1);
  const VectorXd s = nodal(ops, [](const double* x) { return std::sin(2.0 * pi * x[0] / 2.0); });
  EXPECT_NEAR(ops.mean(s), 0.0, 1e-12);
}

TEST(TensorOperators, TensorApplyMatchesKronecker) {
  const TensorOperators ops(lgl_rule(5, 1.3), 2);
  const MatrixXd D = ops.diff_1d();
  const MatrixXd I = MatrixXd::Identity(5, 5);
  // First axis fastest: d/dx0 = I kron D.
  MatrixXd Dx(25, 25);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) Dx.block(5 * i, 5 * j, 5, 5) = I(i, j) * D;
  const VectorXd v = random_vector(25, 3);
  EXPECT_LT((ops.diff(0, v) - Dx * v).norm(), 1e-12 * v.norm() * D.norm());
}

TEST(TensorOperators, StarInverseInvertsStar) {
  for (int d : {1, 2}) {
    const TensorOperators ops(lgl_rule(9, 0.6), d);
    const VectorXd v = random_vector(ops.size(), 7);
    const VectorXd w = ops.apply_star_inverse(ops.apply(FormKind::star, v));
    EXPECT_LT((w - v).norm(), 1e-9 * v.norm());
  }
}

TEST(TensorOperators, NodeBudgetEnforced) {
  EXPECT_THROW(TensorOperators(lgl_rule(20, 1.0), 3, 1000), ResourceError);
}

// Summation by parts: (grad u, grad v) = -(Lap u, v) + (du/dn, v) on the boundary,
// exact for any nodal vectors on LGL grids.
TEST(Properties, ElementIntegrationByParts) {
  for (int d : {1, 2}) {
    const TensorOperators ops(lgl_rule(8, 0.9), d);
    for (unsigned seed = 1; seed <= 5; ++seed) {
      const VectorXd u = random_vector(ops.size(), seed), v = random_vector(ops.size(), 100 + seed);
      const double lhs = ops.form(FormKind::grad, u, v);
      double rhs = -ops.weights().dot(ops.laplacian(u).cwiseProduct(v));
      for (int face = 0; face < 2 * d; ++face) {
        const auto rows = ops.face_nodes(face_axis(face), face_side(face));
        const VectorXd du = ops.diff(face_axis(face), u);
        const VectorXd w = ops.face_weights(face_axis(face));
        for (std::size_t k = 0; k < rows.size(); ++k)
          rhs += normal_sign(face) * w[k] * du[rows[k]] * v[rows[k]];
      }
      EXPECT_NEAR(lhs, rhs, 1e-10 * (std::abs(lhs) + 1.0)) << "d=" << d;
    }
  }
}

// ---------------------------------------------------------------- fourier

TEST(Fourier, InterpolationExactForBandLimited) {
  const int n = 16;
  const double Lt = 3.0;
  VectorXd s(n);
  for (int m = 0; m < n; ++m) s[m] = std::cos(2.0 * pi * (m * Lt / n) / Lt);
  const VectorXd t = lgl_rule(9, 1.0).nodes.array() + 1.0;
  const VectorXd out = interpolation_matrix(n, 0.0, Lt, t) * s;
  for (Eigen::Index i = 0; i < t.size(); ++i) EXPECT_NEAR(out[i], std::cos(2.0 * pi * t[i] / Lt), 1e-12);
  const VectorXd c = interpolation_matrix(n, 0.0, Lt, t) * VectorXd::Constant(n, 2.5);
  EXPECT_LT((c.array() - 2.5).abs().maxCoeff(), 1e-12);
}

TEST(Fourier, GaussianInterpolationSelfConverges) {
  const double Lt = 3.0;
  auto g = [&](double x) {
    double s = 0;
    for (int k = -3; k <= 3; ++k) s += std::exp(-std::pow(x - 1.5 + k * Lt, 2) / (2 * 0.2 * 0.2));
    return s;
  };
  const VectorXd t = lgl_rule(12, 1.0).nodes.array() + 1.0;
  auto run = [&](int n) {
    VectorXd s(n);
    for (int m = 0; m < n; ++m) s[m] = g(m * Lt / n);
    return VectorXd(interpolation_matrix(n, 0.0, Lt, t) * s);
  };
  EXPECT_LT((run(64) - run(128)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Fourier, SpectralLaplacianSpectrum) {
  const int n = 12;
  const double Lt = 2.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(spectral_laplacian(n, Lt));
  const double w = 2.0 * pi / Lt;
  EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-10);
  EXPECT_NEAR(es.eigenvalues()[1], w * w, 1e-10);
  EXPECT_NEAR(es.eigenvalues()[2], w * w, 1e-10);
  EXPECT_NEAR(es.eigenvalues()[n - 1], 36.0 * w * w, 1e-9);
}

TEST(Fourier, DftRoundTrip) {
  const VectorXd v = random_vector(64, 11);
  EXPECT_LT((inverse_dft(dft_coefficients(v, 8, 2), 8, 2) - v).norm(), 1e-12 * v.norm());
}

// ------------------------------------------------------------------ fields

TEST(Field, TrigAndShift) {
  const FieldSpec f = FieldSpec::trig_sum({TrigTerm{1.0, {6.0}, -pi / 2}});
  const double x = 0.37;
  EXPECT_NEAR(f.value(std::span<const double>(&x, 1)), std::sin(6 * x), 1e-14);
  const FieldSpec g = f.shifted({0.2});
  const double y = x - 0.2;
  EXPECT_NEAR(g.value(std::span<const double>(&x, 1)), f.value(std::span<const double>(&y, 1)), 1e-13);
}

TEST(Field, GaussianIsPeriodic) {
  const FieldSpec V = FieldSpec::gaussian_sum({GaussianTerm{{0.1}, 0.3, -2.0}}, 2 * pi);
  const double a = 0.05, b = 0.05 + 2 * pi;
  EXPECT_NEAR(V.value(std::span<const double>(&a, 1)), V.value(std::span<const double>(&b, 1)), 1e-13);
  EXPECT_NEAR(V.value(std::span<const double>(&a, 1)), -2.0 * std::exp(-0.0025 / 0.18), 1e-12);
  EXPECT_THROW(FieldSpec::gaussian_sum({GaussianTerm{{0.1}, 0.0, 1.0}}, 1.0), InvalidArgument);
}

// ------------------------------------------------------------------- mesh

TEST(Mesh, PeriodicNeighbors) {
  const Mesh m(2, 1.0, 3);
  EXPECT_EQ(m.element_count(), 9);
  // Element 0 sits at (0,0); its low-x neighbor wraps to (2,0).
  EXPECT_EQ(m.neighbor(0, face_index(0, 0)).element, 2);
  EXPECT_EQ(m.neighbor(0, face_index(0, 0)).face, face_index(0, 1));
  EXPECT_EQ(m.neighbor(0, face_index(1, 0)).element, 6);
  for (int e = 0; e < 9; ++e)
    for (int f = 0; f < 4; ++f) {
      const FaceLink nb = m.neighbor(e, f);
      EXPECT_EQ(m.neighbor(nb.element, nb.face).element, e);
    }
}

// ------------------------------------------------------------ basis spaces

TEST(Basis, PolynomialDimensions) {
  const TensorOperators ops1(lgl_rule(6, 1.0), 1);
  const BasisSpace p0 = polynomial_space(ops1, 0, 0);
  EXPECT_EQ(p0.size(), 1);
  EXPECT_LT((p0.phi.col(0).array() - p0.phi(0, 0)).abs().maxCoeff(), 1e-13);
  const TensorOperators ops2(lgl_rule(6, 1.0), 2);
  EXPECT_EQ(polynomial_space(ops2, 0, 2).size(), 6);
  EXPECT_EQ(binomial(16 + 3, 3), 969);
  EXPECT_THROW(polynomial_space(ops1, 0, 6), InvalidArgument);
}

TEST(Basis, OrthonormalizeMonomials) {
  const TensorOperators ops(lgl_rule(10, 1.0), 1);
  MatrixXd raw(10, 3);
  const VectorXd x = ops.rule().nodes;
  raw.col(0).setOnes();
  raw.col(1) = x;
  raw.col(2) = x.cwiseAbs2();
  const BasisSpace s = orthonormalize(raw, ops);
  EXPECT_EQ(s.size(), 3);
  const MatrixXd G = s.phi.transpose() * ops.weights().asDiagonal() * s.phi;
  EXPECT_LT((G - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Basis, OrthonormalizeDropsDuplicates) {
  const TensorOperators ops(lgl_rule(10, 1.0), 1);
  MatrixXd raw(10, 3);
  raw.col(0).setOnes();
  raw.col(1) = ops.rule().nodes;
  raw.col(2) = raw.col(1);
  const BasisSpace s = orthonormalize(raw, ops);
  EXPECT_EQ(s.size(), 2);
  EXPECT_EQ(s.dropped, 1);
  // Re-orthonormalizing an orthonormal table keeps its span.
  const BasisSpace t = orthonormalize(s.phi, ops);
  const MatrixXd P = t.phi * t.phi.transpose() * ops.weights().asDiagonal();
  EXPECT_LT((P * s.phi - s.phi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Basis, AlbSpectrumConstantPotential) {
  const Mesh mesh(1, 2 * pi, 7);
  const TensorOperators ops(lgl_rule(20, mesh.h()), 1);
  const AlbGenerator gen(mesh, 0, FieldSpec::constant(0.01), ops);
  const double k = 2 * pi / (3 * mesh.h());
  EXPECT_NEAR(gen.eigenvalues()[0], 0.01, 1e-10);
  EXPECT_NEAR(gen.eigenvalues()[1], 0.01 + k * k, 1e-9);
  EXPECT_NEAR(gen.eigenvalues()[2], 0.01 + k * k, 1e-9);
  // N = 2 cuts a degenerate pair; the cluster is completed.
  EXPECT_EQ(gen.cluster_count(2), 3);
  const BasisSpace s = gen.space(3);
  EXPECT_EQ(s.size(), 3);
  EXPECT_LT(constant_residual(s, ops), 1e-10);
}

TEST(Basis, AlbZeroPotentialGroundStateIsConstant) {
  const Mesh mesh(2, 2 * pi, 3);
  const TensorOperators ops(lgl_rule(8, mesh.h()), 2);
  AlbOptions o;
  o.planewaves = 12;
  const AlbGenerator gen(mesh, 4, FieldSpec::constant(0.0), ops, o);
  EXPECT_NEAR(gen.eigenvalues()[0], 0.0, 1e-10);
  const BasisSpace s = gen.space(1);
  EXPECT_EQ(s.size(), 1);
  EXPECT_LT((s.phi.col(0).array() / s.phi(0, 0) - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(Projector, Properties) {
  const Mesh mesh(2, 2 * pi, 3);
  const TensorOperators ops(lgl_rule(9, mesh.h()), 2);
  const BasisSpace s = polynomial_space(ops, 0, 3);
  const Projector P(s, ops);
  for (int j = 0; j < s.size(); ++j) {
    const VectorXd c = s.phi.col(j);
    EXPECT_LT((P.apply_pi(c) - c).norm(), 1e-10 * c.norm());
    EXPECT_LT(P.apply_q(c).norm(), 1e-10 * c.norm());
  }
  for (unsigned seed = 1; seed <= 4; ++seed) {
    const VectorXd v = random_vector(ops.size(), seed);
    const VectorXd pv = P.apply_pi(v);
    EXPECT_LT((P.apply_pi(pv) - pv).norm(), 1e-10 * v.norm());
    const VectorXd qv = P.apply_q(v);
    const VectorXd w = s.phi * random_vector(s.size(), 50 + seed);
    const double scale = std::sqrt(ops.form(FormKind::star, qv, qv) * ops.form(FormKind::star, w, w));
    EXPECT_LT(std::abs(ops.form(FormKind::star, qv, w)), 1e-10 * scale);
  }
}

// ------------------------------------------------------------ eigensolvers

TEST(Eigen, PencilBasics) {
  const MatrixXd A = (VectorXd(2) << 2, 1).finished().asDiagonal();
  EXPECT_NEAR(max_eig_pencil(A, MatrixXd::Identity(2, 2)).lambda, 2.0, 1e-14);
  const MatrixXd S = random_vector(9, 1).reshaped(3, 3);
  const MatrixXd B = S * S.transpose() + MatrixXd::Identity(3, 3);
  EXPECT_NEAR(max_eig_pencil(B, B).lambda, 1.0, 1e-12);
}

TEST(Eigen, LobpcgDiagonal) {
  const VectorXd d = (VectorXd(3) << 3, 2, 1).finished();
  const EigResult r = max_eig_lobpcg([&](const VectorXd& v) { return VectorXd(d.cwiseProduct(v)); },
                                     [](const VectorXd& v) { return v; }, 3, LobpcgOptions{1e-10});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.lambda, 3.0, 1e-9);
}

// --------------------------------------------------------- local constants

TEST(LocalConstants, LinearsOnUnitInterval) {
  const TensorOperators ops(lgl_rule(8, 1.0), 1);
  const BasisSpace lin = polynomial_space(ops, 0, 1);
  EXPECT_NEAR(compute_dk(lin, ops), std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(compute_dk(constant_space(ops, 0), ops), 0.0, 1e-12);
}

TEST(LocalConstants, ConstantsOnlyPoincare) {
  const TensorOperators ops(lgl_rule(40, 1.0), 1);
  ConstantsOptions o;
  o.tol = 1e-8;
  const LocalConstants lc = compute_local_constants(constant_space(ops, 0), ops, 1.0, PenaltyOptions{}, o);
  EXPECT_TRUE(lc.converged);
  EXPECT_NEAR(lc.a, 1.0 / pi, 5e-3 / pi);
  // Witness v = x - 1/2 gives ratio 1/2.
  EXPECT_GE(lc.b * lc.b, 0.5 - 1e-8);
}

TEST(LocalConstants, LobpcgMatchesDenseOracle) {
  struct Case {
    int dim, n_g, p;
    double h;
  };
  for (const Case c : {Case{1, 16, 3, 1.0}, Case{1, 30, 6, 0.8}, Case{2, 12, 3, 1.2}, Case{2, 20, 5, 0.9}}) {
    const TensorOperators ops(lgl_rule(c.n_g, c.h), c.dim);
    const BasisSpace s = polynomial_space(ops, 0, c.p);
    ConstantsOptions lo;
    lo.tol = 1e-8;
    ConstantsOptions de = lo;
    de.method = ConstantsMethod::dense;
    const LocalConstants a = compute_local_constants(s, ops, 1.0, PenaltyOptions{}, lo);
    const LocalConstants b = compute_local_constants(s, ops, 1.0, PenaltyOptions{}, de);
    EXPECT_TRUE(a.converged);
    EXPECT_NEAR(a.a, b.a, 1e-2 * b.a) << c.dim << " " << c.n_g;
    if (b.b > 1e-6) EXPECT_NEAR(a.b, b.b, 1e-2 * b.b) << c.dim << " " << c.n_g;
    else EXPECT_LT(a.b, 1e-6);
  }
}

TEST(LocalConstants, OneDimensionalPolynomialsHaveZeroB) {
  for (double h : {1.0, 2 * pi / 7}) {
    const TensorOperators ops(lgl_rule(30, h), 1);
    for (int p = 2; p <= 10; ++p) {
      const LocalConstants lc = compute_local_constants(polynomial_space(ops, 0, p), ops, 1.0, PenaltyOptions{});
      EXPECT_LE(lc.b, 1e-8) << "p=" << p;
    }
  }
}

TEST(LocalConstants, ScaleCovariance) {
  const int p = 4;
  ConstantsOptions o;
  o.tol = 1e-10;
  const TensorOperators o1(lgl_rule(20, 1.0), 2), oh(lgl_rule(20, 0.37), 2);
  const LocalConstants c1 = compute_local_constants(polynomial_space(o1, 0, p), o1, 1.0, PenaltyOptions{}, o);
  const LocalConstants ch = compute_local_constants(polynomial_space(oh, 0, p), oh, 1.0, PenaltyOptions{}, o);
  EXPECT_NEAR(ch.a / c1.a, 0.37, 0.01 * 0.37);
  EXPECT_NEAR(ch.b * ch.b / (c1.b * c1.b), 0.37, 0.01 * 0.37);
  EXPECT_NEAR(ch.d * ch.d / (c1.d * c1.d), 1 / 0.37, 0.01 / 0.37);
}

TEST(LocalConstants, MonotoneUnderEnlargement) {
  const TensorOperators ops(lgl_rule(14, 1.0), 2);
  ConstantsOptions o;
  o.method = ConstantsMethod::dense;
  double a_prev = 1e300, b_prev = 1e300;
  for (int p = 0; p <= 5; ++p) {
    const LocalConstants lc = compute_local_constants(polynomial_space(ops, 0, p), ops, 1.0, PenaltyOptions{}, o);
    EXPECT_LE(lc.a, a_prev * (1 + 1e-10));
    EXPECT_LE(lc.b, b_prev * (1 + 1e-10));
    a_prev = lc.a;
    b_prev = lc.b;
  }
}

TEST(LocalConstants, FullSpaceHasTrivialComplement) {
  const TensorOperators ops(lgl_rule(5, 1.0), 1);
  const LocalConstants lc = compute_local_constants(polynomial_space(ops, 0, 4), ops, 1.0, PenaltyOptions{});
  EXPECT_EQ(lc.a, 0.0);
  EXPECT_EQ(lc.b, 0.0);
}

TEST(Penalty, Rules) {
  const double d = std::sqrt(2.0);
  EXPECT_NEAR(choose_penalty(d, 1.0, PenaltyRule::coercive, 0.0, 1.0), 4.0, 1e-14);
  EXPECT_NEAR(choose_penalty(d, 1.0, PenaltyRule::conservative, 0.0, 1.0), 16.0, 1e-14);
  EXPECT_NEAR(choose_penalty(d, -1.0, PenaltyRule::coercive, 0.0, 0.25), 0.25, 1e-14);
  EXPECT_NEAR(choose_penalty(d, 1.0, PenaltyRule::manual, 7.5, 1.0), 7.5, 1e-14);
  EXPECT_THROW(choose_penalty(d, 1.0, PenaltyRule::manual, 0.0, 1.0), InvalidArgument);
}

// Acceptance run: evaluates criteria 1-10 and prints one PASS/FAIL line each.
// Exit status is 0 when every criterion was evaluated, whatever the verdicts;
// it is nonzero only if a check could not run.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <dgpost/dgpost.hpp>

using namespace dgpost;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

struct Verdict {
  int id;
  bool pass;
  std::string summary;
};

std::vector<Verdict> verdicts;

void note(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void note(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  std::printf("    ");
  std::vprintf(fmt, ap);
  std::printf("\n");
  va_end(ap);
  std::fflush(stdout);
}

void record(int id, bool pass, const std::string& summary) {
  verdicts.push_back({id, pass, summary});
  std::printf("CRITERION %2d %s  %s\n", id, pass ? "PASS" : "FAIL", summary.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LocalConstants poly_constants(int dim, int n_g, double h, int p, double tol = 1e-8,
                              ConstantsMethod method = ConstantsMethod::lobpcg) {
  const TensorOperators ops(lgl_rule(n_g, h), dim);
  ConstantsOptions o;
  o.tol = tol;
  o.method = method;
  return compute_local_constants(polynomial_space(ops, 0, p), ops, 1.0, PenaltyOptions{}, o);
}

// ------------------------------------------------------------------ 1

void criterion1() {
  double worst = 0.0;
  for (double h : {1.0, 2 * pi / 7})
    for (int p = 2; p <= 10; ++p) worst = std::max(worst, poly_constants(1, 40, h, p).b);
  note("max b over p = 2..10, h in {1, 2pi/7}: %.3e", worst);
  char buf[128];
  std::snprintf(buf, sizeof buf, "1D polynomial b_kappa <= 1e-8 (max %.2e)", worst);
  record(1, worst <= 1e-8, buf);
}

// ------------------------------------------------------------------ 2

void criterion2() {
  const double h = 2 * pi / 7;
  std::vector<int> ps{16, 24, 32, 40, 48, 56, 64};
  std::vector<double> c;
  std::vector<double> d2;
  for (int p : ps) {
    const LocalConstants lc = poly_constants(1, 100, h, p);
    c.push_back(lc.a * lc.a * p * p / (h * h));
    d2.push_back(lc.d * lc.d);
    note("1D p=%2d  a^2 p^2/h^2 = %.5f  d^2 = %.4e", p, c.back(), d2.back());
  }
  bool band = true, monotone = true, shrinking = true;
  for (std::size_t i = 0; i < c.size(); ++i) band = band && c[i] >= 0.05 && c[i] <= 0.2;
  for (std::size_t i = 2; i < c.size(); ++i) {
    monotone = monotone && (c[i] - c[i - 1]) * (c[1] - c[0]) > 0.0;
    shrinking = shrinking && std::abs(c[i] - c[i - 1]) <= std::abs(c[i - 1] - c[i - 2]) * 1.5;
  }
  const bool toward = std::abs(c.back() - 0.1) < std::abs(c.front() - 0.1);
  note("band [0.05,0.2]: %s  monotone: %s  moving toward 0.1: %s", band ? "yes" : "no", monotone ? "yes" : "no",
       toward ? "yes" : "no");

  // d^2(2p)/d^2(p) for p = 16, 32 (indices 0->2, 2->6).
  const double r16 = d2[2] / d2[0], r32 = d2[6] / d2[2];
  note("d^2(32)/d^2(16) = %.3f  d^2(64)/d^2(32) = %.3f", r16, r32);
  const bool dratio = r16 >= 3 && r16 <= 5 && r32 >= 3 && r32 <= 5;

  double lo = 1e300, hi = 0.0;
  for (int p : {8, 16, 24, 32}) {
    const LocalConstants lc = poly_constants(2, 48, h, p, 1e-6);
    const double bp = lc.b * lc.b * p;
    lo = std::min(lo, bp);
    hi = std::max(hi, bp);
    note("2D p=%2d  b^2 = %.5e  b^2 p = %.4f", p, lc.b * lc.b, bp);
  }
  const bool bscale = hi / lo <= 2.0;
  note("2D b^2 p spread max/min = %.3f", hi / lo);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "hp scaling: a^2p^2/h^2 in [%.3f, %.3f] (band %s, toward 0.1 %s), d ratios %.2f/%.2f, 2D b^2 p spread %.2f",
                *std::min_element(c.begin(), c.end()), *std::max_element(c.begin(), c.end()), band ? "ok" : "violated",
                toward ? "yes" : "no", r16, r32, hi / lo);
  record(2, band && monotone && toward && dratio && bscale, buf);
}

// ------------------------------------------------------------------ 3

void criterion3() {
  double worst = 0.0;
  auto compare = [&](const BasisSpace& s, const TensorOperators& ops, const char* label) {
    ConstantsOptions lo;
    ConstantsOptions de;
    de.method = ConstantsMethod::dense;
    const LocalConstants a = compute_local_constants(s, ops, 1.0, PenaltyOptions{}, lo);
    const LocalConstants b = compute_local_constants(s, ops, 1.0, PenaltyOptions{}, de);
    const double ea = std::abs(a.a - b.a) / b.a;
    // A zero b (1D polynomials) is compared in absolute terms.
    const double eb = b.b > 1e-6 ? std::abs(a.b - b.b) / b.b : std::abs(a.b - b.b);
    worst = std::max({worst, ea, eb});
    note("%-28s a: %.6e vs %.6e  b: %.6e vs %.6e", label, a.a, b.a, a.b, b.b);
  };
  for (int n_g : {20, 50})
    for (int p : {0, 2, 5, 9}) {
      const TensorOperators ops(lgl_rule(n_g, 2 * pi / 7), 1);
      char label[64];
      std::snprintf(label, sizeof label, "1D n_g=%d poly p=%d", n_g, p);
      compare(polynomial_space(ops, 0, p), ops, label);
    }
  {
    const Mesh mesh(1, 2 * pi, 7);
    const TensorOperators ops(lgl_rule(40, mesh.h()), 1);
    const FieldSpec V = default_gaussians_1d().build(2 * pi);
    for (int e : {0, 3}) {
      char label[64];
      std::snprintf(label, sizeof label, "1D n_g=40 ALB N=5 elem %d", e);
      compare(AlbGenerator(mesh, e, V, ops).space(5), ops, label);
    }
  }
  for (int n_g : {16, 30})
    for (int p : {1, 4}) {
      const TensorOperators ops(lgl_rule(n_g, 2 * pi / 5), 2);
      char label[64];
      std::snprintf(label, sizeof label, "2D n_g=%d poly p=%d", n_g, p);
      compare(polynomial_space(ops, 0, p), ops, label);
    }
  {
    const Mesh mesh(2, 2 * pi, 5);
    const TensorOperators ops(lgl_rule(30, mesh.h()), 2);
    const FieldSpec V = default_gaussians_2d().build(2 * pi);
    compare(AlbGenerator(mesh, 6, V, ops).space(21), ops, "2D n_g=30 ALB N=21 elem 6");
  }
  const TensorOperators unit(lgl_rule(40, 1.0), 1);
  ConstantsOptions o;
  const double a = compute_local_constants(constant_space(unit, 0), unit, 1.0, PenaltyOptions{}, o).a;
  const double ea = std::abs(a - 1.0 / pi) * pi;
  note("constants-only on [0,1]: a = %.8f, 1/pi = %.8f", a, 1.0 / pi);
  char buf[160];
  std::snprintf(buf, sizeof buf, "LOBPCG vs dense oracle max rel. diff %.2e (<= 1e-2); a = 1/pi within %.2e (<= 5e-3)",
                worst, ea);
  record(3, worst <= 1e-2 && ea <= 5e-3, buf);
}

// ------------------------------------------------------------------ 4

double coercivity_margin(const Mesh& mesh, const TensorOperators& ops, std::vector<BasisSpace> spaces) {
  std::vector<double> gamma;
  for (const auto& s : spaces) gamma.push_back(choose_penalty(compute_dk(s, ops), 1.0, PenaltyOptions{}, ops.h()));
  const DgProblem pb(mesh, ops, std::move(spaces), FieldSpec::constant(0.0), FieldSpec::constant(0.0), 1.0, gamma);
  const MatrixXd A = assemble(pb).matrix;
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> nd;
  double worst = 1e300;
  for (int k = 0; k < 200; ++k) {
    VectorXd c(pb.dofs());
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = nd(gen);
    const double n2 = std::pow(energy_norm(pb, nodal_values(pb, c), NormVariant::poisson), 2);
    c /= std::sqrt(n2);
    const double avv = c.dot(A * c);
    worst = std::min(worst, avv - 0.5);
  }
  return worst;
}

void criterion4() {
  double m1, m2;
  {
    const Mesh mesh(1, 2 * pi, 7);
    const TensorOperators ops(lgl_rule(40, mesh.h()), 1);
    const AlbGenerator gen(mesh, 0, FieldSpec::constant(0.0), ops);
    std::vector<BasisSpace> sp;
    for (int e = 0; e < 7; ++e) {
      sp.push_back(gen.space(5));
      sp.back().element = e;
    }
    m1 = coercivity_margin(mesh, ops, sp);
  }
  {
    const Mesh mesh(2, 2 * pi, 3);
    const TensorOperators ops(lgl_rule(10, mesh.h()), 2);
    std::vector<BasisSpace> sp;
    for (int e = 0; e < 9; ++e) sp.push_back(polynomial_space(ops, e, 3));
    m2 = coercivity_margin(mesh, ops, sp);
  }
  note("min over 200 samples of a(v,v) - |||v|||^2/2 with |||v||| = 1: 1D ALB %.4f, 2D poly %.4f", m1, m2);
  char buf[128];
  std::snprintf(buf, sizeof buf, "coercivity a(v,v) >= |||v|||^2/2 (margins %.3f, %.3f)", m1, m2);
  record(4, m1 >= -1e-10 && m2 >= -1e-10, buf);
}

// --------------------------------------------------------------- sweeps

struct SweepRow {
  int N;
  double error, eta, xi, ej, etaj2, fe, fx;
  double dku_ratio = 1.0;   // max over elements of max(d^u/d, d/d^u)
  double etaj_ratio = 1.0;  // eta_J with d^u over eta_J with d
};

std::vector<SweepRow> sweep(const std::string& name, bool exact_dku, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline pl(preset(name));
  std::vector<SweepRow> rows;
  for (int N : pl.config().values) {
    const SweepResult r = pl.solve_point(N, true, exact_dku);
    const GlobalEstimate& g = *r.estimate;
    SweepRow row{N, g.error, g.eta, g.xi, g.jump_energy, g.eta_j2, 0, 0};
    int ce = 0, cx = 0;
    for (const auto& e : g.elements) {
      ce += e.c_eta >= 1.0;
      cx += e.c_xi <= 1.0;
    }
    row.fe = double(ce) / g.elements.size();
    row.fx = double(cx) / g.elements.size();
    if (exact_dku) {
      const NodalField& u = pl.reference_nodal();
      for (int e = 0; e < pl.mesh().element_count(); ++e) {
        const DkuResult dk = dku_exact(pl.ops(), u[e], r.solution->values[e]);
        const double d = r.constants[e].d;
        if (dk.degenerate || !(dk.value > 0.0) || !(d > 0.0)) continue;
        row.dku_ratio = std::max(row.dku_ratio, std::max(dk.value / d, d / dk.value));
      }
      row.etaj_ratio = std::sqrt(r.estimate_exact->eta_j2 / g.eta_j2);
    }
    rows.push_back(row);
    note("%-12s N=%2d err=%.4e eta=%.4e xi=%.4e E_J=%.4e eta_J^2=%.4e C_eta>=1 %.0f%% C_xi<=1 %.0f%%%s", name.c_str(),
         N, row.error, row.eta, row.xi, row.ej, row.etaj2, 100 * row.fe, 100 * row.fx,
         exact_dku ? (" dku/d<=" + std::to_string(row.dku_ratio) + " etaJ(du)/etaJ(d)=" + std::to_string(row.etaj_ratio)).c_str()
                   : "");
  }
  seconds = seconds_since(t0);
  note("%s sweep: %.1f s", name.c_str(), seconds);
  return rows;
}

const SweepRow* find_row(const std::vector<SweepRow>& rows, int N) {
  for (const auto& r : rows)
    if (r.N == N) return &r;
  return nullptr;
}

void criteria5and6() {
  double secs = 0;
  const auto rows = sweep("poisson_1d", false, secs);
  bool bracket = true;
  for (const auto& r : rows) bracket = bracket && r.xi <= r.error && r.error <= r.eta;
  const bool range = rows.front().error > 1e-2 && rows.back().error < 1e-7;
  char buf[200];
  std::snprintf(buf, sizeof buf, "1D V=0.01 bracketing %s, error %.2e -> %.2e, %.1f s", bracket ? "holds" : "violated",
                rows.front().error, rows.back().error, secs);
  record(5, bracket && range && secs < 60.0, buf);

  const SweepRow* r7 = find_row(rows, 7);
  const double ratio = r7->etaj2 / r7->ej;
  const bool mag = r7->ej / 2.0179e-8 < 10 && r7->ej / 2.0179e-8 > 0.1 && r7->etaj2 / 2.0182e-8 < 10 &&
                   r7->etaj2 / 2.0182e-8 > 0.1;
  note("N=7: E_J = %.4e (published 2.0179e-8), eta_J^2 = %.4e (published 2.0182e-8)", r7->ej, r7->etaj2);
  std::snprintf(buf, sizeof buf, "jump table row one: eta_J^2/E_J = %.4f, E_J = %.4e", ratio, r7->ej);
  record(6, ratio >= 1.0 && ratio <= 1.1 && mag, buf);
}

void criteria7and9() {
  double secs = 0;
  const auto rows = sweep("poisson_2d", true, secs);
  bool bracket = true, eff = true;
  double dmax = 0, jdev = 0;
  for (const auto& r : rows) {
    bracket = bracket && r.xi <= r.error && r.error <= r.eta;
    eff = eff && r.fe >= 0.95 && r.fx >= 0.95;
    dmax = std::max(dmax, r.dku_ratio);
    jdev = std::max(jdev, std::abs(r.etaj_ratio - 1.0));
  }
  if (const SweepRow* r = find_row(rows, 21))
    note("N=21: E_J = %.4e (published 1.2030e-5), eta_J^2 = %.4e (published 9.1593e-5)", r->ej, r->etaj2);
  char buf[200];
  std::snprintf(buf, sizeof buf, "2D V=0.01 bracketing %s, per-element effectivity >= 95%% %s, %.1f s",
                bracket ? "holds" : "violated", eff ? "holds" : "violated", secs);
  record(7, bracket && eff, buf);
  std::snprintf(buf, sizeof buf, "2D V=0.01 d^u vs d_kappa: max factor %.2f (<= 5), eta_J deviation %.1f%% (< 50%%)", dmax,
                100 * jdev);
  record(9, dmax <= 5.0 && jdev < 0.5, buf);
}

void criterion8() {
  const int c1 = count_negative_eigenvalues(default_gaussians_1d().build(2 * pi), 2 * pi, 1, 256);
  const int c2 = count_negative_eigenvalues(FieldSpec::constant(-16.5), 2 * pi, 2, 96);
  const int c3 = count_negative_eigenvalues(default_gaussians_2d().build(2 * pi), 2 * pi, 2, 32);
  note("negative eigenvalue counts: 1D Gaussian %d, 2D V=-16.5 %d, 2D Gaussian %d", c1, c2, c3);
  bool lower = true;
  std::string detail;
  for (const char* name : {"gaussian_1d", "helmholtz_2d", "gaussian_2d"}) {
    double secs = 0;
    const auto rows = sweep(name, true, secs);
    bool ok = true;
    int upper_misses = 0;
    for (const auto& r : rows) {
      ok = ok && r.xi <= r.error;
      upper_misses += r.error > r.eta;
    }
    lower = lower && ok;
    if (upper_misses) note("%s: eta below the error at %d N (no upper-bound guarantee when indefinite)", name, upper_misses);
    if (std::string(name) == "helmholtz_2d")
      if (const SweepRow* r = find_row(rows, 31))
        note("N=31: E_J = %.4e (published 4.7352e-3), eta_J^2 = %.4e (published 5.6649e-2)", r->ej, r->etaj2);
    if (std::string(name) == "gaussian_2d")
      if (const SweepRow* r = find_row(rows, 21))
        note("N=21: E_J = %.4e (published 1.6226e-3), eta_J^2 = %.4e (published 2.8348e-2)", r->ej, r->etaj2);
    if (std::string(name) == "gaussian_1d")
      if (const SweepRow* r = find_row(rows, 11))
        note("N=11: E_J = %.4e (published 6.4687e-11), eta_J^2 = %.4e (published 6.4697e-11)", r->ej, r->etaj2);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "indefinite: counts %d/%d/%d (want 3/49/26), xi <= error in all sweeps: %s", c1, c2,
                c3, lower ? "yes" : "no");
  record(8, c1 == 3 && c2 == 49 && c3 == 26 && lower, buf);
}

// ------------------------------------------------------------------ 10

void criterion10(std::chrono::steady_clock::time_point start) {
  bool ok = true;
  // Quadrature exactness up to degree 2 n_g - 3.
  double qerr = 0;
  for (int n : {5, 16, 40}) {
    const LglRule r = lgl_rule(n, 1.3);
    for (int k = 0; k <= 2 * n - 3; ++k) {
      double q = 0;
      for (int j = 0; j < n; ++j) q += r.weights[j] * std::pow(r.nodes[j] / 1.3, k);
      qerr = std::max(qerr, std::abs(q - 1.3 / (k + 1)));
    }
  }
  ok = ok && qerr <= 1e-12;
  note("quadrature exactness max error %.2e", qerr);

  // Projector idempotency and star-orthogonality.
  const TensorOperators ops(lgl_rule(12, 1.1), 2);
  const BasisSpace s = polynomial_space(ops, 0, 4);
  const Projector P(s, ops);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  double perr = 0;
  for (int k = 0; k < 10; ++k) {
    VectorXd v(ops.size()), c(s.size());
    for (auto& x : v) x = nd(gen);
    for (auto& x : c) x = nd(gen);
    const VectorXd pv = P.apply_pi(v), qv = P.apply_q(v), w = s.phi * c;
    perr = std::max(perr, (P.apply_pi(pv) - pv).norm() / v.norm());
    perr = std::max(perr, std::abs(ops.form(FormKind::star, qv, w)) /
                              std::sqrt(ops.form(FormKind::star, qv, qv) * ops.form(FormKind::star, w, w)));
  }
  ok = ok && perr <= 1e-10;
  note("projector idempotency/orthogonality max deviation %.2e", perr);

  // Element integration by parts (summation by parts on LGL grids).
  double ierr = 0;
  for (int k = 0; k < 10; ++k) {
    VectorXd u(ops.size()), v(ops.size());
    for (auto& x : u) x = nd(gen);
    for (auto& x : v) x = nd(gen);
    double rhs = -ops.weights().dot(ops.laplacian(u).cwiseProduct(v));
    for (int face = 0; face < 4; ++face) {
      const auto rows = ops.face_nodes(face_axis(face), face_side(face));
      const VectorXd du = ops.diff(face_axis(face), u);
      const VectorXd w = ops.face_weights(face_axis(face));
      for (std::size_t i = 0; i < rows.size(); ++i) rhs += normal_sign(face) * w[i] * du[rows[i]] * v[rows[i]];
    }
    const double lhs = ops.form(FormKind::grad, u, v);
    ierr = std::max(ierr, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
  }
  ok = ok && ierr <= 1e-10;
  note("integration by parts max relative deviation %.2e", ierr);

  // Scaling invariance of C_eta, C_xi under f -> s f; translation equivariance.
  ExperimentConfig base = preset("gaussian_1d");
  base.values = {7};
  Pipeline p1(base);
  const SweepResult r1 = p1.solve_point(7);
  ExperimentConfig scaled = base;
  for (auto& t : scaled.source.trig) t.amplitude *= -3.5;
  Pipeline p2(scaled);
  const SweepResult r2 = p2.solve_point(7);
  double serr = 0;
  for (std::size_t e = 0; e < r1.estimate->elements.size(); ++e) {
    const auto& a = r1.estimate->elements[e];
    const auto& b = r2.estimate->elements[e];
    serr = std::max({serr, std::abs(a.c_eta - b.c_eta) / a.c_eta, std::abs(a.c_xi - b.c_xi) / a.c_xi});
  }
  ok = ok && serr <= 1e-8;
  note("C_eta/C_xi scaling invariance max relative deviation %.2e", serr);

  ExperimentConfig moved = base;
  const double h = p1.mesh().h();
  for (auto& g : moved.potential.gaussians) g.center[0] += h;
  for (auto& t : moved.source.trig) t.phase -= t.wave[0] * h;
  Pipeline p3(moved);
  const SweepResult r3 = p3.solve_point(7);
  double terr = 0;
  const int K = p1.mesh().element_count();
  for (int e = 0; e < K; ++e) {
    const auto& a = r1.estimate->elements[e];
    const auto& b = r3.estimate->elements[(e + 1) % K];
    terr = std::max({terr, std::abs(a.eta_sum() - b.eta_sum()) / r1.estimate->eta,
                     std::abs(a.error - b.error) / r1.estimate->error});
  }
  ok = ok && terr <= 1e-7;
  note("translation equivariance max relative deviation %.2e", terr);

  const double secs = seconds_since(start);
  note("acceptance wall time so far %.1f s", secs);
  char buf[160];
  std::snprintf(buf, sizeof buf, "property checks %s; acceptance run %.0f s (< 600 s)", ok ? "hold" : "violated", secs);
  record(10, ok && secs < 600.0, buf);
}

void guarded(int id, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    record(id, false, std::string("aborted: ") + e.what());
  }
}

} // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criteria5and6);
  guarded(7, criteria7and9);
  guarded(8, criterion8);
  guarded(10, [&] { criterion10(start); });

  std::printf("\nSUMMARY\n");
  int passed = 0;
  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  for (const auto& v : verdicts) {
    std::printf("criterion %2d: %s\n", v.id, v.pass ? "PASS" : "FAIL");
    passed += v.pass;
  }
  std::printf("%d/%zu criteria pass\n", passed, verdicts.size());
  return verdicts.size() == 10 ? 0 : 1;
}

#ifndef DGPOST_EXPERIMENT_HPP
#define DGPOST_EXPERIMENT_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "basis.hpp"
#include "dg.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "field.hpp"
#include "local_constants.hpp"
#include "mesh.hpp"
#include "reference.hpp"
#include "tensor_ops.hpp"

namespace dgpost {

enum class ExperimentKind { constants_scaling, solve_estimate, dku_study };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::constants_scaling: return "constants_scaling";
    case ExperimentKind::solve_estimate: return "solve_estimate";
    case ExperimentKind::dku_study: return "dku_study";
  }
  return "?";
}

/// Field description as written in a config file.
struct FieldConfig {
  std::string kind = "constant";   // constant | gaussian_sum | trig_sum
  double value = 0.0;              // constant value or offset
  std::vector<GaussianTerm> gaussians;
  std::vector<TrigTerm> trig;

  bool operator==(const FieldConfig& o) const {
    if (kind != o.kind || value != o.value || gaussians.size() != o.gaussians.size() || trig.size() != o.trig.size())
      return false;
    for (std::size_t i = 0; i < gaussians.size(); ++i)
      if (gaussians[i].center != o.gaussians[i].center || gaussians[i].width != o.gaussians[i].width ||
          gaussians[i].magnitude != o.gaussians[i].magnitude)
        return false;
    for (std::size_t i = 0; i < trig.size(); ++i)
      if (trig[i].amplitude != o.trig[i].amplitude || trig[i].wave != o.trig[i].wave || trig[i].phase != o.trig[i].phase)
        return false;
    return true;
  }

  FieldSpec build(double L) const {
    if (kind == "constant") return FieldSpec::constant(value);
    if (kind == "gaussian_sum") return FieldSpec::gaussian_sum(gaussians, L, value);
    if (kind == "trig_sum") return FieldSpec::trig_sum(trig, value);
    throw ConfigError("unknown field kind '" + kind + "'", "kind");
  }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::solve_estimate;
  std::string name = "experiment";
  int dimension = 1;
  double domain_length = 2.0 * std::numbers::pi;
  int elements_per_axis = 7;
  int n_g = 40;
  std::uint64_t seed = 12345;

  std::string basis = "alb";       // alb | polynomial
  std::vector<int> values{3, 5, 7};
  int planewaves = 0;              // 0 -> default per dimension
  double drop_tol = default_drop_tol;

  FieldConfig potential;
  FieldConfig source;

  double theta = 1.0;
  PenaltyRule penalty = PenaltyRule::coercive;
  double penalty_value = 0.0;
  double penalty_floor = 1.0;

  int n_ref = 0;                   // 0 -> default per dimension

  ConstantsMethod method = ConstantsMethod::lobpcg;
  double tol = 1e-3;
  int max_it = 500;
  bool precondition = true;

  std::string output_directory = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& field) {
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + tok + "'", field);
    }
  }
  return out;
}

template <typename T>
T get_required(const boost::property_tree::ptree& pt, const std::string& key) {
  auto v = pt.get_optional<std::string>(key);
  if (!v) throw ConfigError("missing key", key);
  try {
    return boost::lexical_cast<T>(*v);
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError("bad value '" + *v + "'", key);
  }
}

template <typename T>
T get_or(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  auto v = pt.get_optional<std::string>(key);
  if (!v) return fallback;
  try {
    return boost::lexical_cast<T>(*v);
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError("bad value '" + *v + "'", key);
  }
}

inline double get_double(const boost::property_tree::ptree& pt, const std::string& key, double fallback) {
  auto v = pt.get_optional<std::string>(key);
  if (!v) return fallback;
  const auto nums = parse_numbers(*v, key);
  if (nums.size() != 1) throw ConfigError("expected one number", key);
  return nums[0];
}

// Gaussian terms: "c_1 .. c_d width magnitude; ..."
inline std::string emit_gaussians(const std::vector<GaussianTerm>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) s += "; ";
    for (double c : g[i].center) s += fmt_double(c) + " ";
    s += fmt_double(g[i].width) + " " + fmt_double(g[i].magnitude);
  }
  return s;
}

// Trig terms: "amplitude k_1 .. k_d phase; ..."
inline std::string emit_trig(const std::vector<TrigTerm>& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += "; ";
    s += fmt_double(t[i].amplitude) + " ";
    for (double k : t[i].wave) s += fmt_double(k) + " ";
    s += fmt_double(t[i].phase);
  }
  return s;
}

inline FieldConfig parse_field(const boost::property_tree::ptree& pt, const std::string& section, int dim) {
  FieldConfig f;
  f.kind = get_or<std::string>(pt, section + ".kind", "constant");
  f.value = get_double(pt, section + ".value", 0.0);
  if (f.kind == "gaussian_sum") {
    const std::string key = section + ".terms";
    const std::string spec = get_required<std::string>(pt, key);
    for (const auto& part : split(spec, ';')) {
      const auto nums = parse_numbers(part, key);
      if (nums.empty()) continue;
      if (static_cast<int>(nums.size()) != dim + 2)
        throw ConfigError("gaussian term needs dimension + 2 numbers", key);
      GaussianTerm g;
      g.center.assign(nums.begin(), nums.begin() + dim);
      g.width = nums[dim];
      g.magnitude = nums[dim + 1];
      if (!(g.width > 0.0)) throw ConfigError("gaussian width must be positive", key);
      f.gaussians.push_back(g);
    }
  } else if (f.kind == "trig_sum") {
    const std::string key = section + ".terms";
    const std::string spec = get_required<std::string>(pt, key);
    for (const auto& part : split(spec, ';')) {
      const auto nums = parse_numbers(part, key);
      if (nums.empty()) continue;
      if (static_cast<int>(nums.size()) != dim + 2)
        throw ConfigError("trig term needs dimension + 2 numbers", key);
      TrigTerm t;
      t.amplitude = nums[0];
      t.wave.assign(nums.begin() + 1, nums.begin() + 1 + dim);
      t.phase = nums[dim + 1];
      f.trig.push_back(t);
    }
  } else if (f.kind != "constant") {
    throw ConfigError("unknown field kind '" + f.kind + "'", section + ".kind");
  }
  return f;
}

inline void emit_field(std::ostream& os, const std::string& section, const FieldConfig& f) {
  os << "[" << section << "]\n";
  os << "kind = " << f.kind << "\n";
  os << "value = " << fmt_double(f.value) << "\n";
  if (f.kind == "gaussian_sum") os << "terms = " << emit_gaussians(f.gaussians) << "\n";
  if (f.kind == "trig_sum") os << "terms = " << emit_trig(f.trig) << "\n";
  os << "\n";
}

} // namespace detail

/// Check invariants of a parsed config; throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c) {
  if (c.dimension < 1 || c.dimension > 3) throw ConfigError("dimension must be 1, 2 or 3", "experiment.dimension");
  if (c.dimension == 3 && c.kind != ExperimentKind::constants_scaling)
    throw ConfigError("3D is supported for constants only", "experiment.dimension");
  if (!(c.domain_length > 0.0)) throw ConfigError("must be positive", "experiment.domain_length");
  if (c.elements_per_axis < 1) throw ConfigError("must be positive", "experiment.elements_per_axis");
  if (c.n_g < 2) throw ConfigError("must be at least 2", "experiment.n_g");
  if (c.output_directory.empty()) throw ConfigError("must be nonempty", "output.directory");
  if (c.values.empty()) throw ConfigError("list must be nonempty", "basis.values");
  for (int v : c.values)
    if (v < (c.basis == "polynomial" ? 0 : 1)) throw ConfigError("entries must be positive", "basis.values");
  if (c.basis != "alb" && c.basis != "polynomial") throw ConfigError("must be alb or polynomial", "basis.kind");
  if (c.planewaves < 0) throw ConfigError("must be nonnegative", "basis.planewaves");
  if (!(c.drop_tol > 0.0)) throw ConfigError("must be positive", "basis.drop_tol");
  if (c.theta != 1.0 && c.theta != -1.0) throw ConfigError("must be 1 or -1", "dg.theta");
  if (c.penalty == PenaltyRule::manual && !(c.penalty_value > 0.0))
    throw ConfigError("manual penalty must be positive", "dg.penalty_value");
  if (!(c.penalty_floor > 0.0)) throw ConfigError("must be positive", "dg.penalty_floor");
  if (c.n_ref < 0) throw ConfigError("must be nonnegative", "reference.n_ref");
  if (!(c.tol > 0.0)) throw ConfigError("must be positive", "constants.tol");
  if (c.max_it < 1) throw ConfigError("must be positive", "constants.max_it");
  for (const auto& [f, key] : {std::pair{&c.potential, "potential.terms"}, std::pair{&c.source, "source.terms"}}) {
    for (const auto& g : f->gaussians)
      if (static_cast<int>(g.center.size()) != c.dimension) throw ConfigError("gaussian center dimension mismatch", key);
    for (const auto& t : f->trig)
      if (static_cast<int>(t.wave.size()) != c.dimension) throw ConfigError("wave vector dimension mismatch", key);
  }
}

inline ExperimentConfig parse_config(std::istream& is) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message(), "");
  }
  using detail::get_double;
  using detail::get_or;
  ExperimentConfig c;
  const std::string kind = get_or<std::string>(pt, "experiment.kind", "solve_estimate");
  if (kind == "constants_scaling") c.kind = ExperimentKind::constants_scaling;
  else if (kind == "solve_estimate") c.kind = ExperimentKind::solve_estimate;
  else if (kind == "dku_study") c.kind = ExperimentKind::dku_study;
  else throw ConfigError("unknown experiment kind '" + kind + "'", "experiment.kind");
  c.name = get_or<std::string>(pt, "experiment.name", c.name);
  c.dimension = get_or<int>(pt, "experiment.dimension", c.dimension);
  c.domain_length = get_double(pt, "experiment.domain_length", c.domain_length);
  c.elements_per_axis = get_or<int>(pt, "experiment.elements_per_axis", c.elements_per_axis);
  c.n_g = get_or<int>(pt, "experiment.n_g", c.n_g);
  c.seed = get_or<std::uint64_t>(pt, "experiment.seed", c.seed);

  c.basis = get_or<std::string>(pt, "basis.kind", c.basis);
  if (auto v = pt.get_optional<std::string>("basis.values")) {
    c.values.clear();
    for (double x : detail::parse_numbers(*v, "basis.values")) {
      if (x != std::floor(x)) throw ConfigError("entries must be integers", "basis.values");
      c.values.push_back(static_cast<int>(x));
    }
  }
  c.planewaves = get_or<int>(pt, "basis.planewaves", c.planewaves);
  c.drop_tol = get_double(pt, "basis.drop_tol", c.drop_tol);

  c.potential = detail::parse_field(pt, "potential", c.dimension);
  c.source = detail::parse_field(pt, "source", c.dimension);

  c.theta = get_double(pt, "dg.theta", c.theta);
  const std::string pen = get_or<std::string>(pt, "dg.penalty", "coercive");
  if (pen == "coercive") c.penalty = PenaltyRule::coercive;
  else if (pen == "conservative") c.penalty = PenaltyRule::conservative;
  else if (pen == "manual") c.penalty = PenaltyRule::manual;
  else throw ConfigError("unknown penalty rule '" + pen + "'", "dg.penalty");
  c.penalty_value = get_double(pt, "dg.penalty_value", c.penalty_value);
  c.penalty_floor = get_double(pt, "dg.penalty_floor", c.penalty_floor);

  c.n_ref = get_or<int>(pt, "reference.n_ref", c.n_ref);

  const std::string method = get_or<std::string>(pt, "constants.method", "lobpcg");
  if (method == "lobpcg") c.method = ConstantsMethod::lobpcg;
  else if (method == "dense") c.method = ConstantsMethod::dense;
  else throw ConfigError("unknown method '" + method + "'", "constants.method");
  c.tol = get_double(pt, "constants.tol", c.tol);
  c.max_it = get_or<int>(pt, "constants.max_it", c.max_it);
  const std::string pre = get_or<std::string>(pt, "constants.precondition", "true");
  if (pre != "true" && pre != "false") throw ConfigError("must be true or false", "constants.precondition");
  c.precondition = pre == "true";
  c.output_directory = get_or<std::string>(pt, "output.directory", c.output_directory);
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file '" + path + "'");
  return parse_config(is);
}

/// Canonical text form; parse_config_text(emit_config(c)) == c.
inline std::string emit_config(const ExperimentConfig& c) {
  using detail::fmt_double;
  std::ostringstream os;
  os << "[experiment]\n";
  os << "kind = " << to_string(c.kind) << "\n";
  os << "name = " << c.name << "\n";
  os << "dimension = " << c.dimension << "\n";
  os << "domain_length = " << fmt_double(c.domain_length) << "\n";
  os << "elements_per_axis = " << c.elements_per_axis << "\n";
  os << "n_g = " << c.n_g << "\n";
  os << "seed = " << c.seed << "\n\n";
  os << "[basis]\n";
  os << "kind = " << c.basis << "\n";
  os << "values =";
  for (int v : c.values) os << ' ' << v;
  os << "\n";
  os << "planewaves = " << c.planewaves << "\n";
  os << "drop_tol = " << fmt_double(c.drop_tol) << "\n\n";
  detail::emit_field(os, "potential", c.potential);
  detail::emit_field(os, "source", c.source);
  os << "[dg]\n";
  os << "theta = " << fmt_double(c.theta) << "\n";
  os << "penalty = " << to_string(c.penalty) << "\n";
  os << "penalty_value = " << fmt_double(c.penalty_value) << "\n";
  os << "penalty_floor = " << fmt_double(c.penalty_floor) << "\n\n";
  os << "[reference]\n";
  os << "n_ref = " << c.n_ref << "\n\n";
  os << "[constants]\n";
  os << "method = " << to_string(c.method) << "\n";
  os << "tol = " << fmt_double(c.tol) << "\n";
  os << "max_it = " << c.max_it << "\n";
  os << "precondition = " << (c.precondition ? "true" : "false") << "\n\n";
  os << "[output]\n";
  os << "directory = " << c.output_directory << "\n";
  return os.str();
}

/// 64-bit FNV-1a of the canonical config text, as 16 hex digits. The output
/// directory is not part of the hash.
inline std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig k = c;
  k.output_directory.clear();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : emit_config(k)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Three negative Gaussians on (0, 2pi); -d^2/dx^2 + V has 3 negative eigenvalues.
inline FieldConfig default_gaussians_1d() {
  FieldConfig f;
  f.kind = "gaussian_sum";
  f.gaussians = {GaussianTerm{{1.5}, 0.35, -4.5}, GaussianTerm{{3.3}, 0.3, -3.6}, GaussianTerm{{4.9}, 0.4, -5.4}};
  return f;
}

/// Four negative Gaussians on (0, 2pi)^2; -Lap + V has 26 negative eigenvalues.
inline FieldConfig default_gaussians_2d() {
  FieldConfig f;
  f.kind = "gaussian_sum";
  f.gaussians = {GaussianTerm{{1.6, 1.4}, 0.5, -52.85}, GaussianTerm{{4.6, 1.8}, 0.45, -47.565},
                 GaussianTerm{{1.9, 4.7}, 0.55, -58.135}, GaussianTerm{{4.4, 4.5}, 0.5, -42.28}};
  return f;
}

/// Stored experiment setups: poisson_1d, poisson_2d, gaussian_1d,
/// helmholtz_2d, gaussian_2d. The files in configs/ are their emitted form.
inline ExperimentConfig preset(const std::string& name) {
  constexpr double pi = std::numbers::pi;
  ExperimentConfig c;
  c.name = name;
  c.output_directory = "out/" + name;
  FieldConfig sin6;
  sin6.kind = "trig_sum";
  sin6.trig = {TrigTerm{1.0, {6.0}, -pi / 2}};
  FieldConfig cos3cos1;
  cos3cos1.kind = "trig_sum";
  cos3cos1.trig = {TrigTerm{0.5, {3.0, 1.0}, 0.0}, TrigTerm{0.5, {3.0, -1.0}, 0.0}};
  auto constant = [](double v) {
    FieldConfig f;
    f.value = v;
    return f;
  };
  if (name == "poisson_1d" || name == "gaussian_1d") {
    c.dimension = 1;
    c.elements_per_axis = 7;
    c.n_g = 40;
    c.values = {3, 5, 7, 9, 11, 13, 15};
    c.planewaves = 48;
    c.n_ref = 256;
    c.potential = name == "poisson_1d" ? constant(0.01) : default_gaussians_1d();
    c.source = sin6;
    return c;
  }
  if (name == "poisson_2d" || name == "helmholtz_2d" || name == "gaussian_2d") {
    c.dimension = 2;
    c.elements_per_axis = 5;
    c.n_g = 30;
    c.values = {11, 21, 31, 41};
    c.planewaves = 32;
    c.n_ref = 96;
    c.source = cos3cos1;
    if (name == "poisson_2d") {
      c.potential = constant(0.01);
    } else if (name == "gaussian_2d") {
      c.potential = default_gaussians_2d();
    } else {
      c.values = {21, 31, 41, 51};
      c.potential = constant(-16.5);
      c.source.kind = "gaussian_sum";
      c.source.trig.clear();
      c.source.gaussians = {GaussianTerm{{pi, pi}, 0.5, 1.0}};
    }
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'", "experiment.name");
}

/// One point of a sweep over N (ALB) or p (polynomial).
struct SweepResult {
  int value = 0;
  std::vector<BasisSpace> spaces;
  std::vector<LocalConstants> constants;
  std::optional<DgSolution> solution;
  std::optional<GlobalEstimate> estimate;        // d^u approximated by d_kappa
  std::optional<GlobalEstimate> estimate_exact;  // d^u from the reference
};

/// Mesh, operators, basis generators and the reference solution of one config.
class Pipeline {
public:
  explicit Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    mesh_ = std::make_unique<Mesh>(cfg_.dimension, cfg_.domain_length, cfg_.elements_per_axis);
    ops_ = std::make_unique<TensorOperators>(lgl_rule(cfg_.n_g, mesh_->h()), cfg_.dimension);
    V_ = cfg_.potential.build(cfg_.domain_length);
    f_ = cfg_.source.build(cfg_.domain_length);
  }

  const ExperimentConfig& config() const { return cfg_; }
  const Mesh& mesh() const { return *mesh_; }
  const TensorOperators& ops() const { return *ops_; }
  const FieldSpec& potential() const { return V_; }
  const FieldSpec& source() const { return f_; }

  int reference_points() const { return cfg_.n_ref > 0 ? cfg_.n_ref : default_reference_points(cfg_.dimension); }

  const ReferenceSolution& reference() {
    if (!ref_) ref_ = solve_reference(V_, f_, cfg_.domain_length, cfg_.dimension, reference_points());
    return *ref_;
  }
  const NodalField& reference_nodal() {
    if (!ref_nodal_) ref_nodal_ = restrict_to_mesh(reference(), *mesh_, *ops_);
    return *ref_nodal_;
  }

  PenaltyOptions penalty() const { return {cfg_.penalty, cfg_.penalty_value, cfg_.penalty_floor}; }
  ConstantsOptions constants_options() const {
    ConstantsOptions o;
    o.method = cfg_.method;
    o.tol = cfg_.tol;
    o.max_it = cfg_.max_it;
    o.seed = cfg_.seed;
    o.precondition = cfg_.precondition;
    return o;
  }

  std::vector<BasisSpace> spaces(int value) {
    std::vector<BasisSpace> out;
    if (cfg_.basis == "polynomial") {
      // Uniform mesh: every element has the same nodal table.
      const BasisSpace s = polynomial_space(*ops_, 0, value, cfg_.drop_tol);
      for (int e = 0; e < mesh_->element_count(); ++e) {
        out.push_back(s);
        out.back().element = e;
      }
      return out;
    }
    if (gens_.empty()) {
      AlbOptions ao;
      ao.planewaves = cfg_.planewaves;
      ao.drop_tol = cfg_.drop_tol;
      const int count = V_.is_constant() ? 1 : mesh_->element_count();
      for (int e = 0; e < count; ++e) gens_.emplace_back(*mesh_, e, V_, *ops_, ao);
    }
    if (V_.is_constant()) {
      // Translation invariance: every element gets the same nodal table.
      const BasisSpace s = gens_[0].space(value);
      for (int e = 0; e < mesh_->element_count(); ++e) {
        out.push_back(s);
        out.back().element = e;
      }
      return out;
    }
    for (const auto& g : gens_) out.push_back(g.space(value));
    return out;
  }

  std::vector<LocalConstants> constants(const std::vector<BasisSpace>& spaces) const {
    std::vector<LocalConstants> out;
    const ConstantsOptions o = constants_options();
    if (cfg_.basis == "polynomial" || V_.is_constant()) {
      LocalConstants lc = compute_local_constants(spaces[0], *ops_, cfg_.theta, penalty(), o);
      for (const auto& s : spaces) {
        out.push_back(lc);
        out.back().element = s.element;
      }
      return out;
    }
    for (const auto& s : spaces) out.push_back(compute_local_constants(s, *ops_, cfg_.theta, penalty(), o));
    return out;
  }

  /// Spaces and constants only.
  SweepResult constants_point(int value) {
    SweepResult r;
    r.value = value;
    r.spaces = spaces(value);
    r.constants = constants(r.spaces);
    return r;
  }

  /// Solve and estimate; `exact_dku` also evaluates the estimate with the
  /// reference-based d^u.
  SweepResult solve_point(int value, bool with_estimate = true, bool exact_dku = false) {
    SweepResult r = constants_point(value);
    std::vector<double> gamma;
    for (const auto& c : r.constants) gamma.push_back(c.gamma);
    problem_ = std::make_unique<DgProblem>(*mesh_, *ops_, r.spaces, V_, f_, cfg_.theta, gamma);
    r.solution = solve(*problem_);
    if (with_estimate) {
      const NodalField& u = reference_nodal();
      r.estimate = estimate(*problem_, r.solution->values, r.constants, DkuMode::approx_dk, &u);
      if (exact_dku)
        r.estimate_exact = estimate(*problem_, r.solution->values, r.constants, DkuMode::exact_reference, &u);
    }
    return r;
  }

  /// The problem of the last solve_point call.
  const DgProblem& last_problem() const {
    if (!problem_) throw InvalidArgument("no problem solved yet");
    return *problem_;
  }

private:
  ExperimentConfig cfg_;
  std::unique_ptr<Mesh> mesh_;
  std::unique_ptr<TensorOperators> ops_;
  FieldSpec V_;
  FieldSpec f_;
  std::vector<AlbGenerator> gens_;
  std::optional<ReferenceSolution> ref_;
  std::optional<NodalField> ref_nodal_;
  std::unique_ptr<DgProblem> problem_;
};

/// Least-squares slope of log y against log x (entries with y <= 0 skipped).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  return os;
}

inline void write_plotdata(const std::filesystem::path& p, const std::vector<double>& x, const std::vector<double>& y) {
  auto os = open_out(p);
  os << std::setprecision(17);
  for (std::size_t i = 0; i < x.size(); ++i) os << x[i] << ' ' << y[i] << '\n';
}

// JSON cannot carry NaN or infinity; map them to null.
inline nlohmann::ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::ordered_json summary_header(const ExperimentConfig& c, const std::string& command) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = config_hash(c);
  j["experiment"] = to_string(c.kind);
  j["name"] = c.name;
  j["dimension"] = c.dimension;
  j["elements_per_axis"] = c.elements_per_axis;
  j["n_g"] = c.n_g;
  j["basis"] = c.basis;
  j["penalty_rule"] = to_string(c.penalty);
  j["theta"] = c.theta;
  return j;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

} // namespace detail

/// constants: per value a^2, b^2, d^2 (element 0 for polynomial spaces, all
/// elements otherwise) with log-log slopes against the sweep value.
inline nlohmann::ordered_json run_constants(Pipeline& pl, const std::filesystem::path& out) {
  const auto& c = pl.config();
  std::filesystem::create_directories(out);
  auto csv = detail::open_out(out / "constants.csv");
  csv << "value,element,N,a2,b2,d2,gamma,a2_p2_over_h2,d2_h_over_p2,method,iterations,converged\n"
      << std::setprecision(17);
  std::vector<double> xs, a2s, b2s, d2s;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const double h = pl.mesh().h();
  for (int v : c.values) {
    SweepResult r = pl.constants_point(v);
    const std::size_t count = c.basis == "polynomial" ? 1 : r.constants.size();
    for (std::size_t e = 0; e < count; ++e) {
      const LocalConstants& lc = r.constants[e];
      const double p = std::max(v, 1);
      csv << v << ',' << lc.element << ',' << r.spaces[e].size() << ',' << lc.a * lc.a << ',' << lc.b * lc.b << ','
          << lc.d * lc.d << ',' << lc.gamma << ',' << lc.a * lc.a * p * p / (h * h) << ',' << lc.d * lc.d * h / (p * p)
          << ',' << to_string(lc.method) << ',' << std::max(lc.iterations_a, lc.iterations_b) << ','
          << (lc.converged ? 1 : 0) << '\n';
    }
    const LocalConstants& l0 = r.constants[0];
    xs.push_back(v);
    a2s.push_back(l0.a * l0.a);
    b2s.push_back(l0.b * l0.b);
    d2s.push_back(l0.d * l0.d);
    nlohmann::ordered_json row;
    row["value"] = v;
    row["N"] = r.spaces[0].size();
    row["a2"] = detail::num(l0.a * l0.a);
    row["b2"] = detail::num(l0.b * l0.b);
    row["d2"] = detail::num(l0.d * l0.d);
    row["converged"] = l0.converged;
    rows.push_back(row);
  }
  detail::write_plotdata(out / "a2.dat", xs, a2s);
  detail::write_plotdata(out / "b2.dat", xs, b2s);
  detail::write_plotdata(out / "d2.dat", xs, d2s);
  nlohmann::ordered_json j = detail::summary_header(c, "constants");
  j["rows"] = rows;
  j["slope_a2"] = detail::num(loglog_slope(xs, a2s));
  j["slope_b2"] = detail::num(loglog_slope(xs, b2s));
  j["slope_d2"] = detail::num(loglog_slope(xs, d2s));
  detail::write_json(out / "summary.json", j);
  return j;
}

/// solve (with_estimate = false) or estimate: per value solution, error,
/// bounds and the jump-term table.
inline nlohmann::ordered_json run_solve(Pipeline& pl, const std::filesystem::path& out, bool with_estimate) {
  const auto& c = pl.config();
  std::filesystem::create_directories(out);
  const std::string command = with_estimate ? "estimate" : "solve";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::vector<double> xs, errs, etas, xis;
  std::ofstream table;
  if (with_estimate) {
    table = detail::open_out(out / "sweep.csv");
    table << "problem,N,E_J,eta_J2\n" << std::setprecision(17);
  }
  const NodalField& u = pl.reference_nodal();
  {
    auto os = detail::open_out(out / "reference.csv");
    write_field_csv(os, pl.mesh(), pl.ops(), u);
  }
  for (int v : c.values) {
    SweepResult r = pl.solve_point(v, with_estimate);
    const DgProblem& pb = pl.last_problem();
    const std::string tag = std::to_string(v);
    {
      auto os = detail::open_out(out / ("solution_" + tag + ".csv"));
      write_field_csv(os, pl.mesh(), pl.ops(), r.solution->values);
    }
    {
      auto os = detail::open_out(out / ("constants_" + tag + ".csv"));
      write_constants_csv(os, r.constants);
    }
    nlohmann::ordered_json row;
    row["value"] = v;
    row["dofs"] = pb.dofs();
    row["rcond"] = detail::num(r.solution->rcond);
    row["solver_residual"] = detail::num(r.solution->residual);
    bool converged = true;
    for (const auto& lc : r.constants) converged = converged && lc.converged;
    row["constants_converged"] = converged;
    const EnergyError err = energy_error(pb, r.solution->values, u, default_variant(pb));
    row["error"] = detail::num(err.global);
    xs.push_back(v);
    errs.push_back(err.global);
    if (with_estimate) {
      const GlobalEstimate& g = *r.estimate;
      auto os = detail::open_out(out / ("estimates_" + tag + ".csv"));
      write_estimates_csv(os, g.elements);
      row["eta"] = detail::num(g.eta);
      row["xi"] = detail::num(g.xi);
      row["E_J"] = detail::num(g.jump_energy);
      row["eta_J2"] = detail::num(g.eta_j2);
      int ce = 0, cx = 0;
      for (const auto& e : g.elements) {
        ce += e.c_eta >= 1.0;
        cx += e.c_xi <= 1.0;
      }
      row["fraction_C_eta_ge_1"] = static_cast<double>(ce) / g.elements.size();
      row["fraction_C_xi_le_1"] = static_cast<double>(cx) / g.elements.size();
      row["indefinite"] = g.indefinite;
      if (g.indefinite) {
        row["note"] = "operator indefinite: eta may underestimate the error for small N";
        row["indefinite_extra"] = g.indefinite_extra ? detail::num(*g.indefinite_extra) : nullptr;
      }
      etas.push_back(g.eta);
      xis.push_back(g.xi);
      table << c.name << ',' << v << ',' << g.jump_energy << ',' << g.eta_j2 << '\n';
    }
    rows.push_back(row);
  }
  detail::write_plotdata(out / "error.dat", xs, errs);
  if (with_estimate) {
    detail::write_plotdata(out / "eta.dat", xs, etas);
    detail::write_plotdata(out / "xi.dat", xs, xis);
  }
  nlohmann::ordered_json j = detail::summary_header(c, command);
  j["n_ref"] = pl.reference_points();
  j["reference_method"] = pl.reference().method;
  j["reference_residual"] = detail::num(pl.reference().residual);
  j["rows"] = rows;
  detail::write_json(out / "summary.json", j);
  return j;
}

/// dku-study: per element d^u (reference), d_kappa and b_kappa gamma_kappa.
inline nlohmann::ordered_json run_dku(Pipeline& pl, const std::filesystem::path& out) {
  const auto& c = pl.config();
  std::filesystem::create_directories(out);
  auto csv = detail::open_out(out / "dku.csv");
  csv << "value,element,dku_exact,degenerate,d,b_gamma\n" << std::setprecision(17);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const NodalField& u = pl.reference_nodal();
  for (int v : c.values) {
    SweepResult r = pl.solve_point(v, true, true);
    double worst = 1.0;
    for (int e = 0; e < pl.mesh().element_count(); ++e) {
      const DkuResult dk = dku_exact(pl.ops(), u[e], r.solution->values[e]);
      const LocalConstants& lc = r.constants[e];
      csv << v << ',' << e << ',' << dk.value << ',' << (dk.degenerate ? 1 : 0) << ',' << lc.d << ','
          << lc.b * lc.gamma << '\n';
      if (!dk.degenerate && dk.value > 0.0 && lc.d > 0.0)
        worst = std::max(worst, std::max(dk.value / lc.d, lc.d / dk.value));
    }
    nlohmann::ordered_json row;
    row["value"] = v;
    row["max_ratio_dku_d"] = detail::num(worst);
    row["eta_J_exact_over_approx"] = detail::num(std::sqrt(r.estimate_exact->eta_j2 / r.estimate->eta_j2));
    rows.push_back(row);
  }
  nlohmann::ordered_json j = detail::summary_header(c, "dku-study");
  j["rows"] = rows;
  detail::write_json(out / "summary.json", j);
  return j;
}

} // namespace dgpost

#endif

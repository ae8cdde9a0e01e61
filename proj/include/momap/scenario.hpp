#pragma once

// Scenario files: a JSON tree merged over per-system templates, validated
// key by key, then run to diagnostics CSV, snapshots and a run manifest.

#include "momap/berry.hpp"
#include "momap/classical.hpp"
#include "momap/diagnostics.hpp"
#include "momap/koopman.hpp"
#include "momap/mixtures.hpp"
#include "momap/quantum.hpp"
#include "momap/random.hpp"
#include "momap/uhlmann.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

namespace momap {

using Json = nlohmann::json;

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

inline constexpr const char* scenario_schema = "momap-scenario/1";
inline constexpr const char* manifest_schema = "momap-run-manifest/1";
inline constexpr const char* momap_version = "1.0.0";

enum class SystemKind { quantum, mixture, berry, klimontovich, kvn, kvh, liouville, uhlmann, hybrid };

inline const std::vector<std::pair<std::string, SystemKind>>& system_kinds() {
  static const std::vector<std::pair<std::string, SystemKind>> k{
      {"quantum", SystemKind::quantum}, {"mixture", SystemKind::mixture},   {"berry", SystemKind::berry},
      {"klimontovich", SystemKind::klimontovich}, {"kvn", SystemKind::kvn}, {"kvh", SystemKind::kvh},
      {"liouville", SystemKind::liouville}, {"uhlmann", SystemKind::uhlmann}, {"hybrid", SystemKind::hybrid}};
  return k;
}

inline bool phase_field_system(SystemKind s) {
  return s == SystemKind::kvn || s == SystemKind::kvh || s == SystemKind::liouville;
}
inline bool hilbert_system(SystemKind s) {
  return s == SystemKind::quantum || s == SystemKind::mixture || s == SystemKind::uhlmann || s == SystemKind::hybrid;
}

// ---------------------------------------------------------------------------
// Templates

namespace schema {

inline Json phase_hamiltonian(const std::string& kind) {
  if (kind == "harmonic") return {{"kind", kind}, {"omega", 1.0}};
  if (kind == "free") return {{"kind", kind}};
  if (kind == "pendulum") return {{"kind", kind}, {"g", 1.0}};
  if (kind == "quartic") return {{"kind", kind}, {"lambda", 1.0}};
  if (kind == "linear") return {{"kind", kind}, {"alpha", 1.0}, {"beta", 0.0}};
  if (kind == "polynomial") return {{"kind", kind}, {"coefficients", Json::array({Json::array({0.0})})}};
  throw SchemaError("hamiltonian.kind: unknown phase-space Hamiltonian '" + kind +
                    "' (harmonic, free, pendulum, quartic, linear, polynomial)");
}

inline Json hilbert_hamiltonian(const std::string& kind) {
  if (kind == "random_hermitian") return {{"kind", kind}, {"dim", 4}, {"scale", 1.0}};
  if (kind == "matrix") return {{"kind", kind}, {"re", Json::array()}, {"im", Json::array()}};
  if (kind == "diagonal") return {{"kind", kind}, {"energies", Json::array({0.0, 1.0})}};
  throw SchemaError("hamiltonian.kind: unknown Hilbert-space Hamiltonian '" + kind + "' (random_hermitian, matrix, diagonal)");
}

inline Json hamiltonian(SystemKind s, const std::string& kind) {
  if (s == SystemKind::berry) {
    if (kind != "chern_two_level") throw SchemaError("hamiltonian.kind: berry scenarios support chern_two_level only");
    return {{"kind", kind}, {"mass", 1.0}};
  }
  return hilbert_system(s) ? hilbert_hamiltonian(kind) : phase_hamiltonian(kind);
}

inline std::string default_hamiltonian(SystemKind s) {
  if (s == SystemKind::berry) return "chern_two_level";
  return hilbert_system(s) ? "random_hermitian" : "harmonic";
}

inline Json initial(SystemKind s, const std::string& recipe) {
  auto bad = [&](const char* options) {
    return SchemaError("initial.recipe: unknown recipe '" + recipe + "' (" + options + ")");
  };
  switch (s) {
    case SystemKind::kvn:
    case SystemKind::kvh:
    case SystemKind::liouville:
      if (recipe == "gaussian")
        return {{"recipe", recipe}, {"q0", 0.0},      {"p0", 0.0},         {"sigma_q", 1.0},
                {"sigma_p", 1.0},   {"wavenumber", 0.0}, {"normalize", true}};
      if (s == SystemKind::liouville && recipe == "kvh_clebsch")
        return {{"recipe", recipe}, {"q0", 0.0}, {"p0", 0.0}, {"sigma_q", 1.0}, {"sigma_p", 1.0}, {"wavenumber", 0.0}};
      throw bad(s == SystemKind::liouville ? "gaussian, kvh_clebsch" : "gaussian");
    case SystemKind::klimontovich:
      if (recipe == "random_gaussian") return {{"recipe", recipe}, {"particles", 16}, {"q0", 0.0}, {"p0", 0.0}, {"spread", 1.0}};
      if (recipe == "file") return {{"recipe", recipe}, {"path", ""}};
      throw bad("random_gaussian, file");
    case SystemKind::quantum:
      if (recipe == "random_unit") return {{"recipe", recipe}};
      if (recipe == "basis") return {{"recipe", recipe}, {"index", 0}};
      throw bad("random_unit, basis");
    case SystemKind::mixture:
      if (recipe == "random_family") return {{"recipe", recipe}};
      if (recipe == "file") return {{"recipe", recipe}, {"path", ""}};
      throw bad("random_family, file");
    case SystemKind::uhlmann:
      if (recipe == "random_w") return {{"recipe", recipe}, {"cols", 2}, {"scale", 0.5}};
      throw bad("random_w");
    case SystemKind::hybrid:
      if (recipe == "nilpotent") return {{"recipe", recipe}, {"c", 0.4}};
      if (recipe == "pinned_non_psd") return {{"recipe", recipe}};
      throw bad("nilpotent, pinned_non_psd");
    case SystemKind::berry:
      if (recipe == "lower_band") return {{"recipe", recipe}};
      throw bad("lower_band");
  }
  throw bad("");
}

inline std::string default_recipe(SystemKind s) {
  switch (s) {
    case SystemKind::kvn:
    case SystemKind::kvh:
    case SystemKind::liouville: return "gaussian";
    case SystemKind::klimontovich: return "random_gaussian";
    case SystemKind::quantum: return "random_unit";
    case SystemKind::mixture: return "random_family";
    case SystemKind::uhlmann: return "random_w";
    case SystemKind::hybrid: return "nilpotent";
    case SystemKind::berry: return "lower_band";
  }
  return "";
}

inline Json diagnostics(SystemKind s) {
  switch (s) {
    case SystemKind::quantum: return {"norm", "energy", "noether_energy", "phase_charge"};
    case SystemKind::mixture: return {"trace", "energy", "commuting_square"};
    case SystemKind::berry: return {"wilson_flux", "fd_flux", "right_leg_relative_error"};
    case SystemKind::klimontovich: return {"energy", "weight_sum", "centroid_q", "centroid_p"};
    case SystemKind::kvn: return {"norm", "norm_drift", "boundary_leakage"};
    case SystemKind::kvh: return {"norm", "norm_drift", "boundary_leakage", "clebsch_integral_gap"};
    case SystemKind::liouville: return {"norm", "norm_drift", "boundary_leakage"};
    case SystemKind::uhlmann: return {"trace", "energy", "commutator_trace"};
    case SystemKind::hybrid: return {"trace", "min_eigenvalue", "purity_defect"};
  }
  return Json::array();
}

/// Every diagnostic a system can emit; the defaults are a subset.
inline std::set<std::string> allowed_diagnostics(SystemKind s) {
  std::set<std::string> out;
  for (const auto& d : diagnostics(s)) out.insert(d.get<std::string>());
  if (s == SystemKind::berry) out.insert({"right_leg_lhs", "right_leg_rhs", "harmonic_pairing"});
  if (s == SystemKind::klimontovich) out.insert("weak_liouville_q");
  if (s == SystemKind::quantum) out.insert("purity_defect");
  if (s == SystemKind::mixture) out.insert("purity_defect");
  return out;
}

inline Json convergence(SystemKind s) {
  switch (s) {
    case SystemKind::kvn: return {{"quantity", "kvn_density_error"}, {"order", 2.0}, {"window", 0.3}, {"cfl", 0.4}};
    case SystemKind::kvh: return {{"quantity", "kvh_clebsch_error"}, {"order", 2.0}, {"window", 0.3}, {"cfl", 0.4}};
    case SystemKind::liouville: return {{"quantity", "liouville_characteristics_error"}, {"order", 2.0}, {"window", 0.3}, {"cfl", 0.4}};
    case SystemKind::berry: return {{"quantity", "right_leg_pairing"}, {"order", 2.0}, {"window", 0.3}};
    case SystemKind::klimontovich: return {{"quantity", "weak_liouville"}, {"test_function", "q"}, {"order", 2.0}, {"window", 0.3}};
    default: return Json::object();
  }
}

inline Json full_template(SystemKind s, const std::string& ham_kind, const std::string& recipe) {
  Json t{{"schema", scenario_schema},
         {"name", "unnamed"},
         {"system", ""},
         {"hbar", 1.0},
         {"seed", 20240917},
         {"hamiltonian", hamiltonian(s, ham_kind)},
         {"initial", initial(s, recipe)},
         {"diagnostics", diagnostics(s)},
         {"output", {{"snapshot_every", 0}}}};
  if (phase_field_system(s)) {
    t["grid"] = {{"q_min", -6.0}, {"q_max", 6.0}, {"p_min", -6.0}, {"p_max", 6.0}, {"nq", 64}, {"np", 64}, {"boundary", "open"}};
    t["time"] = {{"t_final", 1.0}, {"dt", 0.02}, {"order", 2}, {"cfl_limit", 0.5}};
    t["tolerances"] = {{"leakage_warning", 1e-6}, {"leakage_abort", 1e-4}, {"norm_drift", 1e-6}};
  } else if (s == SystemKind::klimontovich) {
    t["time"] = {{"t_final", 1.0}, {"dt", 0.01}, {"integrator", "verlet"}};
  } else if (s == SystemKind::berry) {
    t["grid"] = {{"n", 64}};
    t["pairing"] = {{"bump_width", 0.25}};
  } else {
    t["time"] = {{"t_final", 1.0}, {"dt", 0.1}};
    t["tolerances"] = {{"admissibility", 1e-10}};
    if (s == SystemKind::mixture) {
      t["grid"] = {{"n", 64}, {"min", 0.0}, {"max", 2 * pi}, {"boundary", "periodic"}};
      t["weight"] = {{"kind", "uniform"}, {"amplitude", 0.0}};
    }
  }
  if (const Json c = convergence(s); !c.empty()) t["convergence"] = c;
  return t;
}

inline void check_type(const Json& v, const Json& t, const std::string& path) {
  bool ok = true;
  if (t.is_number_integer()) ok = v.is_number_integer();
  else if (t.is_number()) ok = v.is_number();
  else if (t.is_string()) ok = v.is_string();
  else if (t.is_boolean()) ok = v.is_boolean();
  else if (t.is_array()) ok = v.is_array();
  if (!ok) throw SchemaError(path + ": expected " + std::string(t.type_name()) + ", got " + v.type_name());
}

/// Overlays user onto tmpl; keys absent from tmpl are schema errors.
inline Json merge(const Json& user, const Json& tmpl, const std::string& path) {
  if (!user.is_object()) throw SchemaError((path.empty() ? std::string("scenario") : path) + ": expected an object");
  Json out = tmpl;
  for (const auto& [k, v] : user.items()) {
    const std::string p = path.empty() ? k : path + "." + k;
    if (!tmpl.contains(k)) throw SchemaError("unknown key '" + p + "'");
    const Json& t = tmpl.at(k);
    if (t.is_object()) out[k] = merge(v, t, p);
    else {
      check_type(v, t, p);
      out[k] = v;
    }
  }
  return out;
}

}  // namespace schema

// ---------------------------------------------------------------------------
// Parsing

struct Scenario {
  SystemKind system = SystemKind::quantum;
  Json config;  // effective: template defaults filled in
  std::string source;

  std::string name() const { return config.at("name").get<std::string>(); }
  double hbar() const { return config.at("hbar").get<double>(); }
  std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }
};

inline SystemKind parse_system(const std::string& s) {
  for (const auto& [name, kind] : system_kinds())
    if (name == s) return kind;
  std::string all;
  for (const auto& [name, kind] : system_kinds()) all += (all.empty() ? "" : ", ") + name;
  throw SchemaError("system: unknown system '" + s + "' (" + all + ")");
}

/// "a.b.c=value"; value is parsed as JSON and falls back to a plain string.
inline void apply_override(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SchemaError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw SchemaError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) throw SchemaError("override '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

inline Scenario parse_scenario(Json user, const std::vector<std::string>& overrides = {}, std::string source = {}) {
  if (!user.is_object()) throw SchemaError("scenario: top level must be an object");
  for (const auto& o : overrides) apply_override(user, o);
  if (!user.contains("system") || !user["system"].is_string()) throw SchemaError("system: required string key missing");
  const SystemKind s = parse_system(user["system"].get<std::string>());
  auto pick = [&](const char* section, const char* key, const std::string& fallback) {
    if (!user.contains(section)) return fallback;
    const Json& sec = user[section];
    if (!sec.is_object()) throw SchemaError(std::string(section) + ": expected an object");
    if (!sec.contains(key)) return fallback;
    if (!sec[key].is_string()) throw SchemaError(std::string(section) + "." + key + ": expected string");
    return sec[key].get<std::string>();
  };
  const Json tmpl = schema::full_template(s, pick("hamiltonian", "kind", schema::default_hamiltonian(s)),
                                          pick("initial", "recipe", schema::default_recipe(s)));
  Scenario sc{s, schema::merge(user, tmpl, ""), std::move(source)};
  const Json& c = sc.config;
  if (c["schema"] != scenario_schema) throw SchemaError("schema: expected '" + std::string(scenario_schema) + "'");
  if (!(sc.hbar() > 0.0)) throw SchemaError("hbar: must be positive");
  if (c["seed"].get<long long>() < 0) throw SchemaError("seed: must be a nonnegative integer");
  const auto allowed = schema::allowed_diagnostics(s);
  for (const auto& d : c["diagnostics"]) {
    if (!d.is_string()) throw SchemaError("diagnostics: entries must be strings");
    if (!allowed.count(d.get<std::string>()))
      throw SchemaError("diagnostics: '" + d.get<std::string>() + "' is not available for system " + c["system"].get<std::string>());
  }
  if (c.contains("time")) {
    const Json& t = c["time"];
    if (!(t["t_final"].get<double>() >= 0.0)) throw SchemaError("time.t_final: must be nonnegative");
    if (!(t["dt"].get<double>() > 0.0)) throw SchemaError("time.dt: must be positive");
    if (t.contains("order") && t["order"] != 2 && t["order"] != 4) throw SchemaError("time.order: must be 2 or 4");
  }
  if (c["output"]["snapshot_every"].get<long>() < 0) throw SchemaError("output.snapshot_every: must be nonnegative");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file '" + path.string() + "'");
  Json j = Json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw SchemaError("scenario file '" + path.string() + "' is not valid JSON");
  return parse_scenario(std::move(j), overrides, path.string());
}

// ---------------------------------------------------------------------------
// Builders

inline PhaseFunction build_phase_hamiltonian(const Json& h) {
  const std::string kind = h["kind"];
  if (kind == "harmonic") return PhaseFunction::harmonic(h["omega"].get<double>());
  if (kind == "free") return PhaseFunction::free_particle();
  if (kind == "pendulum") return PhaseFunction::pendulum(h["g"].get<double>());
  if (kind == "quartic") return PhaseFunction::quartic(h["lambda"].get<double>());
  if (kind == "linear") return PhaseFunction::linear(h["alpha"].get<double>(), h["beta"].get<double>());
  const Json& rows = h["coefficients"];
  if (rows.empty() || !rows[0].is_array() || rows[0].empty()) throw SchemaError("hamiltonian.coefficients: need a nonempty matrix");
  RMatrix c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != rows[0].size()) throw SchemaError("hamiltonian.coefficients: ragged matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (!rows[i][j].is_number()) throw SchemaError("hamiltonian.coefficients: entries must be numbers");
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    }
  }
  return PhaseFunction::polynomial(c);
}

namespace detail {

inline RMatrix json_matrix(const Json& a, const std::string& path) {
  if (a.empty()) return RMatrix();
  RMatrix m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array() || a[i].size() != a.size()) throw SchemaError(path + ": expected a square matrix");
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (!a[i][j].is_number()) throw SchemaError(path + ": entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline HermitianOperator build_hilbert_hamiltonian(const Json& h, std::uint64_t seed) {
  const std::string kind = h["kind"];
  if (kind == "random_hermitian") {
    const long dim = h["dim"].get<long>();
    if (dim < 1 || dim > 64) throw SchemaError("hamiltonian.dim: must be between 1 and 64");
    Rng rng(derive_seed(seed, 11));
    return HermitianOperator(h["scale"].get<double>() * random_hermitian(dim, rng));
  }
  if (kind == "diagonal") {
    const Json& e = h["energies"];
    if (e.empty()) throw SchemaError("hamiltonian.energies: must be nonempty");
    CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(e.size()), static_cast<Eigen::Index>(e.size()));
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (!e[k].is_number()) throw SchemaError("hamiltonian.energies: entries must be numbers");
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = e[k].get<double>();
    }
    return HermitianOperator(m);
  }
  const RMatrix re = detail::json_matrix(h["re"], "hamiltonian.re");
  if (re.size() == 0) throw SchemaError("hamiltonian.re: must be a nonempty square matrix");
  RMatrix im = detail::json_matrix(h["im"], "hamiltonian.im");
  if (im.size() == 0) im = RMatrix::Zero(re.rows(), re.cols());
  if (im.rows() != re.rows()) throw SchemaError("hamiltonian.im: size differs from hamiltonian.re");
  CMatrix m = re.cast<Complex>() + I * im.cast<Complex>();
  try {
    return HermitianOperator(m);
  } catch (const InputError& e) {
    throw SchemaError(std::string("hamiltonian: ") + e.what());
  }
}

inline PhaseGrid2D build_phase_grid(const Json& g) {
  const std::string bc = g["boundary"];
  if (bc != "open" && bc != "periodic_q") throw SchemaError("grid.boundary: must be open or periodic_q");
  const double q0 = g["q_min"], q1 = g["q_max"], p0 = g["p_min"], p1 = g["p_max"];
  const long nq = g["nq"], np = g["np"];
  if (!(q1 > q0) || !(p1 > p0)) throw SchemaError("grid: each max must exceed its min");
  if (nq < 16 || np < 16) throw SchemaError("grid: need at least 16 nodes per axis");
  return PhaseGrid2D(q0, q1, nq, p0, p1, np, bc == "open" ? PhaseBoundary::open : PhaseBoundary::periodic_q);
}

inline ClassicalWaveFunction build_gaussian(const PhaseGrid2D& g, const Json& init, double hbar) {
  const double q0 = init["q0"], p0 = init["p0"], sq = init["sigma_q"], sp = init["sigma_p"], k = init["wavenumber"];
  if (!(sq > 0.0) || !(sp > 0.0)) throw SchemaError("initial: widths must be positive");
  auto psi = ClassicalWaveFunction::from_function(
      g,
      [&](double q, double p) {
        return std::exp(-((q - q0) * (q - q0) / (2 * sq * sq) + (p - p0) * (p - p0) / (2 * sp * sp))) * std::exp(I * k * q);
      },
      hbar);
  if (!init.contains("normalize") || init["normalize"].get<bool>()) psi.values /= std::sqrt(psi.squared_norm());
  return psi;
}

inline EvolveOptions build_evolve_options(const Scenario& sc) {
  const Json& c = sc.config;
  EvolveOptions o;
  o.order = c["time"]["order"];
  o.cfl_limit = c["time"]["cfl_limit"];
  o.snapshot_every = c["output"]["snapshot_every"];
  o.leakage_warning = c["tolerances"]["leakage_warning"];
  o.leakage_abort = c["tolerances"]["leakage_abort"];
  o.convention = SignConvention::shipped();
  return o;
}

inline ParameterGrid build_line_grid(const Json& g) {
  const std::string bc = g["boundary"];
  if (bc != "open" && bc != "periodic") throw SchemaError("grid.boundary: must be open or periodic");
  const long n = g["n"];
  if (n < 4) throw SchemaError("grid.n: need at least 4 nodes");
  if (!(g["max"].get<double>() > g["min"].get<double>())) throw SchemaError("grid: max must exceed min");
  return ParameterGrid::line(g["min"], g["max"], n, bc == "open" ? Boundary::open : Boundary::periodic);
}

inline WeightDensity build_weight(const ParameterGrid& g, const Json& w) {
  const std::string kind = w["kind"];
  const double a = w["amplitude"];
  if (kind == "uniform") return WeightDensity::uniform(g);
  if (kind == "cosine") {
    if (std::abs(a) >= 1.0) throw SchemaError("weight.amplitude: must be below 1 in magnitude");
    const double x0 = g.axis(0).lower, len = g.axis(0).upper - g.axis(0).lower;
    WeightDensity raw = WeightDensity::from_function(g, [&](const Eigen::Vector3d& r) { return 1.0 + a * std::cos(2 * pi * (r(0) - x0) / len); });
    return WeightDensity(g, raw.values / raw.total);
  }
  throw SchemaError("weight.kind: must be uniform or cosine");
}

inline WeightedEnsemble build_ensemble(const Json& init, std::uint64_t seed) {
  if (init["recipe"] == "file") {
    std::ifstream in(init["path"].get<std::string>());
    if (!in) throw SchemaError("initial.path: cannot open '" + init["path"].get<std::string>() + "'");
    return read_ensemble_csv(in);
  }
  const long n = init["particles"];
  if (n < 1) throw SchemaError("initial.particles: must be positive");
  Rng rng(derive_seed(seed, 21));
  RVector w(n);
  std::vector<PhasePoint> pts;
  const double s = init["spread"];
  for (long k = 0; k < n; ++k) {
    w(k) = uniform(rng, 0.5, 1.5);
    pts.emplace_back(init["q0"].get<double>() + s * gaussian(rng), init["p0"].get<double>() + s * gaussian(rng));
  }
  return WeightedEnsemble(w / w.sum(), std::move(pts));
}

// ---------------------------------------------------------------------------
// Running

struct RunOutput {
  Diagnostics diagnostics;
  std::vector<std::string> files;  // relative to the output directory
  std::string sign_convention;
};

namespace detail {

class OutputDir {
 public:
  /// Stale snapshot files from an earlier run in the same directory are removed.
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    const auto snaps = root_ / "snapshots";
    if (std::filesystem::is_directory(snaps))
      for (const auto& e : std::filesystem::directory_iterator(snaps))
        if (e.path().filename().string().rfind("snapshot_", 0) == 0) std::filesystem::remove(e.path());
  }
  template <class Writer>
  void write(const std::string& rel, Writer&& w, std::vector<std::string>& files) {
    const auto path = root_ / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path.string() + "'");
    w(os);
    files.push_back(rel);
  }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

inline std::string snapshot_name(std::size_t k) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "snapshots/snapshot_%04zu.csv", k);
  return buf;
}

inline bool wants(const Json& cfg, const std::string& name) {
  for (const auto& d : cfg["diagnostics"])
    if (d == name) return true;
  return false;
}

/// Keeps the diagnostics named in the scenario (in their order of appearance).
inline Diagnostics filter(const Diagnostics& all, const Json& cfg) {
  Diagnostics out;
  out.warnings = all.warnings;
  for (const auto& s : all.samples)
    if (wants(cfg, s.name)) out.samples.push_back(s);
  return out;
}

inline std::vector<double> output_times(double t_final, double dt) {
  const auto [n, step] = step_plan(t_final, dt);
  std::vector<double> t;
  for (long k = 0; k <= n; ++k) t.push_back(step * static_cast<double>(k));
  return t;
}

inline bool snapshot_due(const Json& cfg, std::size_t k, std::size_t last) {
  const long every = cfg["output"]["snapshot_every"];
  return k == 0 || k == last || (every > 0 && k % static_cast<std::size_t>(every) == 0);
}

}  // namespace detail

inline void run_phase_field(const Scenario& sc, detail::OutputDir& out, RunOutput& res) {
  const Json& c = sc.config;
  const PhaseGrid2D g = build_phase_grid(c["grid"]);
  const PhaseFunction h = build_phase_hamiltonian(c["hamiltonian"]);
  const EvolveOptions opt = build_evolve_options(sc);
  const double t = c["time"]["t_final"], dt = c["time"]["dt"];
  const Json& init = c["initial"];
  if (sc.system == SystemKind::liouville) {
    const ClassicalWaveFunction psi0 = build_gaussian(g, init, sc.hbar());
    PhaseDensity f0 = init["recipe"] == "kvh_clebsch" ? clebsch_density(psi0, ClebschMode::kvh, opt.convention, opt.order)
                                                     : PhaseDensity(g, psi0.values.abs2());
    const auto r = evolve(f0, h, t, dt, KoopmanMode::liouville, opt);
    res.diagnostics = r.diagnostics;
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
      const ComplexField zero = ComplexField::Zero(g.nq(), g.np());
      out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_field_csv(os, g, zero, &r.snapshots[k].values); }, res.files);
    }
    return;
  }
  const KoopmanMode mode = sc.system == SystemKind::kvn ? KoopmanMode::kvn : KoopmanMode::kvh;
  const auto r = evolve(build_gaussian(g, init, sc.hbar()), h, t, dt, mode, opt);
  res.diagnostics = r.diagnostics;
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    const auto& psi = r.snapshots[k];
    RealField f = psi.values.abs2();
    if (mode == KoopmanMode::kvh) {
      const PhaseDensity fk = clebsch_density(psi, ClebschMode::kvh, opt.convention, opt.order);
      res.diagnostics.record(r.times[k], "clebsch_integral_gap", std::abs(fk.integral() - psi.squared_norm()));
      f = fk.values;
    }
    out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_field_csv(os, g, psi.values, &f); }, res.files);
  }
  const auto drift = r.diagnostics.series("norm_drift");
  const double tol = c["tolerances"]["norm_drift"];
  if (mode == KoopmanMode::kvn && !drift.empty() && *std::max_element(drift.begin(), drift.end()) > tol)
    res.diagnostics.warn("maximum norm drift exceeds the scenario tolerance " + std::to_string(tol));
}

inline void run_klimontovich(const Scenario& sc, detail::OutputDir& out, RunOutput& res) {
  const Json& c = sc.config;
  const PhaseFunction h = build_phase_hamiltonian(c["hamiltonian"]);
  const std::string integ_name = c["time"]["integrator"];
  Integrator integ;
  if (integ_name == "verlet") integ = Integrator::verlet;
  else if (integ_name == "midpoint") integ = Integrator::midpoint;
  else if (integ_name == "rk4") integ = Integrator::rk4;
  else throw SchemaError("time.integrator: must be verlet, midpoint or rk4");
  WeightedEnsemble e = build_ensemble(c["initial"], sc.seed());
  const double dt = c["time"]["dt"];
  const auto times = detail::output_times(c["time"]["t_final"], dt);
  const double step = times.size() > 1 ? times[1] : dt;
  const PhaseFunction q = PhaseFunction::coordinate(), p = PhaseFunction::momentum();
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0) e = hamilton_flow(e, h, step, step, integ);
    const double t = times[k];
    res.diagnostics.record(t, "energy", ensemble_pairing(e, h));
    res.diagnostics.record(t, "weight_sum", e.weight_sum());
    res.diagnostics.record(t, "centroid_q", ensemble_pairing(e, q) / e.weight_sum());
    res.diagnostics.record(t, "centroid_p", ensemble_pairing(e, p) / e.weight_sum());
    if (detail::wants(c, "weak_liouville_q") && t >= 2 * step)
      res.diagnostics.record(t, "weak_liouville_q", weak_liouville_residual(e, h, q, 2 * step, step, integ));
    if (detail::snapshot_due(c, k, times.size() - 1))
      out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_ensemble_csv(os, e); }, res.files);
  }
}

inline void run_berry(const Scenario& sc, detail::OutputDir& out, RunOutput& res) {
  const Json& c = sc.config;
  const long n = c["grid"]["n"];
  if (n < 8) throw SchemaError("grid.n: need at least 8 nodes per axis");
  const double width = c["pairing"]["bump_width"];
  if (!(width > 0.0)) throw SchemaError("pairing.bump_width: must be positive");
  const ParameterGrid g = ParameterGrid::square(0.0, 2 * pi, n, Boundary::periodic);
  const WaveFamily fam = two_level_chern_family(g, c["hamiltonian"]["mass"].get<double>(), sc.hbar());
  const Cochain bw = berry_curvature(fam, CurvatureBackend::wilson_loop);
  const Cochain bf = berry_curvature(fam);
  const Cochain gamma = two_form_from_potential(g, [&](double x, double y) { return std::exp((std::cos(x) + std::cos(y) - 2.0) / width); });
  const PairingCheck pc = right_leg_pairing_check(fam, WeightDensity::uniform(g), gamma);
  res.diagnostics.record(0.0, "wilson_flux", total_flux(bw));
  res.diagnostics.record(0.0, "fd_flux", total_flux(bf));
  res.diagnostics.record(0.0, "right_leg_lhs", pc.lhs);
  res.diagnostics.record(0.0, "right_leg_rhs", pc.rhs);
  res.diagnostics.record(0.0, "harmonic_pairing", pc.harmonic_pairing);
  res.diagnostics.record(0.0, "right_leg_relative_error", pc.relative_error());
  out.write("curvature_wilson.csv", [&](std::ostream& os) { write_cochain_csv(os, bw); }, res.files);
  out.write("curvature_fd.csv", [&](std::ostream& os) { write_cochain_csv(os, bf); }, res.files);
}

inline void run_hilbert(const Scenario& sc, detail::OutputDir& out, RunOutput& res) {
  const Json& c = sc.config;
  const double hbar = sc.hbar();
  const HermitianOperator h = build_hilbert_hamiltonian(c["hamiltonian"], sc.seed());
  const Eigen::Index n = h.dim();
  const auto times = detail::output_times(c["time"]["t_final"], c["time"]["dt"]);
  const std::size_t last = times.size() - 1;
  Rng rng(derive_seed(sc.seed(), 31));
  const Json& init = c["initial"];
  auto energy = [&](const CMatrix& rho) { return (rho * h.entries).trace().real(); };

  if (sc.system == SystemKind::quantum) {
    CVector psi0;
    if (init["recipe"] == "basis") {
      const long k = init["index"];
      if (k < 0 || k >= n) throw SchemaError("initial.index: outside the Hilbert space");
      psi0 = CVector::Zero(n);
      psi0(k) = 1.0;
    } else {
      psi0 = random_unit_vector(n, rng);
    }
    const CMatrix xi_h = -I * h.entries / hbar, xi_phase = I * CMatrix::Identity(n, n);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const CVector psi = unitary_propagator(h, times[k], hbar) * psi0;
      const CMatrix j = momentum_map_pure(WaveFunction(psi, hbar)).entries;
      const CMatrix rho = psi * psi.adjoint();
      res.diagnostics.record(times[k], "norm", psi.squaredNorm());
      res.diagnostics.record(times[k], "energy", energy(rho));
      res.diagnostics.record(times[k], "noether_energy", dual_pairing(j, xi_h));
      res.diagnostics.record(times[k], "phase_charge", dual_pairing(j, xi_phase));
      res.diagnostics.record(times[k], "purity_defect", DensityOperator(rho).purity_defect());
      if (detail::snapshot_due(c, k, last))
        out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_matrix_csv(os, CMatrix(psi)); }, res.files);
    }
    return;
  }

  if (sc.system == SystemKind::mixture) {
    const ParameterGrid g = build_line_grid(c["grid"]);
    WeightDensity w;
    WaveFamily fam;
    if (init["recipe"] == "file") {
      std::ifstream in(init["path"].get<std::string>());
      if (!in) throw SchemaError("initial.path: cannot open '" + init["path"].get<std::string>() + "'");
      std::tie(w, fam) = read_family_csv(in, g, hbar);
      if (fam.fibre_dim() != n) throw SchemaError("initial.path: fibre dimension differs from the Hamiltonian");
    } else {
      w = build_weight(g, c["weight"]);
      CMatrix s(n, g.node_count());
      for (Eigen::Index x = 0; x < g.node_count(); ++x) s.col(x) = random_unit_vector(n, rng);
      fam = WaveFamily(g, s, hbar);
    }
    for (const auto& msg : family_warnings(w, fam)) res.diagnostics.warn(msg);
    const DensityOperator rho0 = density_from_family(w, fam);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const WaveFamily ft = evolve_family(fam, h, times[k]);
      const DensityOperator rho = density_from_family(w, ft);
      const CMatrix u = unitary_propagator(h, times[k], hbar);
      res.diagnostics.record(times[k], "trace", rho.trace);
      res.diagnostics.record(times[k], "energy", energy(rho.entries));
      res.diagnostics.record(times[k], "commuting_square", max_abs(rho.entries - u * rho0.entries * u.adjoint()));
      res.diagnostics.record(times[k], "purity_defect", rho.purity_defect());
      if (detail::snapshot_due(c, k, last))
        out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_family_csv(os, w, ft); }, res.files);
    }
    return;
  }

  if (sc.system == SystemKind::uhlmann) {
    const long m = init["cols"];
    if (m < 1) throw SchemaError("initial.cols: must be positive");
    const WOperator w0(init["scale"].get<double>() * random_cmatrix(n, m, rng), hbar);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const WOperator w = evolve_w(w0, h, times[k]);
      const DensityOperator rho = rho_from_w(w);
      res.diagnostics.record(times[k], "trace", rho.trace);
      res.diagnostics.record(times[k], "energy", energy(rho.entries));
      if (w.square()) res.diagnostics.record(times[k], "commutator_trace", std::abs(w_commutator(w).trace()));
      if (detail::snapshot_due(c, k, last))
        out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_matrix_csv(os, w.entries); }, res.files);
    }
    return;
  }

  // hybrid
  HybridState s0;
  if (init["recipe"] == "pinned_non_psd") {
    if (n != 2) throw SchemaError("initial.recipe: pinned_non_psd needs a two-level Hamiltonian");
    CVector e1 = CVector::Zero(2);
    e1(0) = 1.0;
    CMatrix w = CMatrix::Zero(2, 2);
    w(0, 1) = 0.5;
    s0 = HybridState(WaveFunction(e1, hbar), WOperator(w, hbar));
  } else {
    if (n < 2) throw SchemaError("initial.recipe: nilpotent needs dimension at least 2");
    const CMatrix u = random_unitary(n, rng);
    CMatrix nil = CMatrix::Zero(n, n);
    nil(1, 0) = init["c"].get<double>();
    s0 = HybridState(WaveFunction(u.col(0), hbar), WOperator(u * nil * u.adjoint(), hbar));
  }
  const double adm = c["tolerances"]["admissibility"];
  s0.require_admissible(adm);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const HybridEvolution r = evolve_hybrid(s0, h, times[k]);
    res.diagnostics.record(times[k], "trace", r.rho.trace);
    res.diagnostics.record(times[k], "min_eigenvalue", r.rho.min_eigenvalue());
    res.diagnostics.record(times[k], "purity_defect", r.rho.purity_defect());
    if (detail::snapshot_due(c, k, last))
      out.write(detail::snapshot_name(k), [&](std::ostream& os) { write_matrix_csv(os, r.rho.entries); }, res.files);
  }
}

/// Validates the sign triple once per process for the phase-field systems.
inline const SignConvention& startup_sign_convention() {
  static const SignConvention c = select_sign_convention();
  return c;
}

inline RunOutput run_scenario(const Scenario& sc, const std::filesystem::path& out_dir) {
  detail::OutputDir out(out_dir);
  RunOutput res;
  if (phase_field_system(sc.system)) {
    const SignConvention& c = startup_sign_convention();
    if (!(c == SignConvention::shipped())) throw InputError("startup sign validation selected an unexpected triple " + c.str());
    res.sign_convention = c.str();
    run_phase_field(sc, out, res);
  } else if (sc.system == SystemKind::klimontovich) {
    run_klimontovich(sc, out, res);
  } else if (sc.system == SystemKind::berry) {
    run_berry(sc, out, res);
  } else {
    run_hilbert(sc, out, res);
  }
  res.diagnostics = detail::filter(res.diagnostics, sc.config);
  std::vector<std::string> files;
  out.write("diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, res.diagnostics); }, files);
  res.files.insert(res.files.begin(), files.begin(), files.end());
  return res;
}

inline Json versions() {
  return {{"momap", momap_version},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__},
          {"cxx_standard", static_cast<long>(__cplusplus)}};
}

/// The manifest echoes the effective scenario; wall time is the only
/// field that varies between identical runs.
inline Json run_manifest(const Scenario& sc, const RunOutput* res, double wall_time, int exit_code, const std::string& error = {}) {
  Json m{{"schema", manifest_schema},
         {"scenario", sc.config},
         {"source", sc.source},
         {"versions", versions()},
         {"exit_code", exit_code},
         {"wall_time_s", wall_time}};
  if (res) {
    m["outputs"] = res->files;
    m["warnings"] = res->diagnostics.warnings;
    if (!res->sign_convention.empty()) m["sign_convention"] = res->sign_convention;
  }
  if (!error.empty()) m["error"] = error;
  return m;
}

}  // namespace momap

// momap: run scenarios, verification suites and convergence studies.
//
// Exit codes: 0 success, 1 verification or convergence failure, 2 schema or
// input error, 3 divergence or CFL violation, 4 admissibility rejection.

#include "momap/convergence.hpp"
#include "momap/suite.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#ifndef MOMAP_SCENARIO_DIR
#define MOMAP_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace momap;

namespace {

enum Exit { ok = 0, failed = 1, schema_error = 2, divergence = 3, admissibility = 4 };

struct Common {
  std::string scenario;
  std::string out;
  std::optional<long long> seed;
  std::optional<double> hbar;
  std::optional<double> tol;
  std::vector<std::string> overrides;
  int refinements = 3;
  std::string module = "all";
};

fs::path resolve_scenario(const std::string& name) {
  if (fs::exists(name)) return name;
  const fs::path bundled = fs::path(MOMAP_SCENARIO_DIR) / (name + ".json");
  if (fs::exists(bundled)) return bundled;
  throw SchemaError("scenario '" + name + "' is neither a file nor a bundled scenario (see 'momap list')");
}

Scenario load(const Common& o) {
  std::vector<std::string> ov = o.overrides;
  if (o.seed) ov.push_back("seed=" + std::to_string(*o.seed));
  if (o.hbar) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "hbar=%.17g", *o.hbar);
    ov.emplace_back(buf);
  }
  return load_scenario(resolve_scenario(o.scenario), ov);
}

void write_json(const fs::path& path, const Json& j) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream os(path);
  if (!os) throw InputError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

/// Runs body and maps the error hierarchy onto exit codes.
template <class F>
int guarded(F&& body, std::string* error = nullptr) {
  auto fail = [&](int code, const std::string& kind, const std::string& what) {
    std::cerr << "momap: " << kind << ": " << what << '\n';
    if (error) *error = what;
    return code;
  };
  try {
    return body();
  } catch (const AdmissibilityError& e) {
    return fail(admissibility, "admissibility rejected", e.what());
  } catch (const DivergenceError& e) {
    return fail(divergence, "divergence", std::string(e.what()) + " (bound " + std::to_string(e.bound()) + ")");
  } catch (const SchemaError& e) {
    return fail(schema_error, "schema error", e.what());
  } catch (const InputError& e) {
    return fail(schema_error, "invalid input", e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(schema_error, "schema error", e.what());
  }
}

int cmd_list() {
  std::cout << "scenarios (" << MOMAP_SCENARIO_DIR << "):\n";
  std::vector<fs::path> files;
  if (fs::exists(MOMAP_SCENARIO_DIR))
    for (const auto& e : fs::directory_iterator(MOMAP_SCENARIO_DIR))
      if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::string system = "?";
    std::ifstream in(f);
    const Json j = Json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("system") && j["system"].is_string()) system = j["system"];
    std::cout << "  " << f.stem().string() << "  [" << system << "]\n";
  }
  std::cout << "systems:";
  for (const auto& [name, kind] : system_kinds()) std::cout << ' ' << name;
  std::cout << "\nverify modules: all";
  for (const auto& m : suite_modules()) std::cout << ' ' << m;
  std::cout << "\nconvergence quantities:\n";
  for (const auto& [name, kind] : system_kinds()) {
    const auto q = convergence_quantities(kind);
    if (q.empty()) continue;
    std::cout << "  " << name << ':';
    for (const auto& s : q) std::cout << ' ' << s;
    std::cout << '\n';
  }
  return ok;
}

int cmd_run(const Common& o) {
  std::optional<Scenario> sc;
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<RunOutput> res;
  std::string error;
  const fs::path out = o.out.empty() ? fs::path("momap_out") : fs::path(o.out);
  const int code = guarded(
      [&] {
        sc = load(o);
        res = run_scenario(*sc, out);
        for (const auto& w : res->diagnostics.warnings) std::cerr << "momap: warning: " << w << '\n';
        std::cout << "scenario " << sc->name() << " [" << sc->config["system"].get<std::string>() << "]: "
                  << res->files.size() << " files in " << out.string() << '\n';
        return ok;
      },
      &error);
  if (sc) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    guarded([&] {
      write_json(out / "manifest.json", run_manifest(*sc, res ? &*res : nullptr, wall, code, error));
      return ok;
    });
  }
  return code;
}

int cmd_verify(const Common& o) {
  return guarded([&] {
    SuiteOptions opt;
    if (o.seed) {
      if (*o.seed < 0) throw SchemaError("--seed must be nonnegative");
      opt.seed = static_cast<std::uint64_t>(*o.seed);
    }
    if (o.tol) opt.tol_scale = *o.tol;
    if (o.hbar) {
      if (!(*o.hbar > 0.0)) throw SchemaError("--hbar must be positive");
      opt.hbar = *o.hbar;
    }
    const SuiteReport rep = verify_suite(o.module, opt);
    for (const auto& c : rep.checks) {
      const char* verdict = c.control ? (c.passed ? "CONTROL-PASSED" : "expected-fail") : (c.passed ? "pass" : "FAIL");
      std::printf("%-16s %-62s residual %.3e  tol %.1e", verdict, c.name.c_str(), c.value, c.tolerance);
      if (c.slope) std::printf("  slope %.3f", *c.slope);
      if (!c.detail.empty()) std::printf("  (%s)", c.detail.c_str());
      std::printf("\n");
    }
    Json report = rep.to_json();
    report["seed"] = opt.seed;
    report["tol_scale"] = opt.tol_scale;
    report["hbar"] = opt.hbar;
    report["module"] = o.module;
    report["versions"] = versions();
    if (!o.out.empty()) write_json(fs::path(o.out) / "verify_report.json", report);
    std::printf("%s: %zu checks, exit %d\n", rep.ok() ? "verify passed" : "verify FAILED", rep.checks.size(), rep.exit_code());
    return rep.exit_code();
  });
}

int cmd_converge(const Common& o) {
  return guarded([&] {
    const Scenario sc = load(o);
    const auto t0 = std::chrono::steady_clock::now();
    ConvergenceStudy st = [&] {
      if (o.tol) {
        Scenario s = sc;
        s.config["convergence"]["window"] = *o.tol;
        return convergence_study(s, o.refinements);
      }
      return convergence_study(sc, o.refinements);
    }();
    write_convergence_csv(std::cout, st);
    if (st.fit.slope) std::printf("slope %.4f (target %.1f +- %.2f)\n", *st.fit.slope, st.target, st.window);
    if (!st.detail.empty()) std::printf("%s\n", st.detail.c_str());
    if (!o.out.empty()) {
      const fs::path out(o.out);
      fs::create_directories(out);
      std::ofstream csv(out / "convergence.csv");
      write_convergence_csv(csv, st);
      Json j = to_json(st);
      j["scenario"] = sc.config;
      j["refinements"] = o.refinements;
      j["versions"] = versions();
      j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_json(out / "convergence.json", j);
    }
    return st.passed ? ok : failed;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"momentum-map verification toolkit"};
  app.require_subcommand(1);
  Common o;

  app.add_subcommand("list", "list bundled scenarios, systems, modules and convergence quantities");

  auto* run = app.add_subcommand("run", "run a scenario to diagnostics CSV, snapshots and a JSON manifest");
  run->add_option("--scenario", o.scenario, "bundled scenario name or path to a scenario file")->required();
  run->add_option("--out", o.out, "output directory (default momap_out)");
  run->add_option("--seed", o.seed, "master seed override");
  run->add_option("--hbar", o.hbar, "hbar override");
  run->add_option("--override", o.overrides, "dotted key=value override, repeatable");

  auto* verify = app.add_subcommand("verify", "run the verification suite with its falsification controls");
  verify->add_option("module", o.module, "all or one module name");
  verify->add_option("--seed", o.seed, "master seed");
  verify->add_option("--tol", o.tol, "multiplier applied to every residual tolerance");
  verify->add_option("--hbar", o.hbar, "hbar used by the suite");
  verify->add_option("--out", o.out, "directory for verify_report.json");

  auto* converge = app.add_subcommand("converge", "refinement study with a fitted convergence slope");
  converge->add_option("--scenario", o.scenario, "bundled scenario name or path to a scenario file")->required();
  converge->add_option("--refinements", o.refinements, "number of refinement levels (>= 3)");
  converge->add_option("--out", o.out, "directory for convergence.csv and convergence.json");
  converge->add_option("--seed", o.seed, "master seed override");
  converge->add_option("--hbar", o.hbar, "hbar override");
  converge->add_option("--tol", o.tol, "slope window around the target order");
  converge->add_option("--override", o.overrides, "dotted key=value override, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return schema_error;
  }
  if (app.got_subcommand("list")) return cmd_list();
  if (run->parsed()) return cmd_run(o);
  if (verify->parsed()) return cmd_verify(o);
  return cmd_converge(o);
}

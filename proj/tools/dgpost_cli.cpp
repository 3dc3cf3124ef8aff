// Command-line runner for dgpost experiments.
//
//   dgpost constants  --config c.ini --out dir
//   dgpost solve      --config c.ini --out dir
//   dgpost estimate   --config c.ini --out dir
//   dgpost dku-study  --config c.ini --out dir
//
// On failure a JSON object {"error": {"kind", "message", "field"}} is printed
// to stdout and the exit code is 1 (2 for usage errors).

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <dgpost/dgpost.hpp>

namespace {

int report_error(const std::string& kind, const std::string& message, const std::string& field) {
  nlohmann::ordered_json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = message;
  j["error"]["field"] = field;
  std::cout << j.dump() << std::endl;
  return 1;
}

void check_kind(const dgpost::ExperimentConfig& cfg, dgpost::ExperimentKind expected) {
  if (cfg.kind != expected)
    throw dgpost::ConfigError(std::string("subcommand expects kind ") + dgpost::to_string(expected),
                              "experiment.kind");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interior-penalty DG solver with a posteriori error bounds"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (INI)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
    return sub;
  };
  CLI::App* constants = add("constants", "local constants a, b, d over a p- or N-sweep");
  CLI::App* solve = add("solve", "solve and report the true energy error");
  CLI::App* estimate = add("estimate", "solve and evaluate the upper and lower bounds");
  CLI::App* dku = add("dku-study", "compare d^u from the reference with d_kappa");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("usage", e.what(), "");
    return 2;
  }

  try {
    dgpost::ExperimentConfig cfg = dgpost::load_config(config_path);
    if (!out_dir.empty()) cfg.output_directory = out_dir;
    dgpost::Pipeline pl(cfg);
    nlohmann::ordered_json summary;
    if (constants->parsed()) {
      check_kind(cfg, dgpost::ExperimentKind::constants_scaling);
      summary = dgpost::run_constants(pl, cfg.output_directory);
    } else if (solve->parsed() || estimate->parsed()) {
      check_kind(cfg, dgpost::ExperimentKind::solve_estimate);
      summary = dgpost::run_solve(pl, cfg.output_directory, estimate->parsed());
    } else if (dku->parsed()) {
      check_kind(cfg, dgpost::ExperimentKind::dku_study);
      summary = dgpost::run_dku(pl, cfg.output_directory);
    }
    std::cout << summary.dump(2) << std::endl;
    return 0;
  } catch (const dgpost::ConfigError& e) {
    return report_error(e.kind(), e.what(), e.field());
  } catch (const dgpost::Error& e) {
    return report_error(e.kind(), e.what(), "");
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io_error", e.what(), "output.directory");
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), "");
  }
}

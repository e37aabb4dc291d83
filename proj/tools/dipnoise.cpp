#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "dipolenoise/cli.hpp"
#include "dipolenoise/parallel.hpp"

namespace {

int fail(const char* kind, const std::string& msg, int code) {
  dipnoise::json j = {{"error", kind}, {"exit_code", code}, {"message", msg}};
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dipnoise: field-noise correlations of trapped ions above dipole-covered electrodes"};
  app.set_version_flag("--version", std::string(DIPNOISE_VERSION));
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  unsigned threads = 0;
  double resolution = 0;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config, "config file or shipped preset name")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--resolution", resolution, "override grid resolution (nodes per length)")
        ->check(CLI::PositiveNumber);
  };
  auto* sweep = app.add_subcommand("sweep", "ratio S_cross/S_self against l/d or d");
  auto* scaling = app.add_subcommand("scaling", "one-ion S(d) with local log-log slopes");
  auto* chain = app.add_subcommand("chain", "mode-projected noise of an N-ion chain against spacing");
  auto* oracle = app.add_subcommand("oracle-check", "Monte-Carlo check of the deterministic sums");
  auto* presets = app.add_subcommand("presets", "list shipped figure configs");
  for (auto* s : {sweep, scaling, chain, oracle}) add_run_flags(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), 2);
  }

  try {
    if (presets->parsed()) {
      for (const auto& p : dipnoise::list_presets()) std::cout << p.name << '\t' << p.description << '\n';
      return 0;
    }
    dipnoise::set_max_threads(threads);
    dipnoise::json raw = dipnoise::read_json_file(dipnoise::resolve_config_path(config).string());
    if (resolution > 0) {
      dipnoise::json& target = raw.contains("toolkit") && raw.contains("config") ? raw["config"] : raw;
      target["grid"]["resolution"] = resolution;
    }
    const dipnoise::RunConfig cfg = dipnoise::parse_config(raw);
    dipnoise::RunOutput out;
    if (sweep->parsed()) out = dipnoise::run_sweep(cfg);
    else if (scaling->parsed()) out = dipnoise::run_scaling(cfg);
    else if (chain->parsed()) out = dipnoise::run_chain(cfg);
    else out = dipnoise::run_oracle_check(cfg);
    dipnoise::write_outputs(out, out_dir);
    for (const auto& f : out.files) std::cout << (std::filesystem::path(out_dir) / f.name).string() << '\n';
    if (!out.verdict) return fail("check", "oracle check failed: see the verdict file", 1);
    return 0;
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what(), 2);
  } catch (const nlohmann::json::exception& e) {
    return fail("config", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("numerical", e.what(), 1);
  }
}

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vimlab/experiment.hpp"

namespace {

constexpr int kValidationExit = 1;
constexpr int kOracleFailureExit = 2;

std::filesystem::path sidecar_path(const std::filesystem::path& out) {
  auto p = out;
  return p.replace_extension(".json");
}

void write_outputs(const vimlab::ExperimentConfig& cfg, const std::string& table) {
  if (cfg.output.empty() || cfg.output == "-") {
    std::cout << table;
    return;
  }
  const std::filesystem::path out(cfg.output);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream(out, std::ios::binary) << table;
  std::ofstream(sidecar_path(out), std::ios::binary) << vimlab::config_json(cfg);
  std::clog << "[vimlab] wrote " << out.string() << " and " << sidecar_path(out).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vimlab: variable importance estimation and oracle checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  for (const char* name : {"simulate", "analyze", "oracle-check", "convergence"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI experiment file")->required();
    sub->add_option("--out", out, "output CSV path (overrides experiment.output)");
    sub->add_option("--seed", seed, "root seed (overrides experiment.seed)");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    auto cfg = vimlab::load_config(config_path);
    if (out) cfg.output = *out;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    std::ostringstream table;
    if (command == "simulate") {
      vimlab::write_results(table, vimlab::run_simulate(cfg, jobs));
    } else if (command == "analyze") {
      vimlab::write_results(table, vimlab::run_analyze(cfg, jobs));
    } else if (command == "convergence") {
      vimlab::write_convergence(table, vimlab::run_convergence(cfg, jobs));
    } else {
      if (cfg.kind != vimlab::ExperimentKind::oracle_check)
        vimlab::fail(vimlab::ErrorCode::validation, "config experiment.kind: oracle-check expects oracle_check");
      const auto lines = vimlab::run_oracle_check(cfg);
      vimlab::write_oracle_report(table, lines);
      write_outputs(cfg, table.str());
      for (const auto& l : lines)
        if (!l.pass) return kOracleFailureExit;
      return 0;
    }
    write_outputs(cfg, table.str());
  } catch (const vimlab::Error& e) {
    std::cerr << "vimlab: " << vimlab::to_string(e.code()) << ": " << e.what() << '\n';
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "vimlab: " << e.what() << '\n';
    return kValidationExit;
  }
  return 0;
}

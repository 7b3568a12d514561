#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "mmot/experiment.hpp"

namespace {

void print_summary(const mmot::CommandResult& result) {
  if (result.report.contains("error")) {
    std::cerr << "error: " << result.report["error"].get<std::string>() << "\n";
    return;
  }
  if (result.report.contains("verdicts")) {
    for (const auto& [name, verdict] : result.report["verdicts"].items()) {
      std::cout << name << ": " << verdict.get<std::string>() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale laboratory for multi-marginal optimal transport"};
  app.require_subcommand(1);

  std::string config_path;
  auto* solve = app.add_subcommand("solve", "Solve an experiment config and run its checks");
  solve->add_option("config", config_path, "Experiment config JSON")->required();

  std::string cost_path;
  int samples = 20;
  std::uint64_t seed = 0;
  auto* audit = app.add_subcommand("twist-audit", "Sample-audit differential twist conditions");
  audit->add_option("cost", cost_path, "Cost spec JSON")->required();
  audit->add_option("--samples", samples, "Sample count per condition");
  audit->add_option("--seed", seed, "Sampling seed");

  std::string search_path;
  auto* search = app.add_subcommand(
      "converse-search", "Search for monotone-but-uncertified candidate sets (m >= 4)");
  search->add_option("spec", search_path, "Search spec JSON")->required();

  std::string out_dir = ".";
  auto* demo = app.add_subcommand("demo", "Run the bundled demo instance");
  demo->add_option("--out", out_dir, "Output directory");

  std::string report_out;
  app.add_option("--report", report_out, "Write the full report JSON to this path");

  CLI11_PARSE(app, argc, argv);

  mmot::CommandResult result;
  if (solve->parsed()) {
    result = mmot::cmd_solve(config_path);
  } else if (audit->parsed()) {
    result = mmot::cmd_twist_audit_file(cost_path, samples, seed);
  } else if (search->parsed()) {
    result = mmot::cmd_converse_search_file(search_path);
  } else {
    result = mmot::cmd_demo(out_dir);
  }

  print_summary(result);
  if (!report_out.empty()) {
    try {
      std::ofstream f(report_out);
      f << result.report.dump(2) << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error writing report: " << e.what() << "\n";
      return 1;
    }
  }
  return result.exit_code;
}

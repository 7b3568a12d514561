#pragma once

#include <cstdint>
#include <string>

#include "mmot/io_json.hpp"

namespace mmot {

inline constexpr const char* kVersion = "0.1.0";

struct CommandResult {
  int exit_code = 0;  // 0 all pass, 1 config/runtime error, 2 check failure
  json report;
};

// Runs the pipeline solve -> splitting -> monotone -> order_two -> twist ->
// graph -> uniqueness -> tensors -> projections on one experiment config.
// All nondeterministic data (timestamp, timings) lives under meta.volatile.
CommandResult run_experiment(const json& config);

// File-based front ends; unreadable or invalid input yields exit code 1.
CommandResult cmd_solve(const std::string& config_path);
CommandResult cmd_twist_audit(const json& cost_spec, int samples, std::uint64_t seed);
CommandResult cmd_twist_audit_file(const std::string& cost_path, int samples,
                                   std::uint64_t seed);
CommandResult cmd_converse_search(const json& spec);
CommandResult cmd_converse_search_file(const std::string& spec_path);

// Bundled demo instance: m = 3 gangbo_swiech on seeded aligned marginals with
// graph, twist and monotone(3) checks.
json demo_config();
CommandResult cmd_demo(const std::string& out_dir);

}  // namespace mmot

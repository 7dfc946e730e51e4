// cli.hpp: command-line workflows over JSON configs
//
// Every command reads one JSON config (unknown keys are rejected, relative
// paths resolve against the config's directory) and writes CSV/JSON files into
// an output directory. Failures are reported as a JSON object on the error
// stream with exit code 1.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include <nlohmann/json_fwd.hpp>

namespace coopdet {

struct RunContext {
    std::filesystem::path config_dir;  // base for relative paths in the config
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
};

// efficiency.csv, probes.json
void cmd_evaluate(const nlohmann::json& config, const RunContext& ctx);
// optimization.json, optimized_spec.json, objective_history.csv
void cmd_optimize(const nlohmann::json& config, const RunContext& ctx);
// jitter.csv, jitter.json, and trace.csv if a trace is requested
void cmd_jitter(const nlohmann::json& config, const RunContext& ctx);
// tradeoff.csv
void cmd_sweep(const nlohmann::json& config, const RunContext& ctx);
// sequential.csv, and endcaps.csv if a capped spec is given
void cmd_compare(const nlohmann::json& config, const RunContext& ctx);

// Parses argv, runs the command and maps exceptions to the error JSON.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace coopdet

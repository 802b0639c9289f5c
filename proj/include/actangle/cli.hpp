#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "actangle/io.hpp"

namespace actangle {

/// Exit codes of the command-line front end.
enum ExitCode : int { kPass = 0, kCheckFailed = 1, kUsageError = 2, kNumericalError = 3 };

struct JobOptions {
    ChartOptions chart;
    double probe_time = 20.0;
    int gauge_degree = 3;
    int gauge_samples = 64;
    int verify_samples = 24;
    int integrals_samples = 20;
    double fd_step = 1e-5;
    double fiber_extent = 1.0;
    double canonical_tol = 1e-4;
    double integrals_tol = 1e-7;
    int orbit_count = 1;
    int orbit_points = 200;
    int action_points = 41;
    std::optional<int> expected_rank;
    std::string chart_file;  // emit input; defaults to <out>/chart.json
};

struct JobConfig {
    std::string system_label;  // catalog name or inline name
    IntegrableSystem system;
    Box box;
    Vec seed;
    JobOptions options;
};

/// Validates a config document. Unknown keys, inconsistent dimensions, empty boxes and
/// nonpositive tolerances raise PreconditionError.
JobConfig parse_config(const Json& doc);

/// The config with every default filled in, as mirrored into reports.
Json config_to_json(const JobConfig& cfg);

struct RunContext {
    std::filesystem::path out = ".";
    std::uint64_t seed_rng = 1;
    std::ostream* log = nullptr;
};

int cmd_analyze(const JobConfig& cfg, const RunContext& ctx);
int cmd_chart(const JobConfig& cfg, const RunContext& ctx);
int cmd_emit(const JobConfig& cfg, const RunContext& ctx);
/// Writes the catalog listing as JSON.
int cmd_catalog(std::ostream& out);

/// Full front end: parses arguments, loads the config, dispatches, maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace actangle

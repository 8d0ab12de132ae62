#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "thermoclock/cli/config.hpp"

namespace thermoclock::cli {

/// Process exit codes.
enum class Outcome : int { Pass = 0, CheckFailed = 1, ConfigError = 2, NumericalFailure = 3 };

/// One inequality lhs >= rhs; pass iff margin >= -sigma_band.
struct CheckRecord {
    std::string name;
    std::string relation;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double sigma_band = 0.0;
    bool pass = false;
};

CheckRecord make_check(std::string name, std::string relation, double lhs, double rhs, double sigma_band);

struct RunReport {
    ExperimentConfig config;
    std::vector<CheckRecord> checks;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::pair<std::string, std::string>> notes;
    std::vector<std::string> files; ///< written, relative to the output directory
    double wall_time = 0.0;         ///< seconds
    std::string version{kVersion};

    bool all_pass() const;
    double metric(const std::string& name) const;
};

struct RunOptions {
    std::filesystem::path out_dir; ///< resolved output directory
    bool write_files = true;
};

/// Output directory: flag, else config out_dir, else $THERMOCLOCK_OUT, else "thermoclock-out".
std::filesystem::path resolve_out_dir(const std::string& flag, const ExperimentConfig& config);

/// Runs one experiment. Writes report.json and data CSVs (when write_csv) into
/// options.out_dir and nowhere else. Library errors propagate.
RunReport run(const ExperimentConfig& config, const RunOptions& options);

/// JSON report. The config echo is a valid config; wall_time is the last field
/// and is omitted from the canonical form used for reproducibility checks.
std::string report_json(const RunReport& report, bool include_wall_time = true);

/// Fixed-layout summary: header line then one row per check.
std::string summary_table(const RunReport& report);

/// Checks as CSV: name,relation,lhs,rhs,margin,sigma_band,pass.
std::string checks_csv(const RunReport& report);

/// Exit code for an exception thrown by a run.
Outcome classify(const std::exception& error);

struct SweepPoint {
    std::string value;
    Outcome outcome = Outcome::Pass;
    std::string error;
    RunReport report;
};

struct SweepResult {
    std::string axis;
    std::vector<SweepPoint> points;
    std::vector<std::string> files;
    Outcome worst() const;
};

/// One run per value of a numeric key. Points that fail are recorded and the
/// sweep continues. Writes sweep.csv (value, check rows), sweep_metrics.csv and
/// plot_sweep.py into out_dir. Throws ValidationError for an empty value list
/// or a non-numeric axis. `parallel` > 1 runs points concurrently; results do
/// not depend on it.
SweepResult sweep(const ExperimentConfig& config, const std::string& axis, const std::vector<std::string>& values,
                  const std::filesystem::path& out_dir, unsigned parallel = 1);

} // namespace thermoclock::cli

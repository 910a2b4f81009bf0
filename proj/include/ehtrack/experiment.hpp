// Parameter sweeps, figure presets and result tables.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehtrack/model.hpp"
#include "ehtrack/policies.hpp"
#include "ehtrack/solver.hpp"

namespace ehtrack {

/// Invalid experiment description; maps to exit code 1 in the CLI.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SweepAxis { p, mu, N, p_f, p_s, B, m, gamma };
std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

enum class ExperimentKind {
    /// One row per sweep value and policy.
    sweep,
    /// Policy decision for every belief-state.
    structure,
    /// Running mean cost over time for the solved policy.
    convergence,
};
std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct SimulationSettings {
    bool enabled = true;
    std::uint64_t horizon = 1000000;
    std::uint64_t warmup = 10000;
    int reps = 10;
    std::uint64_t seed = 1;
};

struct ExperimentSpec {
    std::string name = "experiment";
    ExperimentKind kind = ExperimentKind::sweep;
    ModelConfig base;
    /// Optional table distortion; overrides base.distortion when set.
    std::vector<double> distortion_table;
    SweepAxis axis = SweepAxis::p;
    std::vector<double> values;
    std::vector<PolicySpec> policies;
    SimulationSettings simulation;
    RviaOptions solver;
    GammaTuning tuning;
    /// Convergence experiments: slots at which the running mean is reported.
    std::vector<std::uint64_t> checkpoints;
};

/// Base configuration with the sweep coordinate applied (unchanged for the
/// gamma axis).
ModelConfig config_at(const ExperimentSpec& spec, double value);
ModelParams params_at(const ExperimentSpec& spec, double value);

/// Throws ConfigError naming the offending field.
void validate(const ExperimentSpec& spec);

struct SweepRow {
    std::string series;
    double sweep_value = 0.0;
    std::string policy;
    std::optional<double> gamma;
    std::optional<double> mean_cost;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::optional<double> solver_gain;
    double build_seconds = 0.0;
    double solve_seconds = 0.0;
    std::optional<std::size_t> state_count;
    std::string error;
};

struct StructureRow {
    std::string series;
    double sweep_value = 0.0;
    std::string policy;
    BeliefState state;
    std::vector<double> belief;
    Action action = kIdle;
};

struct ConvergenceRow {
    std::string series;
    double sweep_value = 0.0;
    std::string policy;
    std::uint64_t slot = 0;
    double mean_cost = 0.0;
};

struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::sweep;
    std::vector<SweepRow> sweep;
    std::vector<StructureRow> structure;
    std::vector<ConvergenceRow> convergence;
    /// Per-point failures, one message each.
    std::vector<std::string> errors;

    bool has_errors() const { return !errors.empty(); }
    void append(ExperimentResult other);
};

struct RunOptions {
    unsigned jobs = 1;
    std::optional<std::filesystem::path> cache_dir;
    /// Directory for one trace CSV per (point, policy) when set.
    std::optional<std::filesystem::path> trace_dir;
    /// Progress messages when set.
    std::ostream* log = nullptr;
};

/// Runs every (sweep value, policy) pair. Points run on `jobs` workers but
/// rows are ordered by sweep value, then by policy order in the spec.
ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});
ExperimentResult run_experiments(const std::vector<ExperimentSpec>& specs, const RunOptions& options = {});

/// CSV for the result's kind. Timing columns are written as empty fields
/// when `timing` is false, which makes reruns byte-comparable.
void write_csv(std::ostream& out, const ExperimentResult& result, bool timing = true);

std::vector<std::string> preset_names();
/// Built-in figure experiments; several presets expand to sub-specs.
/// Throws ConfigError for an unknown name.
std::vector<ExperimentSpec> figure_preset(const std::string& name);

/// The smallest admissible self-transition probability above 1/N.
double nearest_admissible_p(int num_states, double p);

}  // namespace ehtrack

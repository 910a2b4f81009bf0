// Command-line front end: solve, simulate, sweep, preset, tune-gamma.
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "ehtrack/cache.hpp"
#include "ehtrack/config.hpp"
#include "ehtrack/experiment.hpp"
#include "ehtrack/policies.hpp"

using namespace ehtrack;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string cache_dir;
    bool trace = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
    auto* cfg = cmd->add_option("--config", o.config, "YAML experiment file");
    if (config_required) cfg->required();
    cmd->add_option("--out", o.out, "Output CSV path (default: stdout)");
    cmd->add_option("--seed", o.seed, "Base seed for simulation and tuning");
    cmd->add_option("--jobs", o.jobs, "Worker threads across sweep points")->check(CLI::PositiveNumber);
    cmd->add_option("--cache-dir", o.cache_dir, "Directory for belief-set and kernel caches");
    cmd->add_flag("--trace", o.trace, "Write one per-slot trace CSV per point and policy");
    cmd->add_flag("--quiet,-q", o.quiet, "Suppress progress messages");
}

void apply_seed(std::vector<ExperimentSpec>& specs, const CommonOptions& o) {
    if (!o.seed) return;
    for (auto& s : specs) {
        s.simulation.seed = *o.seed;
        s.tuning.seed = *o.seed + 1000000;
    }
}

RunOptions run_options(const CommonOptions& o) {
    RunOptions r;
    r.jobs = o.jobs;
    if (!o.cache_dir.empty()) r.cache_dir = o.cache_dir;
    if (o.trace) {
        std::filesystem::path base = o.out.empty() ? std::filesystem::path("trace") : std::filesystem::path(o.out);
        r.trace_dir = base.replace_extension("").string() + "_traces";
    }
    if (!o.quiet) r.log = &std::cerr;
    return r;
}

// Writes through a temporary so a failed run never leaves a truncated CSV.
template <typename Fn>
void emit(const CommonOptions& o, Fn&& fill) {
    if (o.out.empty()) {
        fill(std::cout);
        return;
    }
    const std::filesystem::path path(o.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ostringstream buf;
    fill(buf);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << buf.str();
}

int finish(const ExperimentResult& result) {
    for (const auto& e : result.errors) std::cerr << "error: " << e << '\n';
    return result.has_errors() ? kPartialFailure : kOk;
}

int run_specs(std::vector<ExperimentSpec> specs, const CommonOptions& o) {
    apply_seed(specs, o);
    const ExperimentResult result = run_experiments(specs, run_options(o));
    emit(o, [&](std::ostream& out) { write_csv(out, result); });
    return finish(result);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Solver and simulator for status updates from an energy-harvesting transmitter"};
    app.require_subcommand(1);

    CommonOptions solve_opts, simulate_opts, sweep_opts, preset_opts, tune_opts;
    std::string policy_csv;
    std::string preset_name;
    bool list_presets = false;

    auto* solve = app.add_subcommand("solve", "Build and solve the belief-MDP at each point of a config");
    add_common(solve, solve_opts, true);
    solve->add_option("--policy-csv", policy_csv, "Also write the policy table of the first point");

    auto* simulate = app.add_subcommand("simulate", "Simulate the configured policies without a sweep report");
    add_common(simulate, simulate_opts, true);

    auto* sweep = app.add_subcommand("sweep", "Run a configured sweep");
    add_common(sweep, sweep_opts, true);

    auto* preset = app.add_subcommand("preset", "Run a built-in figure experiment");
    add_common(preset, preset_opts, false);
    preset->add_option("name", preset_name, "Preset name (fig2 ... fig10)");
    preset->add_flag("--list", list_presets, "List preset names");

    auto* tune = app.add_subcommand("tune-gamma", "Tune the energy-aware regularizer at each point");
    add_common(tune, tune_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*solve) {
            auto specs = load_experiments(solve_opts.config);
            for (auto& s : specs) {
                s.policies = {{PolicyKind::pomdp, std::nullopt}};
                s.simulation.enabled = false;
                if (s.kind == ExperimentKind::convergence) s.kind = ExperimentKind::sweep;
            }
            if (!policy_csv.empty()) {
                const ModelParams params = params_at(specs.front(), specs.front().values.front());
                std::shared_ptr<const BeliefMdp> mdp;
                if (!solve_opts.cache_dir.empty()) {
                    ArtifactCache cache(solve_opts.cache_dir);
                    mdp = cache.belief_mdp(params);
                } else {
                    mdp = std::make_shared<const BeliefMdp>(build_belief_mdp(params));
                }
                const RviaSolution sol = solve_rvia(mdp->kernel, mdp->costs, specs.front().solver);
                std::ofstream out(policy_csv);
                if (!out) throw std::runtime_error("cannot write " + policy_csv);
                write_policy_csv(out, *mdp, sol.policy);
            }
            return run_specs(std::move(specs), solve_opts);
        }
        if (*simulate) {
            auto specs = load_experiments(simulate_opts.config);
            for (auto& s : specs) {
                if (s.kind == ExperimentKind::structure) throw ConfigError("simulate needs a sweep or convergence config");
                s.simulation.enabled = true;
            }
            return run_specs(std::move(specs), simulate_opts);
        }
        if (*sweep) return run_specs(load_experiments(sweep_opts.config), sweep_opts);
        if (*preset) {
            if (list_presets) {
                for (const auto& n : preset_names()) std::cout << n << '\n';
                return kOk;
            }
            if (preset_name.empty()) throw ConfigError("preset needs a name (see --list)");
            auto specs = figure_preset(preset_name);
            if (!preset_opts.config.empty()) {
                std::ifstream in(preset_opts.config);
                if (!in) throw ConfigError("cannot read config file " + preset_opts.config);
                std::stringstream buf;
                buf << in.rdbuf();
                specs = apply_overrides(std::move(specs), buf.str(), preset_opts.config);
            }
            return run_specs(std::move(specs), preset_opts);
        }
        if (*tune) {
            auto specs = load_experiments(tune_opts.config);
            apply_seed(specs, tune_opts);
            std::ostringstream table;
            table << "series,sweep_value,gamma,mean_cost,best\n";
            table.precision(10);
            for (const auto& s : specs) {
                for (double v : s.values) {
                    const ModelParams params = params_at(s, v);
                    GammaTuning tuning = s.tuning;
                    tuning.jobs = tune_opts.jobs;
                    const GammaTuningResult r = tune_gamma(params, tuning);
                    for (std::size_t k = 0; k < r.grid.size(); ++k) {
                        table << s.name << ',' << v << ',' << r.grid[k] << ',' << r.mean_costs[k] << ','
                              << (r.grid[k] == r.best_gamma ? 1 : 0) << '\n';
                    }
                    if (!tune_opts.quiet) std::cerr << "[" << s.name << "] " << v << " best gamma " << r.best_gamma << '\n';
                }
            }
            emit(tune_opts, [&](std::ostream& out) { out << table.str(); });
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kPartialFailure;
    }
    return kOk;
}

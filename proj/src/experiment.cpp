#include "ehtrack/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "ehtrack/belief_mdp.hpp"
#include "ehtrack/cache.hpp"
#include "ehtrack/sim.hpp"

namespace ehtrack {

std::string to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::p:
        return "p";
    case SweepAxis::mu:
        return "mu";
    case SweepAxis::N:
        return "N";
    case SweepAxis::p_f:
        return "p_f";
    case SweepAxis::p_s:
        return "p_s";
    case SweepAxis::B:
        return "B";
    case SweepAxis::m:
        return "m";
    case SweepAxis::gamma:
        return "gamma";
    }
    return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    for (SweepAxis a : {SweepAxis::p, SweepAxis::mu, SweepAxis::N, SweepAxis::p_f, SweepAxis::p_s, SweepAxis::B,
                        SweepAxis::m, SweepAxis::gamma}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown sweep axis '" + name + "' (expected p, mu, N, p_f, p_s, B, m or gamma)");
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::sweep:
        return "sweep";
    case ExperimentKind::structure:
        return "structure";
    case ExperimentKind::convergence:
        return "convergence";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    if (name == "sweep") return ExperimentKind::sweep;
    if (name == "structure") return ExperimentKind::structure;
    if (name == "convergence") return ExperimentKind::convergence;
    throw ConfigError("unknown experiment kind '" + name + "' (expected sweep, structure or convergence)");
}

ModelConfig config_at(const ExperimentSpec& spec, double value) {
    ModelConfig c = spec.base;
    switch (spec.axis) {
    case SweepAxis::p:
        c.p = value;
        break;
    case SweepAxis::mu:
        c.mu = value;
        break;
    case SweepAxis::N:
        c.num_states = static_cast<int>(std::lround(value));
        break;
    case SweepAxis::p_f:
        c.p_f = value;
        break;
    case SweepAxis::p_s:
        c.p_s = value;
        break;
    case SweepAxis::B:
        c.capacity = static_cast<int>(std::lround(value));
        break;
    case SweepAxis::m:
        c.depth = static_cast<int>(std::lround(value));
        break;
    case SweepAxis::gamma:
        break;
    }
    return c;
}

ModelParams params_at(const ExperimentSpec& spec, double value) {
    const ModelConfig c = config_at(spec, value);
    if (!spec.distortion_table.empty()) return ModelParams(c, Distortion::from_table(c.num_states, spec.distortion_table));
    return ModelParams(c);
}

void validate(const ExperimentSpec& spec) {
    const std::string where = spec.name + ": ";
    if (spec.values.empty()) throw ConfigError(where + "sweep.values must not be empty");
    if (spec.policies.empty()) throw ConfigError(where + "policies must not be empty");
    const bool integral = spec.axis == SweepAxis::N || spec.axis == SweepAxis::B || spec.axis == SweepAxis::m;
    bool has_lc_aware = false;
    bool has_pomdp = false;
    for (const PolicySpec& p : spec.policies) {
        has_lc_aware |= p.kind == PolicyKind::lc_aware;
        has_pomdp |= p.kind == PolicyKind::pomdp;
        if (p.gamma && !(*p.gamma >= 0.0)) throw ConfigError(where + "policy gamma must be nonnegative");
    }
    for (double v : spec.values) {
        if (!std::isfinite(v)) throw ConfigError(where + "sweep values must be finite");
        if (integral && v != std::round(v)) {
            throw ConfigError(where + "sweep axis " + to_string(spec.axis) + " needs integer values");
        }
        if (spec.axis == SweepAxis::gamma && v < 0.0) throw ConfigError(where + "gamma values must be nonnegative");
        try {
            (void)params_at(spec, v);
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << where << "sweep value " << v << " for axis " << to_string(spec.axis) << " is invalid: " << e.what();
            throw ConfigError(msg.str());
        }
    }
    if (spec.axis == SweepAxis::gamma && !has_lc_aware) {
        throw ConfigError(where + "a gamma sweep needs the lc_aware policy");
    }
    const SimulationSettings& sim = spec.simulation;
    const bool simulating = spec.kind != ExperimentKind::structure && sim.enabled;
    if (simulating) {
        if (sim.reps < 2) throw ConfigError(where + "simulation.reps must be at least 2");
        if (sim.warmup >= sim.horizon) throw ConfigError(where + "simulation.warmup must be below simulation.horizon");
    }
    if (spec.kind == ExperimentKind::convergence) {
        if (!sim.enabled) throw ConfigError(where + "convergence experiments need simulation enabled");
        if (spec.checkpoints.empty()) throw ConfigError(where + "convergence experiments need checkpoints");
        for (std::size_t k = 0; k < spec.checkpoints.size(); ++k) {
            if (spec.checkpoints[k] <= sim.warmup || spec.checkpoints[k] > sim.horizon ||
                (k && spec.checkpoints[k] <= spec.checkpoints[k - 1])) {
                throw ConfigError(where + "checkpoints must increase within (warmup, horizon]");
            }
        }
    }
    if (has_pomdp || spec.kind == ExperimentKind::structure) {
        if (!(spec.solver.epsilon > 0.0)) throw ConfigError(where + "solver.epsilon must be positive");
        if (spec.solver.max_iterations < 1) throw ConfigError(where + "solver.max_iterations must be positive");
    }
    if (has_lc_aware) {
        if (spec.tuning.reps < 2) throw ConfigError(where + "tuning.reps must be at least 2");
        if (spec.tuning.warmup >= spec.tuning.horizon) {
            throw ConfigError(where + "tuning.warmup must be below tuning.horizon");
        }
        for (double g : spec.tuning.grid) {
            if (!(g >= 0.0)) throw ConfigError(where + "tuning.grid values must be nonnegative");
        }
    }
}

void ExperimentResult::append(ExperimentResult other) {
    for (auto& r : other.sweep) sweep.push_back(std::move(r));
    for (auto& r : other.structure) structure.push_back(std::move(r));
    for (auto& r : other.convergence) convergence.push_back(std::move(r));
    for (auto& e : other.errors) errors.push_back(std::move(e));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string file_token(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    return out;
}

struct PointContext {
    const ExperimentSpec& spec;
    const RunOptions& options;
    ArtifactCache* cache;
    std::mutex* cache_mutex;
};

std::shared_ptr<const BeliefMdp> build_mdp(const ModelParams& params, const PointContext& ctx) {
    if (ctx.cache) {
        std::lock_guard lock(*ctx.cache_mutex);
        return ctx.cache->belief_mdp(params);
    }
    return std::make_shared<const BeliefMdp>(build_belief_mdp(params));
}

ExperimentResult run_point(double value, const PointContext& ctx) {
    const ExperimentSpec& spec = ctx.spec;
    ExperimentResult out;
    out.kind = spec.kind;
    const ModelParams params = params_at(spec, value);
    auto log = [&](const std::string& msg) {
        if (ctx.options.log) {
            static std::mutex log_mutex;
            std::lock_guard lock(log_mutex);
            *ctx.options.log << "[" << spec.name << "] " << to_string(spec.axis) << "=" << format_number(value) << " "
                             << msg << std::endl;
        }
    };

    const bool has_pomdp = std::any_of(spec.policies.begin(), spec.policies.end(),
                                       [](const PolicySpec& p) { return p.kind == PolicyKind::pomdp; });
    std::shared_ptr<const BeliefMdp> mdp;
    std::string build_error;
    double build_seconds = 0.0;
    if (has_pomdp || spec.kind == ExperimentKind::structure) {
        const auto t0 = Clock::now();
        try {
            mdp = build_mdp(params, ctx);
        } catch (const std::exception& e) {
            build_error = std::string("build failed: ") + e.what();
        }
        build_seconds = seconds_since(t0);
        if (mdp) log("built " + std::to_string(mdp->space.size()) + " states");
    }
    std::optional<RviaSolution> solution;
    std::string solve_error;
    double solve_seconds = 0.0;
    if (has_pomdp && mdp) {
        const auto t0 = Clock::now();
        try {
            solution = solve_rvia(mdp->kernel, mdp->costs, spec.solver);
        } catch (const std::exception& e) {
            solve_error = std::string("solve failed: ") + e.what();
        }
        solve_seconds = seconds_since(t0);
        if (solution) log("gain " + format_number(solution->gain));
    }

    EpisodeConfig episode;
    episode.horizon = spec.simulation.horizon;
    episode.warmup = spec.simulation.warmup;
    if (spec.kind == ExperimentKind::convergence) episode.checkpoints = spec.checkpoints;
    const bool simulate = spec.kind != ExperimentKind::structure && spec.simulation.enabled;

    for (const PolicySpec& ps : spec.policies) {
        SweepRow row;
        row.series = spec.name;
        row.sweep_value = value;
        row.policy = to_string(ps.kind);
        std::unique_ptr<Policy> policy;
        try {
            switch (ps.kind) {
            case PolicyKind::pomdp:
                row.build_seconds = build_seconds;
                row.solve_seconds = solve_seconds;
                if (mdp) row.state_count = mdp->space.size();
                if (!build_error.empty()) throw std::runtime_error(build_error);
                if (!solve_error.empty()) throw std::runtime_error(solve_error);
                row.solver_gain = solution->gain;
                policy = std::make_unique<TablePolicy>(mdp, solution->policy);
                break;
            case PolicyKind::lc_agnostic:
                policy = std::make_unique<LowComplexityPolicy>(params, 0.0);
                break;
            case PolicyKind::lc_aware: {
                double gamma = 0.0;
                if (spec.axis == SweepAxis::gamma) {
                    gamma = value;
                } else if (ps.gamma) {
                    gamma = *ps.gamma;
                } else {
                    const auto t0 = Clock::now();
                    gamma = tune_gamma(params, spec.tuning).best_gamma;
                    row.solve_seconds = seconds_since(t0);
                    log("tuned gamma " + format_number(gamma));
                }
                row.gamma = gamma;
                policy = std::make_unique<LowComplexityPolicy>(params, gamma);
                break;
            }
            case PolicyKind::bo:
                policy = std::make_unique<BatteryOnlyPolicy>();
                break;
            case PolicyKind::bo_rc:
                policy = std::make_unique<RedundancyCheckPolicy>(params.distortion());
                break;
            }

            if (spec.kind == ExperimentKind::structure) {
                const BeliefMdp& m = *mdp;
                for (std::size_t id = 0; id < m.space.size(); ++id) {
                    const BeliefState& s = m.space[id];
                    const auto belief = m.beliefs.member(s.belief).probs();
                    const Action a = policy->decide({{s.x, s.battery, s.ack_prev, s.x_prev}, belief, s.belief});
                    out.structure.push_back({spec.name, value, row.policy, s, {belief.begin(), belief.end()}, a});
                }
            } else if (simulate) {
                if (ctx.options.trace_dir) {
                    std::filesystem::create_directories(*ctx.options.trace_dir);
                    const auto path = *ctx.options.trace_dir /
                                      file_token(spec.name + "_" + to_string(spec.axis) + "=" +
                                                 format_number(value) + "_" + row.policy + ".csv");
                    std::ofstream trace(path);
                    if (!trace) throw std::runtime_error("cannot write trace " + path.string());
                    EpisodeConfig traced = episode;
                    traced.seed = spec.simulation.seed;
                    traced.trace = &trace;
                    (void)run_episode(*policy, params, traced);
                }
                const Evaluation eval =
                    evaluate_policy(*policy, params, episode, spec.simulation.reps, spec.simulation.seed);
                row.mean_cost = eval.mean;
                row.ci_low = eval.ci_low;
                row.ci_high = eval.ci_high;
                log(row.policy + " mean " + format_number(eval.mean));
                if (spec.kind == ExperimentKind::convergence) {
                    for (std::size_t k = 0; k < spec.checkpoints.size(); ++k) {
                        double sum = 0.0;
                        for (const EpisodeResult& e : eval.episodes) sum += e.running_means[k];
                        out.convergence.push_back({spec.name, value, row.policy, spec.checkpoints[k],
                                                   sum / static_cast<double>(eval.episodes.size())});
                    }
                }
            }
        } catch (const std::exception& e) {
            row.error = e.what();
            std::ostringstream msg;
            msg << spec.name << " " << to_string(spec.axis) << "=" << format_number(value) << " " << row.policy << ": "
                << e.what();
            out.errors.push_back(msg.str());
            log(row.policy + " failed: " + e.what());
        }
        out.sweep.push_back(std::move(row));
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
    validate(spec);
    std::unique_ptr<ArtifactCache> cache;
    if (options.cache_dir) cache = std::make_unique<ArtifactCache>(*options.cache_dir);
    std::mutex cache_mutex;
    const PointContext ctx{spec, options, cache.get(), &cache_mutex};

    std::vector<ExperimentResult> points(spec.values.size());
    const unsigned workers = std::clamp<unsigned>(options.jobs, 1, static_cast<unsigned>(spec.values.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < spec.values.size(); ++i) points[i] = run_point(spec.values[i], ctx);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < spec.values.size(); i = next++) points[i] = run_point(spec.values[i], ctx);
            });
        }
        for (auto& th : pool) th.join();
    }

    ExperimentResult result;
    result.kind = spec.kind;
    for (auto& p : points) result.append(std::move(p));
    return result;
}

ExperimentResult run_experiments(const std::vector<ExperimentSpec>& specs, const RunOptions& options) {
    if (specs.empty()) throw ConfigError("no experiments to run");
    for (const auto& s : specs) {
        if (s.kind != specs.front().kind) throw ConfigError("all sub-experiments must share one kind");
    }
    ExperimentResult result;
    result.kind = specs.front().kind;
    for (const auto& s : specs) result.append(run_experiment(s, options));
    return result;
}

void write_csv(std::ostream& out, const ExperimentResult& result, bool timing) {
    switch (result.kind) {
    case ExperimentKind::sweep:
        out << "sweep_value,policy,mean_cost,ci_low,ci_high,solver_gain,build_seconds,solve_seconds,state_count,"
               "error,series,gamma\n";
        for (const SweepRow& r : result.sweep) {
            out << format_number(r.sweep_value) << ',' << r.policy << ',' << optional_number(r.mean_cost) << ','
                << optional_number(r.ci_low) << ',' << optional_number(r.ci_high) << ','
                << optional_number(r.solver_gain) << ',' << (timing ? format_number(r.build_seconds) : "") << ','
                << (timing ? format_number(r.solve_seconds) : "") << ','
                << (r.state_count ? std::to_string(*r.state_count) : "") << ',' << csv_field(r.error) << ','
                << csv_field(r.series) << ',' << optional_number(r.gamma) << '\n';
        }
        break;
    case ExperimentKind::structure:
        out << "series,sweep_value,policy,x,b,ack_prev,x_prev,belief_id,belief,action\n";
        for (const StructureRow& r : result.structure) {
            out << csv_field(r.series) << ',' << format_number(r.sweep_value) << ',' << r.policy << ','
                << r.state.x + 1 << ',' << r.state.battery << ',' << r.state.ack_prev << ',' << r.state.x_prev + 1
                << ',' << r.state.belief << ',';
            for (std::size_t i = 0; i < r.belief.size(); ++i) out << (i ? ";" : "") << format_number(r.belief[i]);
            out << ',' << r.action << '\n';
        }
        break;
    case ExperimentKind::convergence:
        out << "series,sweep_value,policy,slot,mean_cost\n";
        for (const ConvergenceRow& r : result.convergence) {
            out << csv_field(r.series) << ',' << format_number(r.sweep_value) << ',' << r.policy << ',' << r.slot << ','
                << format_number(r.mean_cost) << '\n';
        }
        break;
    }
}

double nearest_admissible_p(int num_states, double p) {
    if (num_states < 2) throw std::invalid_argument("N must be at least 2");
    double x = std::max(p, 1.0 / static_cast<double>(num_states));
    while (!(x * num_states > 1.0)) x = std::nextafter(x, 1.0);
    if (x >= 1.0) x = std::nextafter(1.0, 0.0);
    return x;
}

std::vector<std::string> preset_names() {
    return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10"};
}

namespace {

const std::vector<PolicySpec> kAllPolicies = {
    {PolicyKind::pomdp, std::nullopt},  {PolicyKind::lc_aware, std::nullopt}, {PolicyKind::lc_agnostic, std::nullopt},
    {PolicyKind::bo_rc, std::nullopt},  {PolicyKind::bo, std::nullopt},
};

ExperimentSpec preset_base(const std::string& name) {
    ExperimentSpec s;
    s.name = name;
    s.base.num_states = 3;
    s.base.p = 0.7;
    s.base.p_s = 0.6;
    s.base.p_f = 0.6;
    s.base.mu = 0.5;
    s.base.capacity = 3;
    s.base.depth = 6;
    return s;
}

std::string channel_label(double ps, double pf) {
    std::ostringstream out;
    out << "p_s=" << ps << ";p_f=" << pf;
    return out.str();
}

}  // namespace

std::vector<ExperimentSpec> figure_preset(const std::string& name) {
    if (name == "fig2") {
        std::vector<ExperimentSpec> specs;
        for (double ch : {0.2, 0.4, 0.6}) {
            ExperimentSpec s = preset_base("fig2[" + channel_label(ch, ch) + "]");
            s.base.p_s = ch;
            s.base.p_f = ch;
            s.axis = SweepAxis::m;
            s.values = {1, 2, 3, 4, 5, 6, 7};
            s.policies = {{PolicyKind::pomdp, std::nullopt}};
            specs.push_back(std::move(s));
        }
        return specs;
    }
    if (name == "fig3") {
        ExperimentSpec s = preset_base("fig3");
        s.kind = ExperimentKind::convergence;
        s.base.p_f = 0.7;
        s.axis = SweepAxis::p_s;
        s.values = {0.2, 0.4, 0.6, 0.8};
        s.policies = {{PolicyKind::pomdp, std::nullopt}};
        s.simulation.horizon = 100000;
        s.simulation.warmup = 0;
        s.checkpoints = {10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000, 20000, 50000, 100000};
        return {s};
    }
    if (name == "fig4" || name == "fig5") {
        ExperimentSpec s = preset_base(name);
        s.kind = ExperimentKind::structure;
        s.base.num_states = 2;
        s.base.p_s = name == "fig4" ? 0.6 : 0.4;
        s.base.p_f = 0.5;
        s.base.mu = 0.7;
        s.base.capacity = 3;
        s.axis = SweepAxis::p;
        s.values = {nearest_admissible_p(2, 0.5), 0.7, 0.9};
        s.simulation.enabled = false;
        if (name == "fig4") {
            s.policies = {{PolicyKind::lc_agnostic, std::nullopt}, {PolicyKind::lc_aware, std::nullopt}};
        } else {
            s.policies = {{PolicyKind::pomdp, std::nullopt}};
        }
        return {s};
    }
    if (name == "fig6") {
        ExperimentSpec s = preset_base("fig6");
        s.axis = SweepAxis::p;
        s.values = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        s.policies = kAllPolicies;
        return {s};
    }
    if (name == "fig7") {
        ExperimentSpec s = preset_base("fig7");
        s.axis = SweepAxis::mu;
        s.values = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
        s.policies = kAllPolicies;
        return {s};
    }
    if (name == "fig8") {
        ExperimentSpec s = preset_base("fig8");
        s.base.p_f = 0.2;
        s.base.mu = 0.2;
        s.base.depth = 4;
        s.axis = SweepAxis::N;
        s.values = {2, 3, 4, 5};
        s.policies = kAllPolicies;
        return {s};
    }
    if (name == "fig9") {
        ExperimentSpec s = preset_base("fig9");
        s.base.p_s = 0.4;
        s.axis = SweepAxis::p_f;
        s.values = {0.05, 0.25, 0.5, 0.75, 1.0};
        s.policies = kAllPolicies;
        return {s};
    }
    if (name == "fig10") {
        std::vector<ExperimentSpec> specs;
        for (double mu : {0.3, 0.5, 0.7}) {
            std::ostringstream label;
            label << "fig10[mu=" << mu << "]";
            ExperimentSpec s = preset_base(label.str());
            s.base.p_f = 0.7;
            s.base.mu = mu;
            s.axis = SweepAxis::B;
            s.values = {1, 3, 6, 9};
            s.policies = {{PolicyKind::pomdp, std::nullopt}};
            specs.push_back(std::move(s));
        }
        return specs;
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

}  // namespace ehtrack

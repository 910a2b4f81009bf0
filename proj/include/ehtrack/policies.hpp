// Transmission policies behind one decision interface.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehtrack/belief_mdp.hpp"
#include "ehtrack/model.hpp"

namespace ehtrack {

/// The observable part of a belief-state.
struct Observation {
    SourceState x = 0;
    EnergyLevel battery = 0;
    bool ack_prev = false;
    SourceState x_prev = 0;
};

struct DecisionContext {
    Observation obs;
    std::span<const double> belief;
    /// Member id when the caller tracks a truncated belief.
    std::optional<std::size_t> belief_id;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual Action decide(const DecisionContext& ctx) const = 0;
    virtual std::string name() const = 0;
    /// Table policies index states by belief-set member and need a
    /// truncated belief.
    virtual const BeliefSet* truncated_beliefs() const { return nullptr; }
};

enum class PolicyKind { pomdp, lc_agnostic, lc_aware, bo, bo_rc };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

struct PolicySpec {
    PolicyKind kind = PolicyKind::pomdp;
    /// Fixed regularization weight for lc_aware; tuned when unset.
    std::optional<double> gamma;
};

/// Conditional expected distortion of the next slot when action `a` is
/// taken deterministically in (x, rho).
double expected_next_cost(SourceState x, std::span<const double> rho, Action a, const ModelParams& params);

Action lc_agnostic_decide(SourceState x, std::span<const double> rho, EnergyLevel b, const ModelParams& params);
/// argmin of expected_next_cost(a) + gamma * a * (1 - mu); ties idle.
Action lc_aware_decide(SourceState x, std::span<const double> rho, EnergyLevel b, const ModelParams& params,
                       double gamma);
Action bo_decide(EnergyLevel b);
/// Transmit iff b >= 1 and the expected distortion is strictly positive.
Action bo_rc_decide(EnergyLevel b, SourceState x, std::span<const double> rho, const Distortion& d);

/// Deterministic table from a solved belief-MDP.
class TablePolicy final : public Policy {
public:
    TablePolicy(std::shared_ptr<const BeliefMdp> mdp, std::vector<std::uint8_t> actions);

    Action decide(const DecisionContext& ctx) const override;
    std::string name() const override { return "pomdp"; }
    const BeliefSet* truncated_beliefs() const override { return &mdp_->beliefs; }

    const BeliefMdp& mdp() const { return *mdp_; }
    const std::vector<std::uint8_t>& actions() const { return actions_; }

private:
    std::shared_ptr<const BeliefMdp> mdp_;
    std::vector<std::uint8_t> actions_;
};

/// Per-slot greedy policy; gamma = 0 is the energy-agnostic variant.
class LowComplexityPolicy final : public Policy {
public:
    LowComplexityPolicy(const ModelParams& params, double gamma);

    Action decide(const DecisionContext& ctx) const override;
    std::string name() const override;
    double gamma() const { return gamma_; }

private:
    int n_;
    double p_, q_, p_s_, penalty_;
    double gamma_;
    std::vector<double> d_;          // d(x, i), row-major
    std::vector<double> moved_sum_;  // sum_{j != x} d(j, i), row-major in (x, i)
};

class BatteryOnlyPolicy final : public Policy {
public:
    Action decide(const DecisionContext& ctx) const override { return bo_decide(ctx.obs.battery); }
    std::string name() const override { return "bo"; }
};

class RedundancyCheckPolicy final : public Policy {
public:
    explicit RedundancyCheckPolicy(Distortion d) : d_(std::move(d)) {}
    Action decide(const DecisionContext& ctx) const override {
        return bo_rc_decide(ctx.obs.battery, ctx.obs.x, ctx.belief, d_);
    }
    std::string name() const override { return "bo_rc"; }

private:
    Distortion d_;
};

struct GammaTuning {
    std::vector<double> grid;  // empty: default_gamma_grid
    std::uint64_t horizon = 100000;
    std::uint64_t warmup = 10000;
    int reps = 20;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct GammaTuningResult {
    double best_gamma = 0.0;
    std::vector<double> grid;
    std::vector<double> mean_costs;
};

/// {0, 0.05, ..., 1} scaled by the largest distortion value.
std::vector<double> default_gamma_grid(const ModelParams& params);

/// Evaluates lc_aware at every grid point under common random numbers and
/// returns the cheapest gamma (smaller gamma on ties).
GammaTuningResult tune_gamma(const ModelParams& params, const GammaTuning& tuning);

}  // namespace ehtrack

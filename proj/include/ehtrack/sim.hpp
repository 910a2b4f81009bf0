// Monte Carlo environment: source, battery, channels, sink estimate and the
// transmitter-side belief, slot by slot.
#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "ehtrack/belief.hpp"
#include "ehtrack/model.hpp"
#include "ehtrack/policies.hpp"

namespace ehtrack {

enum class BeliefMode {
    /// Truncated for table policies, exact otherwise.
    automatic,
    /// Full NACK recursion without projection.
    exact,
    /// Belief-set member ids with projected overflow.
    truncated,
};

struct EpisodeConfig {
    /// Total slots, warmup included.
    std::uint64_t horizon = 1000000;
    /// Leading slots excluded from the average.
    std::uint64_t warmup = 10000;
    std::uint64_t seed = 1;
    BeliefMode belief_mode = BeliefMode::automatic;
    /// Belief set for truncated mode when the policy does not carry one.
    const BeliefSet* beliefs = nullptr;
    /// Per-slot CSV (t, X, X_hat, b, a, y, f, cost) when set.
    std::ostream* trace = nullptr;
    /// Slot counts (1-based, increasing) at which to record the running
    /// post-warmup mean.
    std::vector<std::uint64_t> checkpoints;
};

struct EpisodeResult {
    double mean_cost = 0.0;
    std::uint64_t slots = 0;
    std::uint64_t transmissions = 0;
    std::uint64_t deliveries = 0;
    std::uint64_t acks = 0;
    EnergyLevel battery_min = 0;
    EnergyLevel battery_max = 0;
    double battery_mean = 0.0;
    /// Running mean cost at each checkpoint.
    std::vector<double> running_means;

    friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

/// Runs one episode. Counters cover post-warmup slots only. Throws
/// std::logic_error if the policy transmits on an empty battery or, in exact
/// mode, if the belief ever loses the true sink estimate.
EpisodeResult run_episode(const Policy& policy, const ModelParams& params, const EpisodeConfig& cfg);

struct Evaluation {
    double mean = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<EpisodeResult> episodes;
};

/// `reps` independent episodes with seeds base_seed + i; Student-t 95%
/// interval on the per-episode means. Needs reps >= 2.
Evaluation evaluate_policy(const Policy& policy, const ModelParams& params, EpisodeConfig cfg, int reps,
                           std::uint64_t base_seed, unsigned jobs = 1);

}  // namespace ehtrack

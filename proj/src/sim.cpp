#include "ehtrack/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ehtrack/rng.hpp"
#include "ehtrack/source.hpp"

namespace ehtrack {

namespace {

std::string describe(std::uint64_t t, const Observation& obs) {
    std::ostringstream out;
    out << "slot " << t << " (x=" << obs.x << ", b=" << obs.battery << ", f_prev=" << obs.ack_prev
        << ", x_prev=" << obs.x_prev << ")";
    return out.str();
}

}  // namespace

EpisodeResult run_episode(const Policy& policy, const ModelParams& params, const EpisodeConfig& cfg) {
    if (cfg.warmup >= cfg.horizon) throw std::invalid_argument("warmup must be shorter than the horizon");
    const int n = params.num_states();
    const Distortion& d = params.distortion();

    const BeliefSet* set = policy.truncated_beliefs();
    bool truncated = false;
    switch (cfg.belief_mode) {
    case BeliefMode::automatic:
        truncated = set != nullptr;
        break;
    case BeliefMode::exact:
        if (set) throw std::invalid_argument("table policies need truncated belief tracking");
        break;
    case BeliefMode::truncated:
        truncated = true;
        break;
    }
    if (truncated && !set) set = cfg.beliefs;
    if (truncated && !set) throw std::invalid_argument("truncated belief tracking needs a belief set");
    if (truncated && set->num_states() != n) throw std::invalid_argument("belief set does not match N");

    const NackConstants nack = params.perfect_ack() ? NackConstants{} : NackConstants::from(params);
    CounterRng source_rng = make_stream(cfg.seed, Stream::source);
    CounterRng energy_rng = make_stream(cfg.seed, Stream::energy);
    CounterRng channel_rng = make_stream(cfg.seed, Stream::channel);

    Observation obs;
    obs.x = std::min(static_cast<int>(source_rng.uniform() * n), n - 1);
    obs.battery = 0;
    obs.ack_prev = false;
    obs.x_prev = 0;
    SourceState x_hat = 0;
    std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
    rho[0] = 1.0;
    std::size_t belief_id = truncated ? set->reset_id(0) : 0;

    for (std::size_t k = 0; k < cfg.checkpoints.size(); ++k) {
        const std::uint64_t c = cfg.checkpoints[k];
        if (c <= cfg.warmup || c > cfg.horizon || (k > 0 && c <= cfg.checkpoints[k - 1])) {
            throw std::invalid_argument("checkpoints must increase within (warmup, horizon]");
        }
    }
    std::size_t next_checkpoint = 0;

    if (cfg.trace) *cfg.trace << "t,X,X_hat,b,a,y,f,cost\n";

    EpisodeResult result;
    result.battery_min = params.capacity();
    double cost_sum = 0.0;
    double battery_sum = 0.0;

    for (std::uint64_t t = 0; t < cfg.horizon; ++t) {
        const bool counted = t >= cfg.warmup;
        std::span<const double> belief =
            truncated ? set->member(belief_id).probs() : std::span<const double>(rho);
        if (!truncated && !(rho[static_cast<std::size_t>(x_hat)] > 0.0)) {
            throw std::logic_error("belief lost the sink estimate at " + describe(t + 1, obs));
        }
        const double cost = d(obs.x, x_hat);

        DecisionContext ctx{obs, belief, truncated ? std::optional<std::size_t>(belief_id) : std::nullopt};
        const Action a = policy.decide(ctx);
        if (a != kIdle && a != kTransmit) throw std::logic_error("policy returned an invalid action");
        if (a == kTransmit && obs.battery < 1) {
            throw std::logic_error(policy.name() + " transmitted on an empty battery at " + describe(t + 1, obs));
        }

        // Both channel draws happen every slot so transmit patterns never
        // shift the other streams.
        const double u_forward = channel_rng.uniform();
        const double u_feedback = channel_rng.uniform();
        const bool delivered = a == kTransmit && u_forward < params.p_s();
        const bool acked = delivered && u_feedback < params.p_f();

        if (cfg.trace) {
            *cfg.trace << (t + 1) << ',' << obs.x << ',' << x_hat << ',' << obs.battery << ',' << a << ','
                       << delivered << ',' << acked << ',' << cost << '\n';
        }
        if (counted) {
            cost_sum += cost;
            battery_sum += obs.battery;
            result.battery_min = std::min(result.battery_min, obs.battery);
            result.battery_max = std::max(result.battery_max, obs.battery);
            result.transmissions += a == kTransmit;
            result.deliveries += delivered;
            result.acks += acked;
            if (next_checkpoint < cfg.checkpoints.size() && cfg.checkpoints[next_checkpoint] == t + 1) {
                result.running_means.push_back(cost_sum / static_cast<double>(t + 1 - cfg.warmup));
                ++next_checkpoint;
            }
        }

        if (delivered) x_hat = obs.x;
        if (a == kTransmit) {
            if (acked) {
                if (truncated) {
                    belief_id = set->reset_id(obs.x);
                } else {
                    std::fill(rho.begin(), rho.end(), 0.0);
                    rho[static_cast<std::size_t>(obs.x)] = 1.0;
                }
            } else if (truncated) {
                belief_id = set->nack_successor(belief_id, obs.x);
            } else {
                update_nack_in_place(rho, obs.x, nack);
            }
        }

        const int energy = energy_rng.bernoulli(params.mu()) ? 1 : 0;
        const EnergyLevel battery = battery_step(obs.battery, energy, a, params.capacity());
        const SourceState next_x = step_source(obs.x, params, source_rng);

        obs.ack_prev = acked;
        obs.x_prev = obs.x;
        obs.x = next_x;
        obs.battery = battery;
    }

    result.slots = cfg.horizon - cfg.warmup;
    result.mean_cost = cost_sum / static_cast<double>(result.slots);
    result.battery_mean = battery_sum / static_cast<double>(result.slots);
    return result;
}

Evaluation evaluate_policy(const Policy& policy, const ModelParams& params, EpisodeConfig cfg, int reps,
                           std::uint64_t base_seed, unsigned jobs) {
    if (reps < 2) throw std::invalid_argument("evaluate_policy needs at least two replications");
    cfg.trace = nullptr;
    Evaluation eval;
    eval.episodes.resize(static_cast<std::size_t>(reps));

    auto run = [&](int i) {
        EpisodeConfig c = cfg;
        c.seed = base_seed + static_cast<std::uint64_t>(i);
        eval.episodes[static_cast<std::size_t>(i)] = run_episode(policy, params, c);
    };
    const unsigned workers = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(reps));
    if (workers == 1) {
        for (int i = 0; i < reps; ++i) run(i);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int i = next++; i < reps; i = next++) {
                    try {
                        run(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    double sum = 0.0;
    for (const auto& e : eval.episodes) sum += e.mean_cost;
    eval.mean = sum / reps;
    double ss = 0.0;
    for (const auto& e : eval.episodes) ss += (e.mean_cost - eval.mean) * (e.mean_cost - eval.mean);
    const double sd = std::sqrt(ss / (reps - 1));
    eval.std_error = sd / std::sqrt(static_cast<double>(reps));
    const boost::math::students_t dist(reps - 1);
    const double half = boost::math::quantile(boost::math::complement(dist, 0.025)) * eval.std_error;
    eval.ci_low = eval.mean - half;
    eval.ci_high = eval.mean + half;
    return eval;
}

}  // namespace ehtrack

#include "ehtrack/policies.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ehtrack/belief.hpp"

namespace ehtrack {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kZeroCost = 1e-12;

bool strictly_below(double a, double b) { return a < b - kTieTolerance * std::max(1.0, std::abs(b)); }

}  // namespace

std::string to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::pomdp:
        return "pomdp";
    case PolicyKind::lc_agnostic:
        return "lc_agnostic";
    case PolicyKind::lc_aware:
        return "lc_aware";
    case PolicyKind::bo:
        return "bo";
    case PolicyKind::bo_rc:
        return "bo_rc";
    }
    return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
    if (name == "pomdp") return PolicyKind::pomdp;
    if (name == "lc_agnostic") return PolicyKind::lc_agnostic;
    if (name == "lc_aware") return PolicyKind::lc_aware;
    if (name == "bo") return PolicyKind::bo;
    if (name == "bo_rc") return PolicyKind::bo_rc;
    throw std::invalid_argument("unknown policy '" + name + "' (expected pomdp, lc_agnostic, lc_aware, bo or bo_rc)");
}

double expected_next_cost(SourceState x, std::span<const double> rho, Action a, const ModelParams& params) {
    const int n = params.num_states();
    const Distortion& d = params.distortion();
    const double p = params.p();
    const double q = params.q();
    const double ps = params.p_s();
    // Source stays, sink estimate drawn from rho.
    const double stay_stale = expected_distortion(rho, x, d);
    // Source moves, sink estimate drawn from rho.
    double move_stale = 0.0;
    for (int i = 0; i < n; ++i) {
        if (rho[static_cast<std::size_t>(i)] == 0.0) continue;
        for (int j = 0; j < n; ++j) {
            if (j != x) move_stale += d(j, i) * rho[static_cast<std::size_t>(i)];
        }
    }
    if (a == kIdle) return p * stay_stale + q * move_stale;
    // Source moves, sink holds the fresh update x.
    double move_fresh = 0.0;
    for (int j = 0; j < n; ++j) {
        if (j != x) move_fresh += d(j, x);
    }
    return p * ps * d(x, x) + p * (1.0 - ps) * stay_stale + q * ps * move_fresh + q * (1.0 - ps) * move_stale;
}

Action lc_aware_decide(SourceState x, std::span<const double> rho, EnergyLevel b, const ModelParams& params,
                       double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
    if (b < 1) return kIdle;
    const double idle = expected_next_cost(x, rho, kIdle, params);
    const double send = expected_next_cost(x, rho, kTransmit, params) + gamma * (1.0 - params.mu());
    return strictly_below(send, idle) ? kTransmit : kIdle;
}

Action lc_agnostic_decide(SourceState x, std::span<const double> rho, EnergyLevel b, const ModelParams& params) {
    return lc_aware_decide(x, rho, b, params, 0.0);
}

Action bo_decide(EnergyLevel b) { return b >= 1 ? kTransmit : kIdle; }

Action bo_rc_decide(EnergyLevel b, SourceState x, std::span<const double> rho, const Distortion& d) {
    return (b >= 1 && expected_distortion(rho, x, d) > kZeroCost) ? kTransmit : kIdle;
}

TablePolicy::TablePolicy(std::shared_ptr<const BeliefMdp> mdp, std::vector<std::uint8_t> actions)
    : mdp_(std::move(mdp)), actions_(std::move(actions)) {
    if (!mdp_) throw std::invalid_argument("table policy needs a belief-MDP");
    if (actions_.size() != mdp_->space.size()) throw std::invalid_argument("policy table does not match the state space");
    for (std::size_t s = 0; s < actions_.size(); ++s) {
        if (actions_[s] > 1 || (actions_[s] == kTransmit && mdp_->space[s].battery < 1)) {
            throw std::invalid_argument("policy table contains an infeasible action");
        }
    }
}

Action TablePolicy::decide(const DecisionContext& ctx) const {
    if (!ctx.belief_id) throw std::logic_error("table policy needs a truncated belief id");
    const BeliefState s{ctx.obs.x, ctx.obs.battery, *ctx.belief_id, ctx.obs.ack_prev, ctx.obs.x_prev};
    const auto id = mdp_->space.find(s);
    if (!id) throw std::logic_error("belief-state not in the policy table");
    return actions_[*id];
}

LowComplexityPolicy::LowComplexityPolicy(const ModelParams& params, double gamma)
    : n_(params.num_states()),
      p_(params.p()),
      q_(params.q()),
      p_s_(params.p_s()),
      penalty_(gamma * (1.0 - params.mu())),
      gamma_(gamma) {
    if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
    const auto n = static_cast<std::size_t>(n_);
    d_.resize(n * n);
    moved_sum_.assign(n * n, 0.0);
    for (int x = 0; x < n_; ++x) {
        for (int i = 0; i < n_; ++i) {
            d_[static_cast<std::size_t>(x * n_ + i)] = params.distortion()(x, i);
            for (int j = 0; j < n_; ++j) {
                if (j != x) moved_sum_[static_cast<std::size_t>(x * n_ + i)] += params.distortion()(j, i);
            }
        }
    }
}

Action LowComplexityPolicy::decide(const DecisionContext& ctx) const {
    if (ctx.obs.battery < 1) return kIdle;
    const int x = ctx.obs.x;
    const double* d_row = d_.data() + x * n_;
    const double* moved_row = moved_sum_.data() + x * n_;
    double stay_stale = 0.0;
    double move_stale = 0.0;
    for (int i = 0; i < n_; ++i) {
        const double r = ctx.belief[static_cast<std::size_t>(i)];
        stay_stale += r * d_row[i];
        move_stale += r * moved_row[i];
    }
    const double idle = p_ * stay_stale + q_ * move_stale;
    const double send = p_ * p_s_ * d_row[x] + p_ * (1.0 - p_s_) * stay_stale + q_ * p_s_ * moved_row[x] +
                        q_ * (1.0 - p_s_) * move_stale + penalty_;
    return strictly_below(send, idle) ? kTransmit : kIdle;
}

std::string LowComplexityPolicy::name() const {
    if (gamma_ == 0.0) return "lc_agnostic";
    std::ostringstream out;
    out << "lc_aware[gamma=" << gamma_ << "]";
    return out.str();
}

std::vector<double> default_gamma_grid(const ModelParams& params) {
    const double scale = params.distortion().max_value(params.num_states());
    std::vector<double> grid;
    for (int k = 0; k <= 20; ++k) grid.push_back(0.05 * k * scale);
    return grid;
}

}  // namespace ehtrack

// The finite, truncated belief-MDP: state indexing, stage costs, the folded
// transition kernel and the communicating-chain check.
#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ehtrack/belief.hpp"
#include "ehtrack/model.hpp"

namespace ehtrack {

/// (X, b, rho, f_{-1}, X_{-1}) with rho stored as a BeliefSet member id.
struct BeliefState {
    SourceState x = 0;
    EnergyLevel battery = 0;
    std::size_t belief = 0;
    bool ack_prev = false;
    SourceState x_prev = 0;

    friend auto operator<=>(const BeliefState&, const BeliefState&) = default;
};

/// Reachable belief-states with a dense lookup over the product space. Ids
/// follow lexicographic order on (x, b, belief, ack_prev, x_prev).
class StateSpace {
public:
    StateSpace(int num_states, int capacity, std::size_t belief_count, std::vector<BeliefState> states);

    std::size_t size() const { return states_.size(); }
    const BeliefState& operator[](std::size_t id) const { return states_[id]; }
    const std::vector<BeliefState>& states() const { return states_; }
    std::optional<std::size_t> find(const BeliefState& s) const;

    int num_states() const { return num_states_; }
    int capacity() const { return capacity_; }
    std::size_t belief_count() const { return belief_count_; }

private:
    std::size_t product_index(const BeliefState& s) const;

    int num_states_;
    int capacity_;
    std::size_t belief_count_;
    std::vector<BeliefState> states_;
    std::vector<std::int64_t> lookup_;
};

/// Compressed sparse rows for one action. An empty row means the action is
/// infeasible in that state.
struct SparseRows {
    std::vector<std::size_t> offsets;  // size = states + 1
    std::vector<std::uint32_t> targets;
    std::vector<double> probs;

    std::size_t row_begin(std::size_t s) const { return offsets[s]; }
    std::size_t row_end(std::size_t s) const { return offsets[s + 1]; }
    bool empty_row(std::size_t s) const { return offsets[s] == offsets[s + 1]; }
};

struct Kernel {
    std::size_t num_states = 0;
    std::array<SparseRows, 2> rows;

    bool feasible(std::size_t state, Action a) const { return !rows[static_cast<std::size_t>(a)].empty_row(state); }
    std::size_t nonzeros() const { return rows[0].targets.size() + rows[1].targets.size(); }
};

/// {0} on an empty battery, {0, 1} otherwise.
std::vector<Action> feasible_actions(const BeliefState& l);

/// sum_i rho_i d(x, i) for the state's belief.
double stage_cost(const BeliefState& l, const BeliefSet& set, const Distortion& d);
std::vector<double> stage_costs(const StateSpace& space, const BeliefSet& set, const Distortion& d);

/// Invokes `emit(next_state, probability)` for every outcome of taking
/// `a` in `l`, before merging duplicates and with overflow beliefs already
/// folded onto their projections. Zero-probability branches are skipped.
template <typename Emit>
void for_each_successor(const BeliefState& l, Action a, const ModelParams& params, const BeliefSet& set, Emit&& emit);

/// Reachability closure of the consistent reset states; throws if the seed
/// set is empty.
StateSpace build_state_space(const ModelParams& params, const BeliefSet& set);

/// Folded kernel; throws std::runtime_error if a row is not stochastic
/// within 1e-9 or exceeds the 4N fan-out bound.
Kernel build_kernel(const StateSpace& space, const ModelParams& params, const BeliefSet& set);

struct CommunicatingReport {
    bool communicating = false;
    std::size_t component_count = 0;
    /// (from, to) with `to` unreachable from `from`, when not communicating.
    std::optional<std::pair<std::size_t, std::size_t>> witness;
};

/// Strong connectivity of the graph of all positive-probability transitions
/// under either action.
CommunicatingReport check_communicating(const Kernel& kernel);

/// Everything needed to solve or simulate one parameter point.
struct BeliefMdp {
    BeliefSet beliefs;
    StateSpace space;
    Kernel kernel;
    std::vector<double> costs;
};

BeliefMdp build_belief_mdp(const ModelParams& params);
BeliefMdp build_belief_mdp(const ModelParams& params, BeliefSet beliefs);

// ---------------------------------------------------------------------------

template <typename Emit>
void for_each_successor(const BeliefState& l, Action a, const ModelParams& params, const BeliefSet& set, Emit&& emit) {
    const int n = params.num_states();
    const int cap = params.capacity();
    const double mu = params.mu();
    const std::array<double, 2> energy_prob = {1.0 - mu, mu};
    if (a == kIdle) {
        for (SourceState xn = 0; xn < n; ++xn) {
            const double px = params.transition(l.x, xn);
            for (int e = 0; e < 2; ++e) {
                const double pr = px * energy_prob[static_cast<std::size_t>(e)];
                if (pr <= 0.0) continue;
                emit(BeliefState{xn, std::min(l.battery + e, cap), l.belief, false, l.x}, pr);
            }
        }
        return;
    }
    const double ack = params.p_s() * params.p_f();
    const double nack = 1.0 - ack;
    const std::size_t reset = set.reset_id(l.x);
    const std::size_t folded = set.nack_successor(l.belief, l.x);
    for (SourceState xn = 0; xn < n; ++xn) {
        const double px = params.transition(l.x, xn);
        for (int e = 0; e < 2; ++e) {
            const double pe = px * energy_prob[static_cast<std::size_t>(e)];
            if (pe <= 0.0) continue;
            const EnergyLevel b = std::min(l.battery - 1 + e, cap);
            if (ack > 0.0) emit(BeliefState{xn, b, reset, true, l.x}, pe * ack);
            if (nack > 0.0) emit(BeliefState{xn, b, folded, false, l.x}, pe * nack);
        }
    }
}

}  // namespace ehtrack

#include "ehtrack/belief_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace ehtrack {

StateSpace::StateSpace(int num_states, int capacity, std::size_t belief_count, std::vector<BeliefState> states)
    : num_states_(num_states), capacity_(capacity), belief_count_(belief_count), states_(std::move(states)) {
    const std::size_t product = static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(capacity_ + 1) *
                                belief_count_ * 2 * static_cast<std::size_t>(num_states_);
    lookup_.assign(product, -1);
    for (std::size_t id = 0; id < states_.size(); ++id) {
        const BeliefState& s = states_[id];
        if (s.x < 0 || s.x >= num_states_ || s.x_prev < 0 || s.x_prev >= num_states_ || s.battery < 0 ||
            s.battery > capacity_ || s.belief >= belief_count_) {
            throw std::invalid_argument("belief-state outside the product space");
        }
        std::int64_t& slot = lookup_[product_index(s)];
        if (slot >= 0) throw std::invalid_argument("duplicate belief-state");
        slot = static_cast<std::int64_t>(id);
    }
}

std::size_t StateSpace::product_index(const BeliefState& s) const {
    std::size_t idx = static_cast<std::size_t>(s.x);
    idx = idx * static_cast<std::size_t>(capacity_ + 1) + static_cast<std::size_t>(s.battery);
    idx = idx * belief_count_ + s.belief;
    idx = idx * 2 + (s.ack_prev ? 1 : 0);
    idx = idx * static_cast<std::size_t>(num_states_) + static_cast<std::size_t>(s.x_prev);
    return idx;
}

std::optional<std::size_t> StateSpace::find(const BeliefState& s) const {
    if (s.x < 0 || s.x >= num_states_ || s.x_prev < 0 || s.x_prev >= num_states_ || s.battery < 0 ||
        s.battery > capacity_ || s.belief >= belief_count_) {
        return std::nullopt;
    }
    const std::int64_t id = lookup_[product_index(s)];
    if (id < 0) return std::nullopt;
    return static_cast<std::size_t>(id);
}

std::vector<Action> feasible_actions(const BeliefState& l) {
    if (l.battery <= 0) return {kIdle};
    return {kIdle, kTransmit};
}

double stage_cost(const BeliefState& l, const BeliefSet& set, const Distortion& d) {
    return expected_distortion(set.member(l.belief), l.x, d);
}

std::vector<double> stage_costs(const StateSpace& space, const BeliefSet& set, const Distortion& d) {
    std::vector<double> costs(space.size());
    for (std::size_t id = 0; id < space.size(); ++id) costs[id] = stage_cost(space[id], set, d);
    return costs;
}

StateSpace build_state_space(const ModelParams& params, const BeliefSet& set) {
    const int n = params.num_states();
    const int cap = params.capacity();
    const std::size_t r = set.size();
    if (set.num_states() != n) throw std::invalid_argument("belief set built for a different N");

    auto encode = [&](const BeliefState& s) {
        std::size_t idx = static_cast<std::size_t>(s.x);
        idx = idx * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(s.battery);
        idx = idx * r + s.belief;
        idx = idx * 2 + (s.ack_prev ? 1 : 0);
        return idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(s.x_prev);
    };
    auto decode = [&](std::size_t idx) {
        BeliefState s;
        s.x_prev = static_cast<SourceState>(idx % static_cast<std::size_t>(n));
        idx /= static_cast<std::size_t>(n);
        s.ack_prev = (idx % 2) == 1;
        idx /= 2;
        s.belief = idx % r;
        idx /= r;
        s.battery = static_cast<EnergyLevel>(idx % static_cast<std::size_t>(cap + 1));
        s.x = static_cast<SourceState>(idx / static_cast<std::size_t>(cap + 1));
        return s;
    };

    const std::size_t product = static_cast<std::size_t>(n) * static_cast<std::size_t>(cap + 1) * r * 2 *
                                static_cast<std::size_t>(n);
    std::vector<bool> seen(product, false);
    std::deque<BeliefState> queue;
    auto visit = [&](const BeliefState& s) {
        const std::size_t idx = encode(s);
        if (!seen[idx]) {
            seen[idx] = true;
            queue.push_back(s);
        }
    };
    for (SourceState x = 0; x < n; ++x) {
        for (EnergyLevel b = 0; b <= cap; ++b) {
            for (SourceState xp = 0; xp < n; ++xp) {
                for (bool ack : {false, true}) visit(BeliefState{x, b, set.reset_id(xp), ack, xp});
            }
        }
    }
    if (queue.empty()) throw std::invalid_argument("empty seed set for the belief-state space");
    while (!queue.empty()) {
        const BeliefState s = queue.front();
        queue.pop_front();
        for (Action a : feasible_actions(s)) {
            for_each_successor(s, a, params, set, [&](const BeliefState& next, double) { visit(next); });
        }
    }
    std::vector<BeliefState> states;
    for (std::size_t idx = 0; idx < product; ++idx) {
        if (seen[idx]) states.push_back(decode(idx));
    }
    return StateSpace(n, cap, r, std::move(states));
}

Kernel build_kernel(const StateSpace& space, const ModelParams& params, const BeliefSet& set) {
    if (space.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw std::length_error("belief-state space too large for 32-bit kernel indices");
    }
    Kernel kernel;
    kernel.num_states = space.size();
    const std::size_t fan_out_bound = 4 * static_cast<std::size_t>(params.num_states());
    std::vector<std::pair<std::uint32_t, double>> row;
    for (std::size_t a = 0; a < 2; ++a) {
        SparseRows& rows = kernel.rows[a];
        rows.offsets.assign(1, 0);
        rows.targets.reserve(space.size() * (a == 0 ? 2 : 4) * static_cast<std::size_t>(params.num_states()));
        rows.probs.reserve(rows.targets.capacity());
        for (std::size_t id = 0; id < space.size(); ++id) {
            const BeliefState& s = space[id];
            row.clear();
            if (a == 0 || s.battery >= 1) {
                for_each_successor(s, static_cast<Action>(a), params, set, [&](const BeliefState& next, double pr) {
                    const auto target = space.find(next);
                    if (!target) throw std::logic_error("successor outside the reachable state space");
                    row.emplace_back(static_cast<std::uint32_t>(*target), pr);
                });
                std::sort(row.begin(), row.end());
                double total = 0.0;
                std::size_t kept = 0;
                for (std::size_t k = 0; k < row.size(); ++k) {
                    if (kept > 0 && row[kept - 1].first == row[k].first) {
                        row[kept - 1].second += row[k].second;
                    } else {
                        row[kept++] = row[k];
                    }
                    total += row[k].second;
                }
                row.resize(kept);
                if (std::abs(total - 1.0) > 1e-9) {
                    throw std::runtime_error("kernel row " + std::to_string(id) + " action " + std::to_string(a) +
                                             " sums to " + std::to_string(total));
                }
                if (row.size() > fan_out_bound) throw std::runtime_error("kernel row exceeds the 4N fan-out bound");
                for (const auto& [t, pr] : row) {
                    rows.targets.push_back(t);
                    rows.probs.push_back(pr);
                }
            }
            rows.offsets.push_back(rows.targets.size());
        }
    }
    return kernel;
}

namespace {

std::vector<std::vector<std::uint32_t>> adjacency(const Kernel& kernel, bool reverse) {
    std::vector<std::vector<std::uint32_t>> adj(kernel.num_states);
    for (const SparseRows& rows : kernel.rows) {
        for (std::size_t s = 0; s < kernel.num_states; ++s) {
            for (std::size_t k = rows.row_begin(s); k < rows.row_end(s); ++k) {
                if (rows.probs[k] <= 0.0) continue;
                if (reverse) {
                    adj[rows.targets[k]].push_back(static_cast<std::uint32_t>(s));
                } else {
                    adj[s].push_back(rows.targets[k]);
                }
            }
        }
    }
    return adj;
}

std::vector<bool> reachable_from(const std::vector<std::vector<std::uint32_t>>& adj, std::size_t start) {
    std::vector<bool> seen(adj.size(), false);
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::uint32_t v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    return seen;
}

}  // namespace

CommunicatingReport check_communicating(const Kernel& kernel) {
    CommunicatingReport report;
    const std::size_t n = kernel.num_states;
    if (n == 0) return report;
    const auto fwd = adjacency(kernel, false);
    const auto rev = adjacency(kernel, true);

    // Kosaraju: finishing order on the forward graph, then components on
    // the reverse graph in decreasing finishing time.
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<bool> seen(n, false);
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (seen[root]) continue;
        seen[root] = true;
        stack.emplace_back(root, 0);
        while (!stack.empty()) {
            auto& [u, next] = stack.back();
            if (next < fwd[u].size()) {
                const std::uint32_t v = fwd[u][next++];
                if (!seen[v]) {
                    seen[v] = true;
                    stack.emplace_back(v, 0);
                }
            } else {
                order.push_back(u);
                stack.pop_back();
            }
        }
    }
    std::vector<std::int64_t> component(n, -1);
    std::size_t count = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (component[*it] >= 0) continue;
        std::vector<std::size_t> work{*it};
        component[*it] = static_cast<std::int64_t>(count);
        while (!work.empty()) {
            const std::size_t u = work.back();
            work.pop_back();
            for (std::uint32_t v : rev[u]) {
                if (component[v] < 0) {
                    component[v] = static_cast<std::int64_t>(count);
                    work.push_back(v);
                }
            }
        }
        ++count;
    }
    report.component_count = count;
    report.communicating = count == 1;
    if (!report.communicating) {
        const auto from_zero = reachable_from(fwd, 0);
        for (std::size_t v = 0; v < n; ++v) {
            if (!from_zero[v]) {
                report.witness = std::make_pair(std::size_t{0}, v);
                return report;
            }
        }
        const auto to_zero = reachable_from(rev, 0);
        for (std::size_t u = 0; u < n; ++u) {
            if (!to_zero[u]) {
                report.witness = std::make_pair(u, std::size_t{0});
                return report;
            }
        }
    }
    return report;
}

BeliefMdp build_belief_mdp(const ModelParams& params) { return build_belief_mdp(params, make_belief_set(params)); }

BeliefMdp build_belief_mdp(const ModelParams& params, BeliefSet beliefs) {
    StateSpace space = build_state_space(params, beliefs);
    Kernel kernel = build_kernel(space, params, beliefs);
    std::vector<double> costs = stage_costs(space, beliefs, params.distortion());
    return BeliefMdp{std::move(beliefs), std::move(space), std::move(kernel), std::move(costs)};
}

}  // namespace ehtrack

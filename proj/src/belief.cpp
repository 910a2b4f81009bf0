#include "ehtrack/belief.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ehtrack {

Belief::Belief(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("belief must have at least one entry");
    double total = 0.0;
    for (double v : probs_) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("belief entries must be finite and nonnegative");
        total += v;
    }
    if (total <= 0.0) throw std::invalid_argument("belief has no mass");
    for (double& v : probs_) v /= total;
}

Belief Belief::reset(SourceState x, int num_states) {
    if (x < 0 || x >= num_states) throw std::out_of_range("reset belief state out of range");
    std::vector<double> probs(static_cast<std::size_t>(num_states), 0.0);
    probs[static_cast<std::size_t>(x)] = 1.0;
    return Belief(std::move(probs));
}

std::optional<SourceState> Belief::reset_state() const {
    for (int i = 0; i < size(); ++i) {
        if (std::abs(probs_[static_cast<std::size_t>(i)] - 1.0) <= kCanonicalTolerance) return i;
    }
    return std::nullopt;
}

BeliefKey canonical_key(std::span<const double> probs) {
    BeliefKey key(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        key[i] = std::llround(probs[i] / kCanonicalTolerance);
    }
    return key;
}

std::size_t BeliefKeyHash::operator()(const BeliefKey& key) const noexcept {
    std::size_t h = 0xCBF29CE484222325ULL;
    for (std::int64_t v : key) {
        h ^= static_cast<std::size_t>(v) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

NackConstants NackConstants::from(double p_s, double p_f) {
    const double no_ack = 1.0 - p_s * p_f;
    if (no_ack <= 0.0) throw std::invalid_argument("NACK constants undefined when p_s * p_f = 1");
    NackConstants c;
    c.u1 = p_s * (1.0 - p_f) / no_ack;
    c.u2 = (1.0 - p_s) / no_ack;
    return c;
}

Belief update_idle(const Belief& rho) { return rho; }

Belief update_ack(SourceState x, int num_states) { return Belief::reset(x, num_states); }

void update_nack_in_place(std::span<double> rho, SourceState x, const NackConstants& c) {
    for (double& v : rho) v *= c.u2;
    rho[static_cast<std::size_t>(x)] += c.u1;
}

Belief update_nack(const Belief& rho, SourceState x, const NackConstants& c) {
    if (x < 0 || x >= rho.size()) throw std::out_of_range("transmitted state out of range");
    std::vector<double> next(rho.probs().begin(), rho.probs().end());
    update_nack_in_place(next, x, c);
    return Belief(std::move(next));
}

double expected_distortion(std::span<const double> rho, SourceState x, const Distortion& d) {
    double total = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (rho[i] != 0.0) total += rho[i] * d(x, static_cast<SourceState>(i));
    }
    return total;
}

double kl_divergence(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("KL divergence of beliefs with different lengths");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] <= 0.0) continue;
        if (b[i] <= 0.0) return std::numeric_limits<double>::infinity();
        total += a[i] * std::log(a[i] / b[i]);
    }
    return total;
}

namespace {

std::vector<double> smoothed_logs(const std::vector<Belief>& members, int n) {
    std::vector<double> logs;
    logs.reserve(members.size() * static_cast<std::size_t>(n));
    const double norm = 1.0 + n * kProjectionSmoothing;
    for (const Belief& m : members) {
        for (int i = 0; i < n; ++i) logs.push_back(std::log((m[i] + kProjectionSmoothing) / norm));
    }
    return logs;
}

std::size_t kl_argmin(std::span<const double> rho, const std::vector<double>& logs, int n) {
    // KL(rho || c) = sum rho_i log rho_i - sum rho_i log c_i; only the
    // cross term depends on the candidate.
    const std::size_t count = logs.size() / static_cast<std::size_t>(n);
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < count; ++id) {
        const double* row = logs.data() + id * static_cast<std::size_t>(n);
        double cross = 0.0;
        for (int i = 0; i < n; ++i) {
            if (rho[static_cast<std::size_t>(i)] > 0.0) cross -= rho[static_cast<std::size_t>(i)] * row[i];
        }
        if (cross < best_value) {
            best_value = cross;
            best = id;
        }
    }
    return best;
}

}  // namespace

BeliefSet::BeliefSet(int num_states, NackConstants constants, int depth, std::vector<Belief> members,
                     std::vector<int> member_depths, std::vector<std::size_t> nack_successors,
                     std::vector<OverflowEntry> overflow)
    : num_states_(num_states),
      constants_(constants),
      depth_(depth),
      members_(std::move(members)),
      member_depths_(std::move(member_depths)),
      nack_successors_(std::move(nack_successors)),
      overflow_(std::move(overflow)) {
    const auto n = static_cast<std::size_t>(num_states_);
    if (num_states_ < 2) throw std::invalid_argument("belief set needs N >= 2");
    if (member_depths_.size() != members_.size() || nack_successors_.size() != members_.size() * n) {
        throw std::invalid_argument("belief set tables have inconsistent sizes");
    }
    for (std::size_t id = 0; id < members_.size(); ++id) {
        if (members_[id].size() != num_states_) throw std::invalid_argument("belief set member has wrong length");
        if (!index_.emplace(canonical_key(members_[id].probs()), id).second) {
            throw std::invalid_argument("belief set contains duplicate members");
        }
    }
    for (std::size_t s : nack_successors_) {
        if (s >= members_.size()) throw std::invalid_argument("belief set successor out of range");
    }
    for (const OverflowEntry& e : overflow_) {
        if (e.projected >= members_.size()) throw std::invalid_argument("projection table entry out of range");
    }
    reset_ids_.resize(n);
    for (int x = 0; x < num_states_; ++x) {
        const auto id = find(Belief::reset(x, num_states_).probs());
        if (!id) throw std::invalid_argument("belief set is missing a reset belief");
        reset_ids_[static_cast<std::size_t>(x)] = *id;
    }
    smoothed_logs_ = smoothed_logs(members_, num_states_);
}

std::optional<std::size_t> BeliefSet::find(std::span<const double> probs) const {
    if (probs.size() != static_cast<std::size_t>(num_states_)) return std::nullopt;
    auto it = index_.find(canonical_key(probs));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t BeliefSet::project(std::span<const double> rho) const {
    if (rho.size() != static_cast<std::size_t>(num_states_)) {
        throw std::invalid_argument("projected belief has wrong length");
    }
    if (auto id = find(rho)) return *id;
    return kl_argmin(rho, smoothed_logs_, num_states_);
}

BeliefSet enumerate_belief_set(const ModelParams& params) {
    if (params.perfect_ack()) {
        throw std::invalid_argument("belief enumeration needs p_s * p_f < 1; use reset_belief_set");
    }
    const int n = params.num_states();
    const int depth = params.depth();
    const NackConstants c = NackConstants::from(params);

    std::vector<Belief> members;
    std::vector<int> depths;
    std::unordered_map<BeliefKey, std::size_t, BeliefKeyHash> index;
    auto insert = [&](Belief b, int d) -> std::pair<std::size_t, bool> {
        auto [it, inserted] = index.emplace(canonical_key(b.probs()), members.size());
        if (inserted) {
            members.push_back(std::move(b));
            depths.push_back(d);
        }
        return {it->second, inserted};
    };

    std::vector<std::size_t> frontier;
    for (int x = 0; x < n; ++x) frontier.push_back(insert(Belief::reset(x, n), 0).first);

    // successor[id * n + x], filled as members are expanded.
    std::vector<std::size_t> successor;
    constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
    struct Pending {
        std::size_t from;
        SourceState x;
        Belief belief;
    };
    std::vector<Pending> overflow_pending;

    for (int d = 0; d <= depth; ++d) {
        std::vector<std::size_t> next_frontier;
        for (std::size_t id : frontier) {
            for (int x = 0; x < n; ++x) {
                Belief next = update_nack(members[id], x, c);
                if (successor.size() < members.size() * static_cast<std::size_t>(n)) {
                    successor.resize(members.size() * static_cast<std::size_t>(n), kUnset);
                }
                const std::size_t slot = id * static_cast<std::size_t>(n) + static_cast<std::size_t>(x);
                if (auto it = index.find(canonical_key(next.probs())); it != index.end()) {
                    successor[slot] = it->second;
                } else if (d < depth) {
                    auto [nid, inserted] = insert(std::move(next), d + 1);
                    successor.resize(members.size() * static_cast<std::size_t>(n), kUnset);
                    successor[slot] = nid;
                    if (inserted) next_frontier.push_back(nid);
                } else {
                    overflow_pending.push_back({id, x, std::move(next)});
                }
            }
        }
        frontier = std::move(next_frontier);
        if (frontier.empty() && d < depth) break;
    }

    const std::vector<double> logs = smoothed_logs(members, n);
    std::vector<OverflowEntry> overflow;
    std::unordered_map<BeliefKey, std::size_t, BeliefKeyHash> overflow_index;
    for (Pending& pending : overflow_pending) {
        const BeliefKey key = canonical_key(pending.belief.probs());
        std::size_t target;
        if (auto it = overflow_index.find(key); it != overflow_index.end()) {
            target = overflow[it->second].projected;
        } else {
            target = kl_argmin(pending.belief.probs(), logs, n);
            overflow_index.emplace(key, overflow.size());
            overflow.push_back({std::move(pending.belief), target});
        }
        successor[pending.from * static_cast<std::size_t>(n) + static_cast<std::size_t>(pending.x)] = target;
    }
    for (std::size_t s : successor) {
        if (s == kUnset) throw std::logic_error("belief enumeration left a successor unset");
    }
    return BeliefSet(n, c, depth, std::move(members), std::move(depths), std::move(successor), std::move(overflow));
}

BeliefSet reset_belief_set(int num_states) {
    std::vector<Belief> members;
    std::vector<std::size_t> successor;
    for (int x = 0; x < num_states; ++x) members.push_back(Belief::reset(x, num_states));
    // Unused in perfect-ACK mode (a NACK has probability zero); a NACK that
    // never moves the belief keeps the table total.
    for (int id = 0; id < num_states; ++id) {
        for (int x = 0; x < num_states; ++x) successor.push_back(static_cast<std::size_t>(id));
    }
    NackConstants c;
    c.u1 = 0.0;
    c.u2 = 1.0;
    return BeliefSet(num_states, c, 0, std::move(members), std::vector<int>(static_cast<std::size_t>(num_states), 0),
                     std::move(successor), {});
}

BeliefSet make_belief_set(const ModelParams& params) {
    return params.perfect_ack() ? reset_belief_set(params.num_states()) : enumerate_belief_set(params);
}

}  // namespace ehtrack

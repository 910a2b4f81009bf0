// Beliefs over the sink estimate, their update rules and the truncated
// belief set used by the finite belief-MDP.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ehtrack/model.hpp"

namespace ehtrack {

/// Two beliefs within this L-infinity distance are identified.
inline constexpr double kCanonicalTolerance = 1e-9;
/// Added to every candidate entry before computing KL divergences.
inline constexpr double kProjectionSmoothing = 1e-12;

/// Probability vector over the possible sink estimates.
class Belief {
public:
    Belief() = default;
    /// Renormalizes; throws std::invalid_argument on negative, non-finite or
    /// all-zero input.
    explicit Belief(std::vector<double> probs);

    static Belief reset(SourceState x, int num_states);

    int size() const { return static_cast<int>(probs_.size()); }
    double operator[](int i) const { return probs_[static_cast<std::size_t>(i)]; }
    std::span<const double> probs() const { return probs_; }

    /// State x when the belief is the point mass e_x (up to tolerance).
    std::optional<SourceState> reset_state() const;

    friend bool operator==(const Belief&, const Belief&) = default;

private:
    std::vector<double> probs_;
};

using BeliefKey = std::vector<std::int64_t>;
BeliefKey canonical_key(std::span<const double> probs);

struct BeliefKeyHash {
    std::size_t operator()(const BeliefKey& key) const noexcept;
};

/// Posterior weights after a transmission without ACK:
/// u1 = Pr(delivered, ACK lost | no ACK), u2 = Pr(not delivered | no ACK).
struct NackConstants {
    double u1 = 0.0;
    double u2 = 1.0;

    /// Throws std::invalid_argument when p_s * p_f == 1 (no NACK possible).
    static NackConstants from(double p_s, double p_f);
    static NackConstants from(const ModelParams& params) { return from(params.p_s(), params.p_f()); }
};

Belief update_idle(const Belief& rho);
Belief update_ack(SourceState x, int num_states);
Belief update_nack(const Belief& rho, SourceState x, const NackConstants& c);
/// In-place form of update_nack for simulation loops.
void update_nack_in_place(std::span<double> rho, SourceState x, const NackConstants& c);

/// sum_i rho_i d(x, i).
double expected_distortion(std::span<const double> rho, SourceState x, const Distortion& d);
inline double expected_distortion(const Belief& rho, SourceState x, const Distortion& d) {
    return expected_distortion(rho.probs(), x, d);
}

/// sum_i a_i log(a_i / b_i) with 0 log 0 = 0; +infinity if some a_i > 0
/// meets b_i = 0.
double kl_divergence(std::span<const double> a, std::span<const double> b);
inline double kl_divergence(const Belief& a, const Belief& b) { return kl_divergence(a.probs(), b.probs()); }

/// One entry of the offline projection table: a belief one NACK beyond the
/// truncation depth and the member that stands in for it.
struct OverflowEntry {
    Belief belief;
    std::size_t projected = 0;
};

/// Reset beliefs plus every belief reachable by at most `depth` consecutive
/// NACKed transmissions. Built once, immutable afterwards.
class BeliefSet {
public:
    BeliefSet(int num_states, NackConstants constants, int depth, std::vector<Belief> members,
              std::vector<int> member_depths, std::vector<std::size_t> nack_successors,
              std::vector<OverflowEntry> overflow);

    int num_states() const { return num_states_; }
    int depth() const { return depth_; }
    const NackConstants& constants() const { return constants_; }

    std::size_t size() const { return members_.size(); }
    const Belief& member(std::size_t id) const { return members_[id]; }
    int member_depth(std::size_t id) const { return member_depths_[id]; }
    const std::vector<Belief>& members() const { return members_; }

    std::optional<std::size_t> find(std::span<const double> probs) const;
    std::optional<std::size_t> find(const Belief& b) const { return find(b.probs()); }
    std::size_t reset_id(SourceState x) const { return reset_ids_[static_cast<std::size_t>(x)]; }

    /// Member reached by a NACK after transmitting x from member `id`,
    /// with overflow beliefs already replaced by their projection.
    std::size_t nack_successor(std::size_t id, SourceState x) const {
        return nack_successors_[id * static_cast<std::size_t>(num_states_) + static_cast<std::size_t>(x)];
    }
    const std::vector<std::size_t>& nack_successors() const { return nack_successors_; }

    const std::vector<OverflowEntry>& overflow() const { return overflow_; }

    /// Member minimizing KL(rho || smoothed member); exact members map to
    /// themselves, ties go to the smallest id.
    std::size_t project(std::span<const double> rho) const;
    std::size_t project(const Belief& rho) const { return project(rho.probs()); }

private:
    int num_states_;
    NackConstants constants_;
    int depth_;
    std::vector<Belief> members_;
    std::vector<int> member_depths_;
    std::vector<std::size_t> nack_successors_;
    std::vector<OverflowEntry> overflow_;
    std::vector<std::size_t> reset_ids_;
    std::vector<double> smoothed_logs_;
    std::unordered_map<BeliefKey, std::size_t, BeliefKeyHash> index_;
};

/// Breadth-first closure of the reset beliefs under update_nack up to the
/// truncation depth. Throws std::invalid_argument when p_s * p_f == 1.
BeliefSet enumerate_belief_set(const ModelParams& params);

/// The N reset beliefs only; used when every lost ACK is impossible.
BeliefSet reset_belief_set(int num_states);

/// enumerate_belief_set, or reset_belief_set in perfect-ACK mode.
BeliefSet make_belief_set(const ModelParams& params);

inline std::size_t project(const Belief& rho, const BeliefSet& set) { return set.project(rho); }

}  // namespace ehtrack

// System parameters, distortion measures and battery dynamics.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ehtrack {

// Source states are 0-based internally (state k here is state k+1 in the
// usual 1..N labelling). Distortions only depend on differences, so the
// shift is invisible to costs.
using SourceState = int;
using EnergyLevel = int;
using Action = int;

inline constexpr Action kIdle = 0;
inline constexpr Action kTransmit = 1;

enum class DistortionKind { absolute, indicator, squared, table };

std::string_view to_string(DistortionKind kind);
DistortionKind distortion_kind_from_string(std::string_view name);

/// Bounded distortion d(x, x_hat) between the source state and the sink
/// estimate. The table kind is an N x N row-major matrix supplied by the
/// caller; it must vanish on the diagonal and be nonnegative.
class Distortion {
public:
    explicit Distortion(DistortionKind kind = DistortionKind::absolute);
    static Distortion from_table(int num_states, std::vector<double> table);

    DistortionKind kind() const { return kind_; }

    /// Throws std::out_of_range if either state is outside [0, num_states).
    double evaluate(SourceState x, SourceState x_hat, int num_states) const;

    /// Unchecked evaluation for inner loops.
    double operator()(SourceState x, SourceState x_hat) const {
        switch (kind_) {
        case DistortionKind::absolute:
            return x > x_hat ? x - x_hat : x_hat - x;
        case DistortionKind::indicator:
            return x == x_hat ? 0.0 : 1.0;
        case DistortionKind::squared:
            return static_cast<double>((x - x_hat) * (x - x_hat));
        case DistortionKind::table:
            break;
        }
        return table_[static_cast<std::size_t>(x * table_states_ + x_hat)];
    }

    double max_value(int num_states) const;

    /// Row-major matrix for the table kind, empty otherwise.
    const std::vector<double>& table() const { return table_; }

private:
    DistortionKind kind_;
    int table_states_ = 0;
    std::vector<double> table_;
};

/// Plain user-facing parameter record; validated by ModelParams.
struct ModelConfig {
    int num_states = 3;
    double p = 0.7;
    double p_s = 0.6;
    double p_f = 0.6;
    double mu = 0.5;
    int capacity = 3;
    int depth = 6;
    DistortionKind distortion = DistortionKind::absolute;
};

/// Immutable, validated system parameters. The cross-transition probability
/// q = (1 - p) / (N - 1) is computed once here and never supplied by users.
class ModelParams {
public:
    explicit ModelParams(const ModelConfig& config);
    ModelParams(const ModelConfig& config, Distortion distortion);

    int num_states() const { return config_.num_states; }
    double p() const { return config_.p; }
    double q() const { return q_; }
    double p_s() const { return config_.p_s; }
    double p_f() const { return config_.p_f; }
    double mu() const { return config_.mu; }
    int capacity() const { return config_.capacity; }
    int depth() const { return config_.depth; }
    const Distortion& distortion() const { return distortion_; }
    const ModelConfig& config() const { return config_; }

    /// p_s * p_f == 1: every NACK after a transmission means forward loss,
    /// so the belief space collapses to the reset beliefs.
    bool perfect_ack() const { return config_.p_s * config_.p_f >= 1.0; }

    /// Truncation depth actually used when enumerating beliefs.
    int effective_depth() const { return perfect_ack() ? 0 : config_.depth; }

    /// Probability that the source moves from `from` to `to` in one slot.
    double transition(SourceState from, SourceState to) const {
        return from == to ? config_.p : q_;
    }

private:
    ModelConfig config_;
    Distortion distortion_;
    double q_;
};

/// b(t+1) = min(b + e - a, B). Throws std::invalid_argument when the
/// action is infeasible (a > b) or the inputs are out of range.
EnergyLevel battery_step(EnergyLevel b, int energy_arrival, Action a, EnergyLevel capacity);

}  // namespace ehtrack

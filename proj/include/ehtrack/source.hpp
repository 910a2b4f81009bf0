// Symmetric Markov source and the sink-side estimator.
#pragma once

#include <optional>
#include <vector>

#include "ehtrack/model.hpp"
#include "ehtrack/rng.hpp"

namespace ehtrack {

/// N x N matrix with a constant diagonal and a constant off-diagonal. Every
/// power of the symmetric source matrix has this shape.
struct TransitionMatrix {
    int n = 0;
    double diagonal = 0.0;
    double off_diagonal = 0.0;

    static TransitionMatrix symmetric(const ModelParams& params);
    static TransitionMatrix symmetric(int n, double p);

    double operator()(int i, int j) const { return i == j ? diagonal : off_diagonal; }
    std::vector<double> dense() const;
};

/// P^K in closed form: diagonal = 1/N + (1 - 1/N) (p - q)^K.
TransitionMatrix k_step_matrix(const TransitionMatrix& P, int K);

/// One source transition; consumes exactly one uniform from `rng`.
SourceState step_source(SourceState x, const ModelParams& params, CounterRng& rng);

/// Maximum-likelihood estimate for p > q: the content of the most recently
/// delivered update, or `initial` if nothing has been delivered yet.
inline SourceState ml_estimate(std::optional<SourceState> last_delivered, SourceState initial) {
    return last_delivered.value_or(initial);
}

/// Sink state holding the ML estimate across slots.
class SinkEstimator {
public:
    explicit SinkEstimator(SourceState initial = 0) : initial_(initial) {}

    void deliver(SourceState x) { last_ = x; }
    SourceState estimate() const { return ml_estimate(last_, initial_); }

private:
    SourceState initial_;
    std::optional<SourceState> last_;
};

}  // namespace ehtrack

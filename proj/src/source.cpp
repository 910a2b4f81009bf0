#include "ehtrack/source.hpp"

#include <cmath>
#include <stdexcept>

namespace ehtrack {

TransitionMatrix TransitionMatrix::symmetric(const ModelParams& params) {
    return {params.num_states(), params.p(), params.q()};
}

TransitionMatrix TransitionMatrix::symmetric(int n, double p) {
    if (n < 2) throw std::invalid_argument("transition matrix needs N >= 2");
    return {n, p, (1.0 - p) / static_cast<double>(n - 1)};
}

std::vector<double> TransitionMatrix::dense() const {
    std::vector<double> out(static_cast<std::size_t>(n * n), off_diagonal);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i * n + i)] = diagonal;
    return out;
}

TransitionMatrix k_step_matrix(const TransitionMatrix& P, int K) {
    if (K < 1) throw std::invalid_argument("k_step_matrix needs K >= 1");
    if (K == 1) return P;
    const double inv_n = 1.0 / static_cast<double>(P.n);
    const double lambda_k = std::pow(P.diagonal - P.off_diagonal, K);
    return {P.n, inv_n + (1.0 - inv_n) * lambda_k, inv_n - inv_n * lambda_k};
}

SourceState step_source(SourceState x, const ModelParams& params, CounterRng& rng) {
    const double u = rng.uniform();
    if (u < params.p()) return x;
    const int others = params.num_states() - 1;
    int k = static_cast<int>((u - params.p()) / params.q());
    if (k >= others) k = others - 1;  // u close to 1
    return k < x ? k : k + 1;
}

}  // namespace ehtrack

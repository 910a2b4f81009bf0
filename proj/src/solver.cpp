#include "ehtrack/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ehtrack {

namespace {

// Relative slack below which two action values count as tied.
constexpr double kTieTolerance = 1e-12;

double expected_value(const SparseRows& rows, std::size_t s, const std::vector<double>& h) {
    double total = 0.0;
    for (std::size_t k = rows.row_begin(s); k < rows.row_end(s); ++k) total += rows.probs[k] * h[rows.targets[k]];
    return total;
}

struct Backup {
    double value;
    Action action;
};

Backup backup(const Kernel& kernel, std::span<const double> costs, std::size_t s, const std::vector<double>& h) {
    const double idle = costs[s] + expected_value(kernel.rows[0], s, h);
    if (!kernel.feasible(s, kTransmit)) return {idle, kIdle};
    const double send = costs[s] + expected_value(kernel.rows[1], s, h);
    if (send < idle - kTieTolerance * std::max(1.0, std::abs(idle))) return {send, kTransmit};
    return {std::min(idle, send), kIdle};
}

}  // namespace

ConvergenceError::ConvergenceError(std::size_t iterations, double residual)
    : std::runtime_error("RVIA did not converge after " + std::to_string(iterations) +
                         " iterations (residual " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

RviaSolution solve_rvia(const Kernel& kernel, std::span<const double> costs, const RviaOptions& options) {
    const std::size_t n = kernel.num_states;
    if (costs.size() != n) throw std::invalid_argument("cost vector does not match the kernel");
    if (!(options.epsilon > 0.0)) throw std::invalid_argument("RVIA epsilon must be positive");
    if (options.reference_state >= n) throw std::invalid_argument("reference state out of range");
    for (std::size_t s = 0; s < n; ++s) {
        if (!kernel.feasible(s, kIdle)) throw std::invalid_argument("idling must be feasible in every state");
    }

    const std::size_t ref = options.reference_state;
    std::vector<double> h(n, 0.0);
    std::vector<double> v(n, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iteration = 0;
    while (iteration < options.max_iterations) {
        ++iteration;
        for (std::size_t s = 0; s < n; ++s) v[s] = backup(kernel, costs, s, h).value;
        const double offset = v[ref];
        residual = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double next = v[s] - offset;
            residual = std::max(residual, std::abs(next - h[s]));
            h[s] = next;
        }
        if (residual <= options.epsilon) {
            RviaSolution solution;
            solution.gain = offset;
            solution.iterations = iteration;
            solution.residual = residual;
            solution.reference_state = ref;
            solution.policy.resize(n);
            for (std::size_t s = 0; s < n; ++s) {
                solution.policy[s] = static_cast<std::uint8_t>(backup(kernel, costs, s, h).action);
            }
            solution.h = std::move(h);
            return solution;
        }
    }
    throw ConvergenceError(iteration, residual);
}

double bellman_residual(const RviaSolution& solution, const Kernel& kernel, std::span<const double> costs) {
    double worst = 0.0;
    for (std::size_t s = 0; s < kernel.num_states; ++s) {
        const double rhs = backup(kernel, costs, s, solution.h).value;
        worst = std::max(worst, std::abs(solution.gain + solution.h[s] - rhs));
    }
    return worst;
}

}  // namespace ehtrack

// Relative value iteration for the average-cost belief-MDP.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ehtrack/belief_mdp.hpp"

namespace ehtrack {

struct RviaOptions {
    double epsilon = 1e-4;
    std::size_t reference_state = 0;
    std::size_t max_iterations = 100000;
};

struct RviaSolution {
    std::vector<std::uint8_t> policy;  // state id -> action
    double gain = 0.0;
    std::vector<double> h;             // h[reference_state] == 0
    std::size_t iterations = 0;
    double residual = 0.0;             // last sup-norm change of h
    std::size_t reference_state = 0;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::size_t iterations, double residual);
    std::size_t iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    std::size_t iterations_;
    double residual_;
};

/// Synchronous RVIA: from h = 0, V(l) = min_a [C(l) + sum P(l'|l,a) h(l')],
/// h = V - V(ref), until max |h_new - h_old| <= epsilon. The gain is V(ref)
/// at the last sweep; the policy takes the argmin against the final h with
/// ties resolved to idling. Throws ConvergenceError after max_iterations.
RviaSolution solve_rvia(const Kernel& kernel, std::span<const double> costs, const RviaOptions& options = {});

/// max_l |gain + h(l) - min_a [C(l) + sum P h]|.
double bellman_residual(const RviaSolution& solution, const Kernel& kernel, std::span<const double> costs);

}  // namespace ehtrack

#include <stdexcept>

#include "ehtrack/policies.hpp"
#include "ehtrack/sim.hpp"

namespace ehtrack {

GammaTuningResult tune_gamma(const ModelParams& params, const GammaTuning& tuning) {
    GammaTuningResult result;
    result.grid = tuning.grid.empty() ? default_gamma_grid(params) : tuning.grid;
    EpisodeConfig cfg;
    cfg.horizon = tuning.horizon;
    cfg.warmup = tuning.warmup;
    cfg.belief_mode = BeliefMode::exact;
    double best = 0.0;
    for (std::size_t k = 0; k < result.grid.size(); ++k) {
        const LowComplexityPolicy policy(params, result.grid[k]);
        const double cost = evaluate_policy(policy, params, cfg, tuning.reps, tuning.seed, tuning.jobs).mean;
        result.mean_costs.push_back(cost);
        if (k == 0 || cost < best || (cost == best && result.grid[k] < result.best_gamma)) {
            best = cost;
            result.best_gamma = result.grid[k];
        }
    }
    return result;
}

}  // namespace ehtrack

#include "ehtrack/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ehtrack {

std::string_view to_string(DistortionKind kind) {
    switch (kind) {
    case DistortionKind::absolute:
        return "absolute";
    case DistortionKind::indicator:
        return "indicator";
    case DistortionKind::squared:
        return "squared";
    case DistortionKind::table:
        return "table";
    }
    return "unknown";
}

DistortionKind distortion_kind_from_string(std::string_view name) {
    if (name == "absolute") return DistortionKind::absolute;
    if (name == "indicator") return DistortionKind::indicator;
    if (name == "squared") return DistortionKind::squared;
    if (name == "table") return DistortionKind::table;
    throw std::invalid_argument("unknown distortion '" + std::string(name) +
                                "' (expected absolute, indicator, squared or table)");
}

Distortion::Distortion(DistortionKind kind) : kind_(kind) {
    if (kind == DistortionKind::table) {
        throw std::invalid_argument("table distortion must be built with Distortion::from_table");
    }
}

Distortion Distortion::from_table(int num_states, std::vector<double> table) {
    if (num_states < 2 || table.size() != static_cast<std::size_t>(num_states * num_states)) {
        throw std::invalid_argument("distortion table must be N x N with N >= 2");
    }
    for (int i = 0; i < num_states; ++i) {
        for (int j = 0; j < num_states; ++j) {
            const double v = table[static_cast<std::size_t>(i * num_states + j)];
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("distortion table entries must be finite and nonnegative");
            }
            if (i == j && v != 0.0) {
                throw std::invalid_argument("distortion table must vanish on the diagonal");
            }
        }
    }
    Distortion d;
    d.kind_ = DistortionKind::table;
    d.table_states_ = num_states;
    d.table_ = std::move(table);
    return d;
}

double Distortion::evaluate(SourceState x, SourceState x_hat, int num_states) const {
    if (x < 0 || x >= num_states || x_hat < 0 || x_hat >= num_states) {
        throw std::out_of_range("distortion arguments (" + std::to_string(x) + ", " +
                                std::to_string(x_hat) + ") outside [0, " +
                                std::to_string(num_states) + ")");
    }
    if (kind_ == DistortionKind::table && num_states != table_states_) {
        throw std::invalid_argument("distortion table size does not match the number of states");
    }
    return (*this)(x, x_hat);
}

double Distortion::max_value(int num_states) const {
    double best = 0.0;
    for (int i = 0; i < num_states; ++i) {
        for (int j = 0; j < num_states; ++j) best = std::max(best, (*this)(i, j));
    }
    return best;
}

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace

ModelParams::ModelParams(const ModelConfig& config)
    : ModelParams(config, Distortion(config.distortion)) {}

ModelParams::ModelParams(const ModelConfig& config, Distortion distortion)
    : config_(config), distortion_(std::move(distortion)), q_(0.0) {
    config_.distortion = distortion_.kind();
    const int n = config.num_states;
    require(n >= 2, "N must be at least 2");
    require(config.p > 0.0 && config.p < 1.0, "p must lie in (0, 1)");
    // p > q  <=>  p > 1/N.
    require(config.p * n > 1.0, "p must exceed q, i.e. p > 1/N");
    require(config.p_s > 0.0 && config.p_s <= 1.0, "p_s must lie in (0, 1]");
    require(config.p_f >= 0.0 && config.p_f <= 1.0, "p_f must lie in [0, 1]");
    require(config.mu >= 0.0 && config.mu <= 1.0, "mu must lie in [0, 1]");
    require(config.capacity >= 1, "battery capacity B must be at least 1");
    require(config.depth >= 1, "truncation depth m must be at least 1");
    if (distortion_.kind() == DistortionKind::table) {
        distortion_.evaluate(n - 1, n - 1, n);  // size check
    }
    q_ = (1.0 - config.p) / static_cast<double>(n - 1);
}

EnergyLevel battery_step(EnergyLevel b, int energy_arrival, Action a, EnergyLevel capacity) {
    if (capacity < 1) throw std::invalid_argument("battery capacity must be at least 1");
    if (b < 0 || b > capacity) throw std::invalid_argument("battery level outside [0, B]");
    if (energy_arrival != 0 && energy_arrival != 1) throw std::invalid_argument("energy arrival must be 0 or 1");
    if (a != kIdle && a != kTransmit) throw std::invalid_argument("action must be 0 or 1");
    if (a > b) throw std::invalid_argument("cannot transmit with an empty battery");
    return std::min(b + energy_arrival - a, capacity);
}

}  // namespace ehtrack

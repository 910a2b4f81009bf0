#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ehtrack/model.hpp"

using namespace ehtrack;

TEST_CASE("parameters derive q once and satisfy p + (N-1)q = 1") {
    for (int n = 2; n <= 6; ++n) {
        for (double p : {0.51, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99}) {
            if (p * n <= 1.0) continue;
            ModelConfig c;
            c.num_states = n;
            c.p = p;
            const ModelParams params(c);
            CHECK(std::abs(params.p() + (n - 1) * params.q() - 1.0) < 1e-15);
            CHECK(params.p() > params.q());
        }
    }
}

TEST_CASE("parameter validation rejects out-of-range values") {
    auto make = [](auto edit) {
        ModelConfig c;
        edit(c);
        return ModelParams(c);
    };
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.num_states = 1; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.p = 1.0 / 3.0; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.p = 0.2; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.p = 1.0; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.p_s = 0.0; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.p_s = 1.1; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.p_f = -0.1; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.mu = 1.5; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.capacity = 0; }), std::invalid_argument);
    CHECK_THROWS_AS(make([](ModelConfig& c) { c.depth = 0; }), std::invalid_argument);
    CHECK_NOTHROW(make([](ModelConfig& c) { c.p_f = 0.0; }));
    CHECK_NOTHROW(make([](ModelConfig& c) { c.mu = 0.0; }));
}

TEST_CASE("perfect feedback collapses the truncation depth") {
    ModelConfig c;
    c.p_s = 1.0;
    c.p_f = 1.0;
    const ModelParams params(c);
    CHECK(params.perfect_ack());
    CHECK(params.effective_depth() == 0);
    c.p_f = 0.99;
    CHECK_FALSE(ModelParams(c).perfect_ack());
    CHECK(ModelParams(c).effective_depth() == c.depth);
}

TEST_CASE("battery examples") {
    CHECK(battery_step(3, 1, 0, 3) == 3);
    CHECK(battery_step(0, 1, 0, 3) == 1);
    CHECK(battery_step(2, 0, 1, 3) == 1);
    CHECK(battery_step(3, 1, 1, 3) == 3);
    CHECK_THROWS_AS(battery_step(0, 0, 1, 3), std::invalid_argument);
    CHECK_THROWS_AS(battery_step(4, 0, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(battery_step(1, 2, 0, 3), std::invalid_argument);
}

TEST_CASE("battery stays in [0, B] for every input up to B = 9") {
    for (int cap = 1; cap <= 9; ++cap) {
        for (int b = 0; b <= cap; ++b) {
            for (int e = 0; e <= 1; ++e) {
                for (int a = 0; a <= std::min(b, 1); ++a) {
                    const int next = battery_step(b, e, a, cap);
                    CHECK(next >= 0);
                    CHECK(next <= cap);
                    CHECK(next == std::min(b + e - a, cap));
                }
            }
        }
    }
}

TEST_CASE("distortion examples use 1-based labels shifted to 0-based") {
    const Distortion abs(DistortionKind::absolute);
    const Distortion ind(DistortionKind::indicator);
    const Distortion sq(DistortionKind::squared);
    CHECK(abs.evaluate(0, 0, 3) == 0.0);
    CHECK(abs.evaluate(0, 2, 3) == 2.0);
    CHECK(ind.evaluate(1, 2, 3) == 1.0);
    CHECK(sq.evaluate(0, 2, 3) == 4.0);
    CHECK_THROWS_AS(abs.evaluate(0, 3, 3), std::out_of_range);
    CHECK_THROWS_AS(abs.evaluate(-1, 0, 3), std::out_of_range);
}

TEST_CASE("built-in distortions are symmetric, zero on the diagonal and bounded") {
    for (int n = 2; n <= 6; ++n) {
        for (auto kind : {DistortionKind::absolute, DistortionKind::indicator, DistortionKind::squared}) {
            const Distortion d(kind);
            for (int x = 0; x < n; ++x) {
                CHECK(d(x, x) == 0.0);
                for (int y = 0; y < n; ++y) CHECK(d(x, y) == d(y, x));
            }
        }
        CHECK(Distortion(DistortionKind::absolute).max_value(n) == n - 1);
        CHECK(Distortion(DistortionKind::indicator).max_value(n) == 1);
        CHECK(Distortion(DistortionKind::squared).max_value(n) == (n - 1) * (n - 1));
    }
}

TEST_CASE("table distortions are validated") {
    CHECK_NOTHROW(Distortion::from_table(2, {0, 1, 3, 0}));
    CHECK(Distortion::from_table(2, {0, 1, 3, 0})(1, 0) == 3.0);
    CHECK_THROWS_AS(Distortion::from_table(2, {1, 1, 1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Distortion::from_table(2, {0, -1, 1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Distortion::from_table(2, {0, 1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Distortion(DistortionKind::table), std::invalid_argument);
    ModelConfig c;
    CHECK_THROWS_AS(ModelParams(c, Distortion::from_table(2, {0, 1, 1, 0})), std::invalid_argument);
}

TEST_CASE("distortion names round-trip") {
    for (auto kind : {DistortionKind::absolute, DistortionKind::indicator, DistortionKind::squared,
                      DistortionKind::table}) {
        CHECK(distortion_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(distortion_kind_from_string("cubic"), std::invalid_argument);
}

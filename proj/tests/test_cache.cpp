#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ehtrack/cache.hpp"
#include "ehtrack/solver.hpp"

using namespace ehtrack;
namespace fs = std::filesystem;

namespace {

ModelParams cache_params(double ps = 0.6, double pf = 0.6, int m = 3, double mu = 0.5) {
    ModelConfig c;
    c.p_s = ps;
    c.p_f = pf;
    c.depth = m;
    c.mu = mu;
    return ModelParams(c);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ehtrack_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cache keys separate every parameter") {
    const auto base = cache_params();
    CHECK(belief_set_key(base) == belief_set_key(cache_params(0.6, 0.6, 3, 0.7)));
    CHECK(model_key(base) != model_key(cache_params(0.6, 0.6, 3, 0.7)));
    CHECK(belief_set_key(base) != belief_set_key(cache_params(0.6, 0.6000000000000001, 3)));
    CHECK(belief_set_key(cache_params(1.0, 1.0, 3)) == belief_set_key(cache_params(1.0, 1.0, 5)));
    ModelConfig c;
    const ModelParams table(c, Distortion::from_table(3, {0, 1, 2, 1, 0, 1, 2, 1, 0}));
    CHECK(model_key(table) != model_key(ModelParams(c)));
}

TEST_CASE("belief sets round-trip through JSON") {
    TempDir dir("beliefs");
    const auto params = cache_params();
    const BeliefSet set = make_belief_set(params);
    const fs::path file = dir.path / "set.json";
    save_belief_set(file, set, belief_set_key(params));
    const BeliefSet loaded = load_belief_set(file, belief_set_key(params));
    REQUIRE(loaded.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) CHECK(loaded.member(i) == set.member(i));
    CHECK(loaded.nack_successors() == set.nack_successors());
    CHECK(loaded.overflow().size() == set.overflow().size());
    CHECK_THROWS_AS(load_belief_set(file, "other"), std::runtime_error);
    std::ofstream(dir.path / "bad.json") << "{\"version\": 1";
    CHECK_THROWS_AS(load_belief_set(dir.path / "bad.json", belief_set_key(params)), std::runtime_error);
}

TEST_CASE("cached belief-MDPs solve to the same gain as fresh builds") {
    TempDir dir("mdp");
    for (double ch : {0.4, 0.6}) {
        const auto params = cache_params(ch, ch, 4);
        const BeliefMdp fresh = build_belief_mdp(params);
        const double fresh_gain = solve_rvia(fresh.kernel, fresh.costs).gain;

        ArtifactCache cache(dir.path);
        const auto first = cache.belief_mdp(params);
        CHECK(cache.misses() == 2);
        ArtifactCache again(dir.path);
        const auto cached = again.belief_mdp(params);
        CHECK(again.hits() == 2);
        CHECK(again.misses() == 0);
        CHECK(cached->space.states() == fresh.space.states());
        CHECK(cached->kernel.rows[1].probs == fresh.kernel.rows[1].probs);
        const double cached_gain = solve_rvia(cached->kernel, cached->costs).gain;
        CHECK(std::abs(cached_gain - fresh_gain) <= 1e-12);
    }
}

TEST_CASE("damaged cache entries are rebuilt") {
    TempDir dir("damaged");
    const auto params = cache_params();
    {
        ArtifactCache cache(dir.path);
        (void)cache.belief_mdp(params);
    }
    for (const auto& entry : fs::directory_iterator(dir.path)) {
        if (entry.path().extension() == ".bin") fs::resize_file(entry.path(), 100);
    }
    ArtifactCache cache(dir.path);
    const auto mdp = cache.belief_mdp(params);
    CHECK(cache.misses() == 1);
    CHECK(mdp->space.size() == build_belief_mdp(params).space.size());
}

TEST_CASE("policy export") {
    TempDir dir("policy");
    const auto params = cache_params(0.6, 0.6, 1);
    const BeliefMdp mdp = build_belief_mdp(params);
    const RviaSolution sol = solve_rvia(mdp.kernel, mdp.costs);
    const fs::path file = dir.path / "policy.bin";
    save_policy(file, sol.policy, model_key(params));
    CHECK(load_policy(file, model_key(params)) == sol.policy);
    CHECK_THROWS_AS(load_policy(file, "other"), std::runtime_error);

    std::ostringstream csv;
    write_policy_csv(csv, mdp, sol.policy);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "id,x,b,belief_id,ack_prev,x_prev,belief,action");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == mdp.space.size());
}

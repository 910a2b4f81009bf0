// On-disk caches for belief sets, belief-MDPs and solved policies.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ehtrack/belief.hpp"
#include "ehtrack/belief_mdp.hpp"
#include "ehtrack/model.hpp"

namespace ehtrack {

inline constexpr std::uint32_t kCacheVersion = 1;

/// Stable key over (N, p_s, p_f, m); doubles are written exactly.
std::string belief_set_key(const ModelParams& params);
/// Stable key over every model parameter, distortion included.
std::string model_key(const ModelParams& params);

/// JSON document with the key, the version and the full belief set.
void save_belief_set(const std::filesystem::path& path, const BeliefSet& set, const std::string& key);
/// Throws std::runtime_error on a version or key mismatch or a malformed file.
BeliefSet load_belief_set(const std::filesystem::path& path, const std::string& key);

/// Binary state space, kernel and stage costs. The belief set is stored
/// separately and passed back in on load.
void save_belief_mdp(const std::filesystem::path& path, const BeliefMdp& mdp, const std::string& key);
BeliefMdp load_belief_mdp(const std::filesystem::path& path, BeliefSet beliefs, const std::string& key);

/// One row per state: id, x, b, belief_id, ack_prev, x_prev, belief, action.
/// States are written 1-based to match the usual 1..N labelling.
void write_policy_csv(std::ostream& out, const BeliefMdp& mdp, const std::vector<std::uint8_t>& policy);

void save_policy(const std::filesystem::path& path, const std::vector<std::uint8_t>& policy, const std::string& key);
std::vector<std::uint8_t> load_policy(const std::filesystem::path& path, const std::string& key);

/// Directory-backed cache; a missing or stale entry is rebuilt and
/// rewritten. Not safe for concurrent writers to the same directory.
class ArtifactCache {
public:
    explicit ArtifactCache(std::filesystem::path dir);

    BeliefSet belief_set(const ModelParams& params);
    std::shared_ptr<const BeliefMdp> belief_mdp(const ModelParams& params);

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace ehtrack

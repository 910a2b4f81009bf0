#include "ehtrack/cache.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "json.hpp"

namespace ehtrack {

namespace {

using nlohmann::json;

constexpr char kMdpMagic[8] = {'E', 'H', 'T', 'K', 'M', 'D', 'P', '\0'};
constexpr char kPolicyMagic[8] = {'E', 'H', 'T', 'K', 'P', 'O', 'L', '\0'};

std::string hex(double v) {
    std::ostringstream out;
    out << std::hexfloat << v;
    return out.str();
}

std::uint64_t fnv1a(const std::vector<double>& values) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double v : values) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

// Writes to a sibling temporary file and renames, so readers never see a
// half-written entry.
template <typename Fn>
void write_atomically(const std::filesystem::path& path, std::ios::openmode mode, Fn&& fill) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, mode | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        fill(out);
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    template <typename T>
    void put(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    template <typename T>
    void put_vector(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        if (!v.empty()) out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    }
    void put_string(const std::string& s) {
        put<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    template <typename T>
    T get() {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        check();
        return v;
    }
    template <typename T>
    std::vector<T> get_vector() {
        const auto size = get<std::uint64_t>();
        if (size > (std::uint64_t{1} << 36) / sizeof(T)) fail("implausible vector length");
        std::vector<T> v(size);
        if (size) in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * sizeof(T)));
        check();
        return v;
    }
    std::string get_string() {
        const auto size = get<std::uint64_t>();
        if (size > 4096) fail("implausible key length");
        std::string s(size, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(size));
        check();
        return s;
    }
    void expect_header(const char (&magic)[8], const std::string& key) {
        char buf[8];
        in_.read(buf, 8);
        check();
        if (std::memcmp(buf, magic, 8) != 0) fail("bad magic");
        if (get<std::uint32_t>() != kCacheVersion) fail("unsupported cache version");
        if (get_string() != key) fail("key mismatch");
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error(source_ + ": " + what);
    }

private:
    void check() const {
        if (!in_) fail("truncated file");
    }
    std::istream& in_;
    std::string source_;
};

#pragma pack(push, 1)
struct PackedState {
    std::int32_t x;
    std::int32_t battery;
    std::uint64_t belief;
    std::uint8_t ack_prev;
    std::int32_t x_prev;
};
#pragma pack(pop)

}  // namespace

std::string belief_set_key(const ModelParams& params) {
    std::ostringstream key;
    key << "N" << params.num_states() << "_ps" << hex(params.p_s()) << "_pf" << hex(params.p_f()) << "_m"
        << params.effective_depth();
    return key.str();
}

std::string model_key(const ModelParams& params) {
    std::ostringstream key;
    key << belief_set_key(params) << "_p" << hex(params.p()) << "_mu" << hex(params.mu()) << "_B"
        << params.capacity() << "_d" << to_string(params.distortion().kind());
    if (params.distortion().kind() == DistortionKind::table) {
        key << std::hex << std::setw(16) << std::setfill('0') << fnv1a(params.distortion().table());
    }
    return key.str();
}

void save_belief_set(const std::filesystem::path& path, const BeliefSet& set, const std::string& key) {
    json doc;
    doc["version"] = kCacheVersion;
    doc["key"] = key;
    doc["num_states"] = set.num_states();
    doc["depth"] = set.depth();
    doc["u1"] = set.constants().u1;
    doc["u2"] = set.constants().u2;
    json members = json::array();
    for (const Belief& b : set.members()) members.push_back(std::vector<double>(b.probs().begin(), b.probs().end()));
    doc["members"] = std::move(members);
    std::vector<int> depths;
    for (std::size_t id = 0; id < set.size(); ++id) depths.push_back(set.member_depth(id));
    doc["member_depths"] = depths;
    doc["nack_successors"] = set.nack_successors();
    json overflow = json::array();
    for (const OverflowEntry& e : set.overflow()) {
        overflow.push_back({{"belief", std::vector<double>(e.belief.probs().begin(), e.belief.probs().end())},
                            {"projected", e.projected}});
    }
    doc["overflow"] = std::move(overflow);
    write_atomically(path, std::ios::out, [&](std::ofstream& out) { out << doc.dump(); });
}

BeliefSet load_belief_set(const std::filesystem::path& path, const std::string& key) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        const json doc = json::parse(in);
        if (doc.at("version").get<std::uint32_t>() != kCacheVersion) {
            throw std::runtime_error("unsupported cache version");
        }
        if (doc.at("key").get<std::string>() != key) throw std::runtime_error("key mismatch");
        NackConstants c;
        c.u1 = doc.at("u1").get<double>();
        c.u2 = doc.at("u2").get<double>();
        std::vector<Belief> members;
        for (const auto& m : doc.at("members")) members.emplace_back(m.get<std::vector<double>>());
        std::vector<OverflowEntry> overflow;
        for (const auto& e : doc.at("overflow")) {
            overflow.push_back({Belief(e.at("belief").get<std::vector<double>>()), e.at("projected").get<std::size_t>()});
        }
        return BeliefSet(doc.at("num_states").get<int>(), c, doc.at("depth").get<int>(), std::move(members),
                         doc.at("member_depths").get<std::vector<int>>(),
                         doc.at("nack_successors").get<std::vector<std::size_t>>(), std::move(overflow));
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void save_belief_mdp(const std::filesystem::path& path, const BeliefMdp& mdp, const std::string& key) {
    write_atomically(path, std::ios::out | std::ios::binary, [&](std::ofstream& out) {
        BinaryWriter w(out);
        out.write(kMdpMagic, 8);
        w.put(kCacheVersion);
        w.put_string(key);
        w.put<std::int32_t>(mdp.space.num_states());
        w.put<std::int32_t>(mdp.space.capacity());
        w.put<std::uint64_t>(mdp.space.belief_count());
        std::vector<PackedState> packed;
        packed.reserve(mdp.space.size());
        for (const BeliefState& s : mdp.space.states()) {
            packed.push_back({s.x, s.battery, s.belief, static_cast<std::uint8_t>(s.ack_prev), s.x_prev});
        }
        w.put_vector(packed);
        for (const SparseRows& rows : mdp.kernel.rows) {
            std::vector<std::uint64_t> offsets(rows.offsets.begin(), rows.offsets.end());
            w.put_vector(offsets);
            w.put_vector(rows.targets);
            w.put_vector(rows.probs);
        }
        w.put_vector(mdp.costs);
    });
}

BeliefMdp load_belief_mdp(const std::filesystem::path& path, BeliefSet beliefs, const std::string& key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    BinaryReader r(in, path.string());
    r.expect_header(kMdpMagic, key);
    const auto n = r.get<std::int32_t>();
    const auto cap = r.get<std::int32_t>();
    const auto belief_count = r.get<std::uint64_t>();
    if (n != beliefs.num_states() || belief_count != beliefs.size()) r.fail("belief set does not match");
    std::vector<BeliefState> states;
    for (const PackedState& p : r.get_vector<PackedState>()) {
        states.push_back({p.x, p.battery, static_cast<std::size_t>(p.belief), p.ack_prev != 0, p.x_prev});
    }
    StateSpace space(n, cap, static_cast<std::size_t>(belief_count), std::move(states));
    Kernel kernel;
    kernel.num_states = space.size();
    for (SparseRows& rows : kernel.rows) {
        const auto offsets = r.get_vector<std::uint64_t>();
        rows.offsets.assign(offsets.begin(), offsets.end());
        rows.targets = r.get_vector<std::uint32_t>();
        rows.probs = r.get_vector<double>();
        if (rows.offsets.size() != space.size() + 1 || rows.targets.size() != rows.probs.size() ||
            rows.offsets.back() != rows.targets.size()) {
            r.fail("inconsistent kernel");
        }
        for (std::uint32_t t : rows.targets) {
            if (t >= space.size()) r.fail("kernel target out of range");
        }
    }
    auto costs = r.get_vector<double>();
    if (costs.size() != space.size()) r.fail("cost vector does not match");
    return BeliefMdp{std::move(beliefs), std::move(space), std::move(kernel), std::move(costs)};
}

void write_policy_csv(std::ostream& out, const BeliefMdp& mdp, const std::vector<std::uint8_t>& policy) {
    if (policy.size() != mdp.space.size()) throw std::invalid_argument("policy does not match the state space");
    out << "id,x,b,belief_id,ack_prev,x_prev,belief,action\n";
    const auto precision = out.precision(10);
    for (std::size_t id = 0; id < mdp.space.size(); ++id) {
        const BeliefState& s = mdp.space[id];
        out << id << ',' << s.x + 1 << ',' << s.battery << ',' << s.belief << ',' << s.ack_prev << ','
            << s.x_prev + 1 << ',';
        const Belief& b = mdp.beliefs.member(s.belief);
        for (int i = 0; i < b.size(); ++i) out << (i ? ";" : "") << b[i];
        out << ',' << static_cast<int>(policy[id]) << '\n';
    }
    out.precision(precision);
}

void save_policy(const std::filesystem::path& path, const std::vector<std::uint8_t>& policy, const std::string& key) {
    write_atomically(path, std::ios::out | std::ios::binary, [&](std::ofstream& out) {
        BinaryWriter w(out);
        out.write(kPolicyMagic, 8);
        w.put(kCacheVersion);
        w.put_string(key);
        w.put_vector(policy);
    });
}

std::vector<std::uint8_t> load_policy(const std::filesystem::path& path, const std::string& key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    BinaryReader r(in, path.string());
    r.expect_header(kPolicyMagic, key);
    return r.get_vector<std::uint8_t>();
}

ArtifactCache::ArtifactCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

BeliefSet ArtifactCache::belief_set(const ModelParams& params) {
    const std::string key = belief_set_key(params);
    const auto path = dir_ / ("beliefs_" + key + ".json");
    if (std::filesystem::exists(path)) {
        try {
            BeliefSet set = load_belief_set(path, key);
            ++hits_;
            return set;
        } catch (const std::runtime_error&) {
            // Stale or damaged entry: rebuild below.
        }
    }
    ++misses_;
    BeliefSet set = make_belief_set(params);
    save_belief_set(path, set, key);
    return set;
}

std::shared_ptr<const BeliefMdp> ArtifactCache::belief_mdp(const ModelParams& params) {
    BeliefSet beliefs = belief_set(params);
    const std::string key = model_key(params);
    const auto path = dir_ / ("mdp_" + key + ".bin");
    if (std::filesystem::exists(path)) {
        try {
            auto mdp = std::make_shared<const BeliefMdp>(load_belief_mdp(path, beliefs, key));
            ++hits_;
            return mdp;
        } catch (const std::runtime_error&) {
        } catch (const std::invalid_argument&) {
        }
    }
    ++misses_;
    auto mdp = std::make_shared<const BeliefMdp>(build_belief_mdp(params, std::move(beliefs)));
    save_belief_mdp(path, *mdp, key);
    return mdp;
}

}  // namespace ehtrack

#include "ehtrack/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace ehtrack {

namespace {

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(source_ + ": " + key + ": " + what);
    }

    void expect_map(const YAML::Node& node, const std::string& key, const std::set<std::string>& allowed) const {
        if (!node.IsMap()) fail(key, "expected a mapping");
        for (const auto& kv : node) {
            const auto name = kv.first.as<std::string>();
            if (!allowed.count(name)) {
                std::string list;
                for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
                fail(key.empty() ? name : key + "." + name, "unknown key (expected one of " + list + ")");
            }
        }
    }

    template <typename T>
    T scalar(const YAML::Node& node, const std::string& key, const char* type) const {
        if (!node.IsScalar()) fail(key, std::string("expected ") + type);
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(key, std::string("expected ") + type + ", got '" + node.Scalar() + "'");
        }
    }

    double number(const YAML::Node& n, const std::string& key) const { return scalar<double>(n, key, "a number"); }
    std::string text(const YAML::Node& n, const std::string& key) const { return scalar<std::string>(n, key, "a string"); }
    bool boolean(const YAML::Node& n, const std::string& key) const { return scalar<bool>(n, key, "true or false"); }

    long long integer(const YAML::Node& n, const std::string& key) const {
        const double v = number(n, key);
        if (v != static_cast<double>(static_cast<long long>(v))) fail(key, "expected an integer");
        return static_cast<long long>(v);
    }
    std::uint64_t count(const YAML::Node& n, const std::string& key) const {
        const long long v = integer(n, key);
        if (v < 0) fail(key, "expected a nonnegative integer");
        return static_cast<std::uint64_t>(v);
    }

    std::vector<double> numbers(const YAML::Node& n, const std::string& key) const {
        if (!n.IsSequence()) fail(key, "expected a list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(number(n[i], key + "[" + std::to_string(i) + "]"));
        return out;
    }

private:
    std::string source_;
};

void apply_model(const Reader& r, const YAML::Node& node, ExperimentSpec& spec) {
    r.expect_map(node, "model", {"N", "p", "p_s", "p_f", "mu", "B", "m", "distortion"});
    ModelConfig& c = spec.base;
    if (node["N"]) c.num_states = static_cast<int>(r.integer(node["N"], "model.N"));
    if (node["p"]) c.p = r.number(node["p"], "model.p");
    if (node["p_s"]) c.p_s = r.number(node["p_s"], "model.p_s");
    if (node["p_f"]) c.p_f = r.number(node["p_f"], "model.p_f");
    if (node["mu"]) c.mu = r.number(node["mu"], "model.mu");
    if (node["B"]) c.capacity = static_cast<int>(r.integer(node["B"], "model.B"));
    if (node["m"]) c.depth = static_cast<int>(r.integer(node["m"], "model.m"));
    if (const auto d = node["distortion"]) {
        if (d.IsScalar()) {
            const auto name = r.text(d, "model.distortion");
            if (name == "table") r.fail("model.distortion", "a table distortion is given as {table: [[...]]}");
            try {
                c.distortion = distortion_kind_from_string(name);
            } catch (const std::exception& e) {
                r.fail("model.distortion", e.what());
            }
            spec.distortion_table.clear();
        } else {
            r.expect_map(d, "model.distortion", {"table"});
            const auto rows = d["table"];
            if (!rows || !rows.IsSequence()) r.fail("model.distortion.table", "expected a list of rows");
            std::vector<double> table;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto row = r.numbers(rows[i], "model.distortion.table[" + std::to_string(i) + "]");
                if (row.size() != rows.size()) r.fail("model.distortion.table", "expected a square matrix");
                table.insert(table.end(), row.begin(), row.end());
            }
            c.distortion = DistortionKind::table;
            spec.distortion_table = std::move(table);
        }
    }
}

PolicySpec parse_policy(const Reader& r, const YAML::Node& node, const std::string& key) {
    PolicySpec p;
    try {
        if (node.IsScalar()) {
            p.kind = policy_kind_from_string(r.text(node, key));
            return p;
        }
        r.expect_map(node, key, {"kind", "gamma"});
        if (!node["kind"]) r.fail(key, "missing 'kind'");
        p.kind = policy_kind_from_string(r.text(node["kind"], key + ".kind"));
    } catch (const std::invalid_argument& e) {
        r.fail(key, e.what());
    }
    if (node["gamma"]) {
        if (p.kind != PolicyKind::lc_aware) r.fail(key + ".gamma", "only lc_aware takes a gamma");
        p.gamma = r.number(node["gamma"], key + ".gamma");
    }
    return p;
}

void apply_keys(const Reader& r, const YAML::Node& root, ExperimentSpec& spec) {
    if (root["name"]) spec.name = r.text(root["name"], "name");
    if (root["kind"]) {
        try {
            spec.kind = experiment_kind_from_string(r.text(root["kind"], "kind"));
        } catch (const ConfigError& e) {
            r.fail("kind", e.what());
        }
    }
    if (root["model"]) apply_model(r, root["model"], spec);
    if (const auto s = root["sweep"]) {
        r.expect_map(s, "sweep", {"axis", "values"});
        if (!s["axis"] || !s["values"]) r.fail("sweep", "needs both 'axis' and 'values'");
        try {
            spec.axis = sweep_axis_from_string(r.text(s["axis"], "sweep.axis"));
        } catch (const ConfigError& e) {
            r.fail("sweep.axis", e.what());
        }
        spec.values = r.numbers(s["values"], "sweep.values");
    }
    if (const auto p = root["policies"]) {
        if (!p.IsSequence()) r.fail("policies", "expected a list");
        spec.policies.clear();
        for (std::size_t i = 0; i < p.size(); ++i) {
            spec.policies.push_back(parse_policy(r, p[i], "policies[" + std::to_string(i) + "]"));
        }
    }
    if (const auto s = root["simulation"]) {
        r.expect_map(s, "simulation", {"enabled", "horizon", "warmup", "reps", "seed"});
        if (s["enabled"]) spec.simulation.enabled = r.boolean(s["enabled"], "simulation.enabled");
        if (s["horizon"]) spec.simulation.horizon = r.count(s["horizon"], "simulation.horizon");
        if (s["warmup"]) spec.simulation.warmup = r.count(s["warmup"], "simulation.warmup");
        if (s["reps"]) spec.simulation.reps = static_cast<int>(r.count(s["reps"], "simulation.reps"));
        if (s["seed"]) spec.simulation.seed = r.count(s["seed"], "simulation.seed");
    }
    if (const auto s = root["solver"]) {
        r.expect_map(s, "solver", {"epsilon", "reference_state", "max_iterations"});
        if (s["epsilon"]) spec.solver.epsilon = r.number(s["epsilon"], "solver.epsilon");
        if (s["reference_state"]) spec.solver.reference_state = r.count(s["reference_state"], "solver.reference_state");
        if (s["max_iterations"]) spec.solver.max_iterations = r.count(s["max_iterations"], "solver.max_iterations");
    }
    if (const auto t = root["tuning"]) {
        r.expect_map(t, "tuning", {"grid", "horizon", "warmup", "reps", "seed"});
        if (t["grid"]) {
            spec.tuning.grid = r.numbers(t["grid"], "tuning.grid");
            if (spec.tuning.grid.empty()) r.fail("tuning.grid", "must not be empty");
        }
        if (t["horizon"]) spec.tuning.horizon = r.count(t["horizon"], "tuning.horizon");
        if (t["warmup"]) spec.tuning.warmup = r.count(t["warmup"], "tuning.warmup");
        if (t["reps"]) spec.tuning.reps = static_cast<int>(r.count(t["reps"], "tuning.reps"));
        if (t["seed"]) spec.tuning.seed = r.count(t["seed"], "tuning.seed");
    }
    if (const auto c = root["checkpoints"]) {
        if (!c.IsSequence()) r.fail("checkpoints", "expected a list of slot counts");
        spec.checkpoints.clear();
        for (std::size_t i = 0; i < c.size(); ++i) {
            spec.checkpoints.push_back(r.count(c[i], "checkpoints[" + std::to_string(i) + "]"));
        }
    }
}

const std::set<std::string> kTopLevel = {"preset", "name",   "kind",   "model",  "sweep",
                                         "policies", "simulation", "solver", "tuning", "checkpoints"};

YAML::Node parse_yaml(const std::string& text, const std::string& source) {
    try {
        YAML::Node root = YAML::Load(text);
        if (root.IsNull()) return YAML::Node(YAML::NodeType::Map);
        return root;
    } catch (const YAML::Exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

}  // namespace

std::vector<ExperimentSpec> apply_overrides(std::vector<ExperimentSpec> specs, const std::string& text,
                                            const std::string& source) {
    const Reader r(source);
    const YAML::Node root = parse_yaml(text, source);
    r.expect_map(root, "", kTopLevel);
    if (root["preset"]) r.fail("preset", "not allowed in an override file");
    for (ExperimentSpec& s : specs) {
        apply_keys(r, root, s);
        validate(s);
    }
    return specs;
}

std::vector<ExperimentSpec> parse_experiments(const std::string& text, const std::string& source) {
    const Reader r(source);
    const YAML::Node root = parse_yaml(text, source);
    r.expect_map(root, "", kTopLevel);
    std::vector<ExperimentSpec> specs;
    if (root["preset"]) {
        specs = figure_preset(r.text(root["preset"], "preset"));
    } else {
        ExperimentSpec s;
        if (!root["sweep"]) {
            // A single point: report it against the self-transition axis.
            s.axis = SweepAxis::p;
            s.values = {root["model"] && root["model"]["p"] ? r.number(root["model"]["p"], "model.p") : s.base.p};
        }
        specs.push_back(std::move(s));
    }
    for (ExperimentSpec& s : specs) {
        apply_keys(r, root, s);
        if (!root["preset"] && !root["sweep"]) s.values = {s.base.p};
        try {
            validate(s);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ": " + e.what());
        }
    }
    return specs;
}

std::vector<ExperimentSpec> load_experiments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiments(buf.str(), path.string());
}

}  // namespace ehtrack

#pragma once

// Scenario files (JSON), gains files (plain text, 17 significant digits) and
// the CSV / JSON artifacts written by the command-line tool.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coopreg/comm_graph.hpp"
#include "coopreg/errors.hpp"
#include "coopreg/expression.hpp"
#include "coopreg/grid.hpp"
#include "coopreg/kernel.hpp"
#include "coopreg/signal_model.hpp"
#include "coopreg/simulator.hpp"
#include "coopreg/synthesis.hpp"

namespace coopreg {

using Json = nlohmann::ordered_json;

/// A spatial profile: constant, expression in z, or uniform samples on [0,1].
struct Profile {
    std::variant<double, std::string, std::vector<double>> value = 0.0;

    [[nodiscard]] GridFunction sample(int intervals) const {
        if (const auto* c = std::get_if<double>(&value)) return GridFunction(intervals, *c);
        if (const auto* s = std::get_if<std::string>(&value)) {
            const Expression e(*s);
            return GridFunction::sample(intervals, [&](double z) { return e(z); });
        }
        const auto& v = std::get<std::vector<double>>(value);
        return GridFunction(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())))
            .resampled(intervals);
    }

    friend bool operator==(const Profile&, const Profile&) = default;
};

struct ScenarioPlant {
    Profile a = Profile{0.0};
    double q0 = 0.0;
    double q1 = 0.0;
    Profile c0 = Profile{0.0};
    std::vector<PointWeight> points;
    double cb0 = 0.0;
    double cb1 = 0.0;

    friend bool operator==(const ScenarioPlant&, const ScenarioPlant&) = default;
};

struct ScenarioDisturbance {
    std::vector<double> frequencies;
    std::vector<std::vector<double>> P;
    std::vector<double> initial;

    friend bool operator==(const ScenarioDisturbance&, const ScenarioDisturbance&) = default;
};

struct ScenarioSignals {
    std::vector<double> reference_frequencies;
    std::vector<double> reference_initial;
    std::vector<ScenarioDisturbance> disturbances;  // empty or one per agent
    std::vector<double> b_y;                        // empty: all ones

    friend bool operator==(const ScenarioSignals&, const ScenarioSignals&) = default;
};

struct ScenarioAgent {
    Profile delta_lambda = Profile{0.0};
    Profile delta_a = Profile{0.0};
    double delta_q0 = 0.0;
    double delta_q1 = 0.0;
    Profile delta_c0 = Profile{0.0};
    std::vector<double> delta_points;
    double delta_b0 = 0.0;
    double delta_b1 = 0.0;
    std::vector<Profile> g1;
    std::vector<double> g2, g3, g4;
    Profile x0 = Profile{0.0};
    std::vector<double> v0;

    friend bool operator==(const ScenarioAgent&, const ScenarioAgent&) = default;
};

struct ScenarioDesign {
    double mu_c = 5.0;
    std::optional<double> nu;
    double are_weight = 150.0;
    double kernel_tol = 1e-10;
    int kernel_max_iter = 200;

    friend bool operator==(const ScenarioDesign&, const ScenarioDesign&) = default;
};

struct ScenarioNumerics {
    int grid_points = 200;
    double dt = 1e-3;
    double horizon = 20.0;
    double blowup_bound = 1e8;

    friend bool operator==(const ScenarioNumerics&, const ScenarioNumerics&) = default;
};

struct ScenarioOutput {
    int sample_every = 10;
    std::vector<double> snapshot_times;
    std::string directory = "out";
    std::optional<double> error_threshold;

    friend bool operator==(const ScenarioOutput&, const ScenarioOutput&) = default;
};

struct Scenario {
    std::string name;
    Mode mode = Mode::LeaderFollower;
    ScenarioPlant plant;
    std::vector<std::vector<double>> adjacency;
    std::vector<double> leader_links;
    ScenarioSignals signals;
    std::vector<ScenarioAgent> agents;
    ScenarioDesign design;
    ScenarioNumerics numerics;
    ScenarioOutput output;

    [[nodiscard]] int size() const { return static_cast<int>(adjacency.size()); }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

// Walks a parsed document, collecting every schema violation before failing.
class SchemaReader {
public:
    std::vector<std::string> violations;

    void violation(const std::string& path, const std::string& what) { violations.push_back(path + ": " + what); }

    // Reports keys of `j` outside `allowed`; false if `j` is not an object.
    bool object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            violation(path, "expected an object");
            return false;
        }
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, v] : j.items()) {
            if (!ok.contains(k)) violation(path + "." + k, "unknown field");
        }
        return true;
    }

    const Json* find(const Json& obj, const char* key, const std::string& path, bool required) {
        if (obj.is_object() && obj.contains(key)) return &obj.at(key);
        if (required) violation(join(path, key), "missing required field");
        return nullptr;
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    double number(const Json& j, const std::string& path) {
        if (j.is_number()) return j.get<double>();
        if (j.is_string()) {
            try {
                return evaluate_constant(j.get<std::string>());
            } catch (const ParseError& e) {
                throw ParseError(path + ": " + e.what());
            }
        }
        violation(path, "expected a number or a constant expression");
        return 0.0;
    }

    void number(const Json& obj, const char* key, const std::string& path, double& out, bool required = false) {
        if (const Json* j = find(obj, key, path, required)) out = number(*j, join(path, key));
    }

    void integer(const Json& obj, const char* key, const std::string& path, int& out) {
        if (const Json* j = find(obj, key, path, false)) {
            if (j->is_number_integer()) {
                out = j->get<int>();
            } else {
                violation(join(path, key), "expected an integer");
            }
        }
    }

    std::vector<double> vector(const Json& j, const std::string& path) {
        std::vector<double> out;
        if (!j.is_array()) {
            violation(path, "expected an array");
            return out;
        }
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    void vector(const Json& obj, const char* key, const std::string& path, std::vector<double>& out,
                bool required = false) {
        if (const Json* j = find(obj, key, path, required)) out = vector(*j, join(path, key));
    }

    std::vector<std::vector<double>> matrix(const Json& j, const std::string& path) {
        std::vector<std::vector<double>> out;
        if (!j.is_array()) {
            violation(path, "expected an array of rows");
            return out;
        }
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(vector(j[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    Profile profile(const Json& j, const std::string& path) {
        Profile p;
        if (j.is_number()) {
            p.value = j.get<double>();
        } else if (j.is_string()) {
            try {
                (void)Expression(j.get<std::string>());
            } catch (const ParseError& e) {
                throw ParseError(path + ": " + e.what());
            }
            p.value = j.get<std::string>();
        } else if (j.is_array()) {
            auto v = vector(j, path);
            if (v.size() < 2) violation(path, "sampled profile needs at least two samples");
            p.value = std::move(v);
        } else {
            violation(path, "expected a number, an expression in z or an array of samples");
        }
        return p;
    }

    void profile(const Json& obj, const char* key, const std::string& path, Profile& out, bool required = false) {
        if (const Json* j = find(obj, key, path, required)) out = profile(*j, join(path, key));
    }
};

inline int exo_order(const std::vector<double>& freqs) {
    int n = 0;
    for (double w : freqs) n += w == 0.0 ? 1 : 2;
    return n;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace detail

/// Semantic checks across sections; returns every violation found.
inline std::vector<std::string> scenario_violations(const Scenario& s) {
    std::vector<std::string> v;
    const auto n = s.adjacency.size();
    if (n == 0) v.emplace_back("topology.adjacency: at least one agent required");
    for (std::size_t i = 0; i < n; ++i) {
        if (s.adjacency[i].size() != n) {
            v.push_back("topology.adjacency[" + std::to_string(i) + "]: row has " +
                        std::to_string(s.adjacency[i].size()) + " entries, expected " + std::to_string(n));
        }
    }
    if (s.leader_links.size() != n) {
        v.push_back("topology.leader_links: has " + std::to_string(s.leader_links.size()) +
                    " entries but topology.adjacency is " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (s.agents.size() != n) {
        v.push_back("agents: has " + std::to_string(s.agents.size()) + " entries but topology.adjacency is " +
                    std::to_string(n) + "x" + std::to_string(n));
    }
    const auto& sig = s.signals;
    if (sig.reference_frequencies.empty()) v.emplace_back("signals.reference.frequencies: at least one frequency");
    for (double w : sig.reference_frequencies) {
        if (!(w >= 0.0)) v.emplace_back("signals.reference.frequencies: frequencies must be nonnegative");
    }
    if (static_cast<int>(sig.reference_initial.size()) != detail::exo_order(sig.reference_frequencies)) {
        v.emplace_back("signals.reference.initial: length must equal the reference model order " +
                       std::to_string(detail::exo_order(sig.reference_frequencies)));
    }
    if (!sig.disturbances.empty() && sig.disturbances.size() != n) {
        v.push_back("signals.disturbances: has " + std::to_string(sig.disturbances.size()) +
                    " entries, expected none or one per agent (" + std::to_string(n) + ")");
    }
    std::vector<double> freqs = sig.reference_frequencies;
    for (std::size_t i = 0; i < sig.disturbances.size(); ++i) {
        const auto& d = sig.disturbances[i];
        const std::string path = "signals.disturbances[" + std::to_string(i) + "]";
        const int local = detail::exo_order(d.frequencies);
        for (double w : d.frequencies) {
            if (!(w >= 0.0)) v.push_back(path + ".frequencies: frequencies must be nonnegative");
            if (std::find(freqs.begin(), freqs.end(), w) == freqs.end()) freqs.push_back(w);
        }
        if (static_cast<int>(d.initial.size()) != local) v.push_back(path + ".initial: length must be " + std::to_string(local));
        for (const auto& row : d.P) {
            if (static_cast<int>(row.size()) != local) {
                v.push_back(path + ".P: rows must have " + std::to_string(local) + " entries");
                break;
            }
        }
    }
    const int nw = detail::exo_order(freqs);
    if (!sig.b_y.empty() && static_cast<int>(sig.b_y.size()) != nw) {
        v.push_back("signals.b_y: has " + std::to_string(sig.b_y.size()) + " entries, merged signal model has order " +
                    std::to_string(nw));
    }
    for (const auto& p : s.plant.points) {
        if (!(p.location > 0.0 && p.location < 1.0)) v.emplace_back("plant.output.points: locations must lie in (0,1)");
    }
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
        const auto& a = s.agents[i];
        const std::string path = "agents[" + std::to_string(i) + "]";
        const std::size_t ch = i < sig.disturbances.size() ? sig.disturbances[i].P.size() : 0;
        auto check_len = [&](std::size_t got, const std::string& field) {
            if (got != ch) {
                v.push_back(path + "." + field + ": has " + std::to_string(got) + " entries, disturbance has " +
                            std::to_string(ch) + " channels");
            }
        };
        check_len(a.g1.size(), "disturbance.g1");
        check_len(a.g2.size(), "disturbance.g2");
        check_len(a.g3.size(), "disturbance.g3");
        check_len(a.g4.size(), "disturbance.g4");
        if (static_cast<int>(a.v0.size()) != nw) {
            v.push_back(path + ".v0: has " + std::to_string(a.v0.size()) + " entries, merged signal model has order " +
                        std::to_string(nw));
        }
        if (!a.delta_points.empty() && a.delta_points.size() != s.plant.points.size()) {
            v.push_back(path + ".output.delta_points: must match plant.output.points");
        }
    }
    if (s.numerics.grid_points < 32) v.emplace_back("numerics.grid_points: must be at least 32");
    if (!(s.numerics.dt > 0.0)) v.emplace_back("numerics.dt: must be positive");
    if (!(s.numerics.horizon >= 0.0)) v.emplace_back("numerics.horizon: must be nonnegative");
    if (!(s.numerics.blowup_bound > 0.0)) v.emplace_back("numerics.blowup_bound: must be positive");
    if (s.output.sample_every < 1) v.emplace_back("output.sample_every: must be at least 1");
    if (s.design.nu && !(*s.design.nu > 0.0)) v.emplace_back("design.nu: must be positive");
    if (!(s.design.are_weight > 0.0)) v.emplace_back("design.are_weight: must be positive");
    if (s.output.error_threshold && !(*s.output.error_threshold > 0.0)) {
        v.emplace_back("output.error_threshold: must be positive");
    }
    return v;
}

/// Parses scenario text. Malformed JSON or expressions raise ParseError
/// (line or field); structural problems raise one SchemaError listing all of them.
inline Scenario parse_scenario(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    detail::SchemaReader r;
    Scenario s;
    if (!r.object(doc, "scenario",
                  {"name", "mode", "plant", "topology", "signals", "agents", "design", "numerics", "output"})) {
        throw SchemaError("scenario: expected a JSON object");
    }
    if (const Json* j = r.find(doc, "name", "", false)) {
        if (j->is_string()) s.name = j->get<std::string>();
        else r.violation("name", "expected a string");
    }
    if (const Json* j = r.find(doc, "mode", "", true)) {
        try {
            s.mode = mode_from_string(j->is_string() ? j->get<std::string>() : std::string());
        } catch (const InvalidArgument&) {
            r.violation("mode", "expected \"leader-follower\" or \"leaderless\"");
        }
    }
    if (const Json* p = r.find(doc, "plant", "", true); p && r.object(*p, "plant", {"a", "q0", "q1", "output"})) {
        r.profile(*p, "a", "plant", s.plant.a, true);
        r.number(*p, "q0", "plant", s.plant.q0);
        r.number(*p, "q1", "plant", s.plant.q1);
        if (const Json* o = r.find(*p, "output", "plant", true);
            o && r.object(*o, "plant.output", {"c0", "points", "cb0", "cb1"})) {
            r.profile(*o, "c0", "plant.output", s.plant.c0);
            r.number(*o, "cb0", "plant.output", s.plant.cb0);
            r.number(*o, "cb1", "plant.output", s.plant.cb1);
            if (const Json* pts = r.find(*o, "points", "plant.output", false)) {
                const auto m = r.matrix(*pts, "plant.output.points");
                for (std::size_t k = 0; k < m.size(); ++k) {
                    if (m[k].size() != 2) {
                        r.violation("plant.output.points[" + std::to_string(k) + "]", "expected [weight, location]");
                        continue;
                    }
                    s.plant.points.push_back({m[k][0], m[k][1]});
                }
            }
        }
    }
    if (const Json* t = r.find(doc, "topology", "", true); t && r.object(*t, "topology", {"adjacency", "leader_links"})) {
        if (const Json* a = r.find(*t, "adjacency", "topology", true)) s.adjacency = r.matrix(*a, "topology.adjacency");
        r.vector(*t, "leader_links", "topology", s.leader_links, true);
    }
    if (const Json* g = r.find(doc, "signals", "", true);
        g && r.object(*g, "signals", {"reference", "disturbances", "b_y"})) {
        if (const Json* ref = r.find(*g, "reference", "signals", true);
            ref && r.object(*ref, "signals.reference", {"frequencies", "initial"})) {
            r.vector(*ref, "frequencies", "signals.reference", s.signals.reference_frequencies, true);
            r.vector(*ref, "initial", "signals.reference", s.signals.reference_initial, true);
        }
        if (const Json* ds = r.find(*g, "disturbances", "signals", false)) {
            if (!ds->is_array()) {
                r.violation("signals.disturbances", "expected an array");
            } else {
                for (std::size_t i = 0; i < ds->size(); ++i) {
                    const std::string path = "signals.disturbances[" + std::to_string(i) + "]";
                    ScenarioDisturbance d;
                    if (r.object((*ds)[i], path, {"frequencies", "P", "initial"})) {
                        r.vector((*ds)[i], "frequencies", path, d.frequencies, true);
                        if (const Json* pm = r.find((*ds)[i], "P", path, true)) d.P = r.matrix(*pm, path + ".P");
                        r.vector((*ds)[i], "initial", path, d.initial, true);
                    }
                    s.signals.disturbances.push_back(std::move(d));
                }
            }
        }
        r.vector(*g, "b_y", "signals", s.signals.b_y);
    }
    if (const Json* as = r.find(doc, "agents", "", true)) {
        if (!as->is_array()) {
            r.violation("agents", "expected an array");
        } else {
            for (std::size_t i = 0; i < as->size(); ++i) {
                const std::string path = "agents[" + std::to_string(i) + "]";
                const Json& aj = (*as)[i];
                ScenarioAgent a;
                if (r.object(aj, path,
                             {"delta_lambda", "delta_a", "delta_q0", "delta_q1", "output", "disturbance", "x0", "v0"})) {
                    r.profile(aj, "delta_lambda", path, a.delta_lambda);
                    r.profile(aj, "delta_a", path, a.delta_a);
                    r.number(aj, "delta_q0", path, a.delta_q0);
                    r.number(aj, "delta_q1", path, a.delta_q1);
                    if (const Json* o = r.find(aj, "output", path, false);
                        o && r.object(*o, path + ".output", {"delta_c0", "delta_points", "delta_b0", "delta_b1"})) {
                        r.profile(*o, "delta_c0", path + ".output", a.delta_c0);
                        r.vector(*o, "delta_points", path + ".output", a.delta_points);
                        r.number(*o, "delta_b0", path + ".output", a.delta_b0);
                        r.number(*o, "delta_b1", path + ".output", a.delta_b1);
                    }
                    if (const Json* d = r.find(aj, "disturbance", path, false);
                        d && r.object(*d, path + ".disturbance", {"g1", "g2", "g3", "g4"})) {
                        const std::string dp = path + ".disturbance";
                        if (const Json* g1 = r.find(*d, "g1", dp, true)) {
                            if (!g1->is_array()) {
                                r.violation(dp + ".g1", "expected an array of profiles");
                            } else {
                                for (std::size_t k = 0; k < g1->size(); ++k) {
                                    a.g1.push_back(r.profile((*g1)[k], dp + ".g1[" + std::to_string(k) + "]"));
                                }
                            }
                        }
                        r.vector(*d, "g2", dp, a.g2, true);
                        r.vector(*d, "g3", dp, a.g3, true);
                        r.vector(*d, "g4", dp, a.g4, true);
                    }
                    r.profile(aj, "x0", path, a.x0);
                    r.vector(aj, "v0", path, a.v0, true);
                }
                s.agents.push_back(std::move(a));
            }
        }
    }
    if (const Json* d = r.find(doc, "design", "", false);
        d && r.object(*d, "design", {"mu_c", "nu", "are_weight", "kernel_tol", "kernel_max_iter"})) {
        r.number(*d, "mu_c", "design", s.design.mu_c);
        if (const Json* nu = r.find(*d, "nu", "design", false); nu && !nu->is_null()) {
            s.design.nu = r.number(*nu, "design.nu");
        }
        r.number(*d, "are_weight", "design", s.design.are_weight);
        r.number(*d, "kernel_tol", "design", s.design.kernel_tol);
        r.integer(*d, "kernel_max_iter", "design", s.design.kernel_max_iter);
    }
    if (const Json* nm = r.find(doc, "numerics", "", false);
        nm && r.object(*nm, "numerics", {"grid_points", "dt", "horizon", "blowup_bound"})) {
        r.integer(*nm, "grid_points", "numerics", s.numerics.grid_points);
        r.number(*nm, "dt", "numerics", s.numerics.dt);
        r.number(*nm, "horizon", "numerics", s.numerics.horizon);
        r.number(*nm, "blowup_bound", "numerics", s.numerics.blowup_bound);
    }
    if (const Json* o = r.find(doc, "output", "", false);
        o && r.object(*o, "output", {"sample_every", "snapshot_times", "directory", "error_threshold"})) {
        r.integer(*o, "sample_every", "output", s.output.sample_every);
        r.vector(*o, "snapshot_times", "output", s.output.snapshot_times);
        if (const Json* dir = r.find(*o, "directory", "output", false)) {
            if (dir->is_string()) s.output.directory = dir->get<std::string>();
            else r.violation("output.directory", "expected a string");
        }
        if (const Json* th = r.find(*o, "error_threshold", "output", false); th && !th->is_null()) {
            s.output.error_threshold = r.number(*th, "output.error_threshold");
        }
    }
    if (r.violations.empty()) {
        auto more = scenario_violations(s);
        r.violations.insert(r.violations.end(), more.begin(), more.end());
    }
    if (!r.violations.empty()) {
        std::string msg = std::to_string(r.violations.size()) + " schema violation(s):";
        for (const auto& v : r.violations) msg += "\n  " + v;
        throw SchemaError(msg);
    }
    return s;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_text_file(path)); }

namespace detail {

inline Json profile_json(const Profile& p) {
    if (const auto* c = std::get_if<double>(&p.value)) return *c;
    if (const auto* s = std::get_if<std::string>(&p.value)) return *s;
    return std::get<std::vector<double>>(p.value);
}

}  // namespace detail

inline Json scenario_to_json(const Scenario& s) {
    using detail::profile_json;
    Json j;
    j["name"] = s.name;
    j["mode"] = to_string(s.mode);
    Json points = Json::array();
    for (const auto& p : s.plant.points) points.push_back({p.weight, p.location});
    j["plant"] = {{"a", profile_json(s.plant.a)},
                  {"q0", s.plant.q0},
                  {"q1", s.plant.q1},
                  {"output",
                   {{"c0", profile_json(s.plant.c0)}, {"points", points}, {"cb0", s.plant.cb0}, {"cb1", s.plant.cb1}}}};
    j["topology"] = {{"adjacency", s.adjacency}, {"leader_links", s.leader_links}};
    Json dist = Json::array();
    for (const auto& d : s.signals.disturbances) {
        dist.push_back({{"frequencies", d.frequencies}, {"P", d.P}, {"initial", d.initial}});
    }
    j["signals"] = {{"reference",
                     {{"frequencies", s.signals.reference_frequencies}, {"initial", s.signals.reference_initial}}},
                    {"disturbances", dist},
                    {"b_y", s.signals.b_y}};
    Json agents = Json::array();
    for (const auto& a : s.agents) {
        Json g1 = Json::array();
        for (const auto& g : a.g1) g1.push_back(profile_json(g));
        agents.push_back({{"delta_lambda", profile_json(a.delta_lambda)},
                          {"delta_a", profile_json(a.delta_a)},
                          {"delta_q0", a.delta_q0},
                          {"delta_q1", a.delta_q1},
                          {"output",
                           {{"delta_c0", profile_json(a.delta_c0)},
                            {"delta_points", a.delta_points},
                            {"delta_b0", a.delta_b0},
                            {"delta_b1", a.delta_b1}}},
                          {"disturbance", {{"g1", g1}, {"g2", a.g2}, {"g3", a.g3}, {"g4", a.g4}}},
                          {"x0", profile_json(a.x0)},
                          {"v0", a.v0}});
    }
    j["agents"] = agents;
    j["design"] = {{"mu_c", s.design.mu_c},
                   {"nu", s.design.nu ? Json(*s.design.nu) : Json(nullptr)},
                   {"are_weight", s.design.are_weight},
                   {"kernel_tol", s.design.kernel_tol},
                   {"kernel_max_iter", s.design.kernel_max_iter}};
    j["numerics"] = {{"grid_points", s.numerics.grid_points},
                     {"dt", s.numerics.dt},
                     {"horizon", s.numerics.horizon},
                     {"blowup_bound", s.numerics.blowup_bound}};
    j["output"] = {{"sample_every", s.output.sample_every},
                   {"snapshot_times", s.output.snapshot_times},
                   {"directory", s.output.directory},
                   {"error_threshold", s.output.error_threshold ? Json(*s.output.error_threshold) : Json(nullptr)}};
    return j;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

// ---- conversion to library types ----

inline Matrix to_matrix(const std::vector<std::vector<double>>& rows, Eigen::Index cols = -1) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = cols >= 0 ? cols : (rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return m;
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline CommTopology scenario_topology(const Scenario& s) {
    return {to_matrix(s.adjacency, s.size()), to_vector(s.leader_links)};
}

inline NominalPlant scenario_plant(const Scenario& s, int m) {
    NominalPlant p;
    p.a = s.plant.a.sample(m);
    p.q0 = s.plant.q0;
    p.q1 = s.plant.q1;
    p.output.smooth_weight = s.plant.c0.sample(m);
    p.output.point_weights = s.plant.points;
    p.output.boundary0 = s.plant.cb0;
    p.output.boundary1 = s.plant.cb1;
    return p;
}

inline ExoModel scenario_exo(const Scenario& s) {
    const auto ref = build_reference_block(s.signals.reference_frequencies);
    std::vector<DisturbanceBlock> blocks;
    for (const auto& d : s.signals.disturbances) {
        blocks.push_back({d.frequencies, to_matrix(d.P, detail::exo_order(d.frequencies)), to_vector(d.initial)});
    }
    return merge(ref, to_vector(s.signals.reference_initial), blocks, to_vector(s.signals.b_y));
}

inline DesignSpec scenario_design(const Scenario& s) {
    const int m = s.numerics.grid_points;
    const auto exo = scenario_exo(s);
    DesignSpec d;
    d.mode = s.mode;
    d.topology = scenario_topology(s);
    d.plant = scenario_plant(s, m);
    d.S = exo.S;
    d.b_y = exo.b_y;
    d.mu_c = s.design.mu_c;
    d.nu = s.design.nu;
    d.are_weight = s.design.are_weight;
    d.kernel.tol = s.design.kernel_tol;
    d.kernel.max_iter = s.design.kernel_max_iter;
    return d;
}

inline std::vector<AgentSpec> scenario_agents(const Scenario& s) {
    const int m = s.numerics.grid_points;
    std::vector<AgentSpec> out;
    for (const auto& a : s.agents) {
        AgentSpec spec;
        spec.delta_lambda = a.delta_lambda.sample(m);
        spec.delta_a = a.delta_a.sample(m);
        spec.delta_q0 = a.delta_q0;
        spec.delta_q1 = a.delta_q1;
        spec.output.delta_c0 = a.delta_c0.sample(m);
        spec.output.delta_points = a.delta_points;
        spec.output.delta_b0 = a.delta_b0;
        spec.output.delta_b1 = a.delta_b1;
        for (const auto& g : a.g1) spec.disturbance.g1.push_back(g.sample(m));
        spec.disturbance.g2 = to_vector(a.g2);
        spec.disturbance.g3 = to_vector(a.g3);
        spec.disturbance.g4 = to_vector(a.g4);
        spec.initial_profile = a.x0.sample(m);
        spec.internal_model_initial = to_vector(a.v0);
        out.push_back(std::move(spec));
    }
    return out;
}

inline ClosedLoop scenario_closed_loop(const Scenario& s, const RegulatorGains& gains, bool certified) {
    ClosedLoop loop;
    loop.mode = s.mode;
    loop.topology = scenario_topology(s);
    loop.plant = scenario_plant(s, s.numerics.grid_points);
    loop.exo = scenario_exo(s);
    loop.agents = scenario_agents(s);
    loop.gains = gains;
    loop.intervals = s.numerics.grid_points;
    loop.certified = certified;
    return loop;
}

inline SimOptions scenario_sim_options(const Scenario& s) {
    SimOptions o;
    o.dt = s.numerics.dt;
    o.horizon = s.numerics.horizon;
    o.sample_every = s.output.sample_every;
    o.snapshot_times = s.output.snapshot_times;
    o.blowup_bound = s.numerics.blowup_bound;
    return o;
}

// ---- gains file ----

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct GainsFile {
    RegulatorGains gains;
    bool certified = false;

    friend bool operator==(const GainsFile&, const GainsFile&) = default;
};

inline std::string serialize_gains(const RegulatorGains& g, bool certified) {
    std::ostringstream out;
    auto vec = [&](const char* name, const Vector& v) {
        out << name << ' ' << v.size();
        for (double x : v) out << ' ' << format_double(x);
        out << '\n';
    };
    out << "coop-reg gains 1\n";
    out << "certified " << (certified ? 1 : 0) << '\n';
    out << "mu_c " << format_double(g.mu_c) << '\n';
    out << "k_1 " << format_double(g.k_1) << '\n';
    vec("k_v", g.k_v);
    vec("b_y", g.b_y);
    out << "S " << g.S.rows() << ' ' << g.S.cols();
    for (Eigen::Index i = 0; i < g.S.rows(); ++i) {
        for (Eigen::Index k = 0; k < g.S.cols(); ++k) out << ' ' << format_double(g.S(i, k));
    }
    out << '\n';
    const int m = g.k_x.intervals();
    GridFunction::require_same_grid(g.k_x, g.r_x, "serialize_gains");
    out << "profiles " << m << "\n# z k_x r_x\n";
    for (int i = 0; i <= m; ++i) {
        out << format_double(g.k_x.node(i)) << ' ' << format_double(g.k_x[i]) << ' ' << format_double(g.r_x[i])
            << '\n';
    }
    return out.str();
}

inline GainsFile parse_gains(const std::string& text) {
    std::vector<std::vector<std::string>> lines;
    std::vector<std::size_t> line_no;
    {
        std::istringstream in(text);
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
            ++no;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::vector<std::string> toks;
            for (std::string t; ls >> t;) toks.push_back(t);
            if (!toks.empty()) {
                lines.push_back(toks);
                line_no.push_back(no);
            }
        }
    }
    std::size_t at = 0;
    auto fail = [&](const std::string& what) -> void {
        const std::size_t no = at < line_no.size() ? line_no[at] : line_no.empty() ? 1 : line_no.back();
        throw ParseError("gains file line " + std::to_string(no) + ": " + what);
    };
    auto num = [&](const std::string& tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') fail("bad number '" + tok + "'");
        return v;
    };
    auto count = [&](const std::string& tok) {
        const double v = num(tok);
        if (v < 0 || v != std::floor(v)) fail("bad count '" + tok + "'");
        return static_cast<Eigen::Index>(v);
    };
    auto expect = [&](const char* key, std::size_t min_tokens) -> const std::vector<std::string>& {
        if (at >= lines.size()) fail(std::string("missing '") + key + "'");
        const auto& l = lines[at];
        if (l[0] != key || l.size() < min_tokens) fail(std::string("expected '") + key + "'");
        return l;
    };
    auto vec = [&](const char* key) {
        const auto& l = expect(key, 2);
        const auto n = count(l[1]);
        if (static_cast<Eigen::Index>(l.size()) != n + 2) fail(std::string(key) + ": wrong number of entries");
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = num(l[static_cast<std::size_t>(i + 2)]);
        ++at;
        return v;
    };

    GainsFile out;
    {
        const auto& l = expect("coop-reg", 3);
        if (l[1] != "gains" || l[2] != "1") fail("not a version 1 gains file");
        ++at;
    }
    {
        const auto& l = expect("certified", 2);
        if (l[1] != "0" && l[1] != "1") fail("certified must be 0 or 1");
        out.certified = l[1] == "1";
        ++at;
    }
    out.gains.mu_c = num(expect("mu_c", 2)[1]);
    ++at;
    out.gains.k_1 = num(expect("k_1", 2)[1]);
    ++at;
    out.gains.k_v = vec("k_v");
    out.gains.b_y = vec("b_y");
    {
        const auto& l = expect("S", 3);
        const auto r = count(l[1]), c = count(l[2]);
        if (static_cast<Eigen::Index>(l.size()) != r * c + 3) fail("S: wrong number of entries");
        out.gains.S.resize(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index k = 0; k < c; ++k) out.gains.S(i, k) = num(l[static_cast<std::size_t>(3 + i * c + k)]);
        }
        ++at;
    }
    const auto m = static_cast<int>(count(expect("profiles", 2)[1]));
    if (m < 2) fail("profiles needs at least two intervals");
    ++at;
    out.gains.k_x = GridFunction(m);
    out.gains.r_x = GridFunction(m);
    for (int i = 0; i <= m; ++i, ++at) {
        if (at >= lines.size()) fail("profile table ends early");
        const auto& l = lines[at];
        if (l.size() != 3) fail("profile rows need z, k_x, r_x");
        if (std::abs(num(l[0]) - out.gains.k_x.node(i)) > 1e-12) fail("profile nodes must be uniform");
        out.gains.k_x[i] = num(l[1]);
        out.gains.r_x[i] = num(l[2]);
    }
    if (at != lines.size()) fail("trailing content");
    const auto nw = out.gains.S.rows();
    if (out.gains.S.cols() != nw || out.gains.k_v.size() != nw || out.gains.b_y.size() != nw) {
        throw ParseError("gains file: k_v, b_y and S dimensions disagree");
    }
    return out;
}

inline void save_gains(const std::filesystem::path& path, const RegulatorGains& g, bool certified) {
    write_text_file(path, serialize_gains(g, certified));
}

inline GainsFile load_gains(const std::filesystem::path& path) { return parse_gains(read_text_file(path)); }

// ---- artifacts ----

inline std::string trace_csv(const SimTrace& trace) {
    const int n = trace.agents();
    std::string out = "t,r";
    for (const char* col : {"y", "e", "u"}) {
        for (int i = 1; i <= n; ++i) out += std::string(",") + col + "_" + std::to_string(i);
    }
    out += '\n';
    const Matrix e = trace.errors();
    for (Eigen::Index k = 0; k < trace.y.rows(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        out += format_double(trace.times[ks]) + "," + format_double(trace.r[ks]);
        for (const Matrix* m : {&trace.y, &e, &trace.u}) {
            for (int i = 0; i < n; ++i) out += "," + format_double((*m)(k, i));
        }
        out += '\n';
    }
    return out;
}

inline std::string snapshot_csv(const Snapshot& s) {
    const auto m = s.profiles.rows() - 1;
    std::string out = "z";
    for (Eigen::Index i = 1; i <= s.profiles.cols(); ++i) out += ",x_" + std::to_string(i);
    out += '\n';
    for (Eigen::Index k = 0; k <= m; ++k) {
        out += format_double(static_cast<double>(k) / static_cast<double>(m));
        for (Eigen::Index i = 0; i < s.profiles.cols(); ++i) out += "," + format_double(s.profiles(k, i));
        out += '\n';
    }
    return out;
}

inline std::string kernel_csv(const TriangularKernel& k) {
    std::string out = "i,j,z,zeta,value\n";
    const int m = k.intervals();
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; j <= i; ++j) {
            out += std::to_string(i) + "," + std::to_string(j) + "," + format_double(k.node(i)) + "," +
                   format_double(k.node(j)) + "," + format_double(k(i, j)) + "\n";
        }
    }
    return out;
}

inline Json metrics_json(const SimTrace& trace, const ErrorMetrics& m) {
    Json j;
    j["mode"] = to_string(trace.mode);
    j["certified"] = trace.certified;
    j["error"] = trace.mode == Mode::LeaderFollower ? "max_i |y_i - r|" : "max_ij |y_i - y_j|";
    j["threshold"] = m.threshold;
    j["settling_time"] = std::isfinite(m.settling_time) ? Json(m.settling_time) : Json(nullptr);
    j["tail_error"] = m.tail_error;
    j["decay_rate"] = m.decay_rate;
    j["tail_bound_met"] = m.tail_bound_met;
    j["samples"] = trace.times.size();
    return j;
}

namespace detail {

inline Json complex_list(const std::vector<Complex>& z) {
    Json a = Json::array();
    for (const auto& c : z) a.push_back({c.real(), c.imag()});
    return a;
}

inline Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Json matrix_json(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
    return a;
}

}  // namespace detail

inline Json certificate_json(const Synthesis& s, Mode mode) {
    using namespace detail;
    Json j;
    j["mode"] = to_string(mode);
    j["pass"] = s.certificate.pass;
    j["failure"] = nullptr;
    j["graph"] = {{"laplacian", matrix_json(s.graph.laplacian)},
                  {"coupling", matrix_json(coupling_matrix(mode, s.graph))},
                  {"spectral_bound", s.spectral_bound},
                  {"nu", s.nu}};
    const int m = s.kernel.intervals();
    j["kernel"] = {{"intervals", m}, {"k_at_1_1", s.kernel(m, m)}};
    Json numerators = Json::array();
    for (const auto& n : s.controllability.numerators) numerators.push_back(std::abs(n));
    j["controllability"] = {{"by_controllable", s.controllability.by_controllable},
                            {"exosystem_eigenvalues", complex_list(s.controllability.eigenvalues)},
                            {"numerator_magnitudes", numerators},
                            {"nonblocking", s.controllability.nonblocking},
                            {"pbh_components", s.controllability.pbh_components},
                            {"controllable", s.controllability.controllable}};
    j["decoupling"] = {{"q_tilde_at_1", vector_json(s.decoupling.q_tilde_at_1)}};
    Eigen::SelfAdjointEigenSolver<Matrix> qe(s.are.Q);
    j["riccati"] = {{"residual", s.are.residual},
                    {"iterations", s.are.iterations},
                    {"min_eigenvalue", qe.eigenvalues().minCoeff()},
                    {"Q", matrix_json(s.are.Q)}};
    j["gains"] = {{"k_v", vector_json(s.gains.k_v)}, {"k_1", s.gains.k_1}};
    j["stability"] = {{"closed_loop_eigenvalues", complex_list(s.certificate.closed_loop_eigs)},
                      {"alpha_ev", s.certificate.alpha_ev},
                      {"target_top_eigenvalue", s.certificate.target_pde_top_eig},
                      {"overall_alpha", s.certificate.overall_alpha},
                      {"per_eigenvalue_max_re", s.certificate.per_eigenvalue_max_re}};
    if (s.sync) {
        j["steady_state"] = {{"y_inf_map", matrix_json(s.sync->y_inf_map)}, {"Pi", matrix_json(s.sync->Pi)}};
    }
    return j;
}

inline Json failure_certificate_json(Mode mode, const Error& e) {
    Json j;
    j["mode"] = to_string(mode);
    j["pass"] = false;
    j["failure"] = {{"kind", e.kind()}, {"message", e.what()}};
    return j;
}

}  // namespace coopreg

#include "stcg/scenario_io.hpp"

#include <set>
#include <sstream>

namespace stcg::graph {

using nlohmann::json;
using nlohmann::ordered_json;

ParseError::ParseError(int line, std::string field, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + field + ": " + what), line_(line),
      field_(std::move(field)) {}

namespace {

struct Reader {
    int line;

    [[noreturn]] void fail(const std::string& at, const std::string& what) const { throw ParseError(line, at, what); }

    void expect_object(const json& j, const std::string& at, std::initializer_list<const char*> allowed) const {
        if (!j.is_object()) fail(at, "expected an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, v] : j.items()) {
            (void)v;
            if (!ok.count(k)) fail(at.empty() ? k : at + "." + k, "unknown field");
        }
        for (const char* k : allowed)
            if (!j.contains(k)) fail(at.empty() ? std::string(k) : at + "." + k, "missing field");
    }

    double number(const json& j, const std::string& at) const {
        if (!j.is_number()) fail(at, "expected a number");
        return j.get<double>();
    }

    int integer(const json& j, const std::string& at) const {
        if (!j.is_number_integer()) fail(at, "expected an integer");
        return j.get<int>();
    }

    std::string string(const json& j, const std::string& at) const {
        if (!j.is_string()) fail(at, "expected a string");
        return j.get<std::string>();
    }

    bool boolean(const json& j, const std::string& at) const {
        if (!j.is_boolean()) fail(at, "expected a boolean");
        return j.get<bool>();
    }

    const json& array(const json& j, const std::string& at) const {
        if (!j.is_array()) fail(at, "expected an array");
        return j;
    }
};

std::string idx(const std::string& at, std::size_t i) { return at + "[" + std::to_string(i) + "]"; }

} // namespace

ordered_json intervention_to_json(const InterventionVector& w) {
    ordered_json j;
    j["weapon_class"] = w.weapon_class;
    j["release_window"] = w.release_window;
    j["sync_mode"] = to_string(w.sync_mode);
    j["path_strategy"] = w.path_strategy;
    j["target_priority"] = w.target_priority;
    j["decoy"] = w.decoy;
    return j;
}

InterventionVector intervention_from_json(const json& j, const std::string& at, int line) {
    Reader r{line};
    r.expect_object(j, at,
                    {"weapon_class", "release_window", "sync_mode", "path_strategy", "target_priority", "decoy"});
    InterventionVector w;
    w.weapon_class = r.integer(j["weapon_class"], at + ".weapon_class");
    w.release_window = r.number(j["release_window"], at + ".release_window");
    auto sm = sync_mode_from(r.string(j["sync_mode"], at + ".sync_mode"));
    if (!sm) r.fail(at + ".sync_mode", "unknown sync mode");
    w.sync_mode = *sm;
    w.path_strategy = r.integer(j["path_strategy"], at + ".path_strategy");
    const auto& tp = r.array(j["target_priority"], at + ".target_priority");
    for (std::size_t i = 0; i < tp.size(); ++i) w.target_priority.push_back(r.integer(tp[i], idx(at + ".target_priority", i)));
    w.decoy = r.boolean(j["decoy"], at + ".decoy");
    return w;
}

ordered_json scenario_to_json(const Scenario& s) {
    ordered_json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["scenario_id"] = s.id;

    ordered_json reg;
    reg["window_horizon_h"] = s.registries.window_horizon_h;
    reg["munitions"] = ordered_json::array();
    for (const auto& m : s.registries.munitions) {
        ordered_json o;
        o["id"] = m.id;
        o["name"] = m.name;
        o["mass"] = m.mass;
        o["explosive_mass"] = m.explosive_mass;
        o["impact_energy"] = m.impact_energy;
        o["penetration_class"] = m.penetration_class;
        reg["munitions"].push_back(o);
    }
    reg["paths"] = ordered_json::array();
    for (const auto& p : s.registries.paths) {
        ordered_json o;
        o["id"] = p.id;
        o["name"] = p.name;
        o["angle_deg"] = p.angle_deg;
        o["length_km"] = p.length_km;
        o["relays"] = p.relays;
        reg["paths"].push_back(o);
    }
    reg["targets"] = ordered_json::array();
    for (const auto& t : s.registries.targets) {
        ordered_json o;
        o["id"] = t.id;
        o["name"] = t.name;
        o["node"] = t.node;
        o["role"] = to_string(t.role);
        reg["targets"].push_back(o);
    }
    j["registries"] = reg;

    j["snapshots"] = ordered_json::array();
    for (const auto& snap : s.graph.snapshots) {
        ordered_json o;
        o["t"] = snap.t;
        o["d"] = snap.features.cols;
        o["nodes"] = ordered_json::array();
        for (const auto& n : snap.nodes) o["nodes"].push_back(ordered_json{{"id", n.id}, {"kind", to_string(n.kind)}});
        o["edges"] = ordered_json::array();
        for (const auto& e : snap.edges)
            o["edges"].push_back(
                ordered_json{{"src", e.src}, {"dst", e.dst}, {"kind", to_string(e.kind)}, {"weight", e.weight}});
        o["features"] = ordered_json::array();
        for (std::size_t r = 0; r < snap.features.rows; ++r) {
            auto row = ordered_json::array();
            for (std::size_t c = 0; c < snap.features.cols; ++c) row.push_back(snap.features(r, c));
            o["features"].push_back(row);
        }
        o["interventions"] = intervention_to_json(snap.interventions);
        j["snapshots"].push_back(o);
    }
    return j;
}

Scenario scenario_from_json(const json& j, int line) {
    Reader r{line};
    r.expect_object(j, "", {"schema_version", "scenario_id", "registries", "snapshots"});
    int version = r.integer(j["schema_version"], "schema_version");
    if (version != kScenarioSchemaVersion) r.fail("schema_version", "unsupported version " + std::to_string(version));

    Scenario s;
    s.id = r.string(j["scenario_id"], "scenario_id");

    const json& reg = j["registries"];
    r.expect_object(reg, "registries", {"window_horizon_h", "munitions", "paths", "targets"});
    s.registries.window_horizon_h = r.number(reg["window_horizon_h"], "registries.window_horizon_h");
    const auto& ms = r.array(reg["munitions"], "registries.munitions");
    for (std::size_t i = 0; i < ms.size(); ++i) {
        auto at = idx("registries.munitions", i);
        r.expect_object(ms[i], at, {"id", "name", "mass", "explosive_mass", "impact_energy", "penetration_class"});
        physics::Munition m;
        m.id = r.integer(ms[i]["id"], at + ".id");
        m.name = r.string(ms[i]["name"], at + ".name");
        m.mass = r.number(ms[i]["mass"], at + ".mass");
        m.explosive_mass = r.number(ms[i]["explosive_mass"], at + ".explosive_mass");
        m.impact_energy = r.number(ms[i]["impact_energy"], at + ".impact_energy");
        m.penetration_class = r.number(ms[i]["penetration_class"], at + ".penetration_class");
        s.registries.munitions.push_back(m);
    }
    const auto& ps = r.array(reg["paths"], "registries.paths");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto at = idx("registries.paths", i);
        r.expect_object(ps[i], at, {"id", "name", "angle_deg", "length_km", "relays"});
        PathEntry p;
        p.id = r.integer(ps[i]["id"], at + ".id");
        p.name = r.string(ps[i]["name"], at + ".name");
        p.angle_deg = r.number(ps[i]["angle_deg"], at + ".angle_deg");
        p.length_km = r.number(ps[i]["length_km"], at + ".length_km");
        const auto& rl = r.array(ps[i]["relays"], at + ".relays");
        for (std::size_t k = 0; k < rl.size(); ++k) p.relays.push_back(r.integer(rl[k], idx(at + ".relays", k)));
        s.registries.paths.push_back(p);
    }
    const auto& ts = r.array(reg["targets"], "registries.targets");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        auto at = idx("registries.targets", i);
        r.expect_object(ts[i], at, {"id", "name", "node", "role"});
        TargetEntry t;
        t.id = r.integer(ts[i]["id"], at + ".id");
        t.name = r.string(ts[i]["name"], at + ".name");
        t.node = r.integer(ts[i]["node"], at + ".node");
        auto role = module_role_from(r.string(ts[i]["role"], at + ".role"));
        if (!role) r.fail(at + ".role", "unknown module role");
        t.role = *role;
        s.registries.targets.push_back(t);
    }

    const auto& snaps = r.array(j["snapshots"], "snapshots");
    for (std::size_t si = 0; si < snaps.size(); ++si) {
        auto at = idx("snapshots", si);
        const json& o = snaps[si];
        r.expect_object(o, at, {"t", "d", "nodes", "edges", "features", "interventions"});
        GraphSnapshot snap;
        snap.t = r.integer(o["t"], at + ".t");
        int d = r.integer(o["d"], at + ".d");
        if (d < 0) r.fail(at + ".d", "feature width must be >= 0");
        const auto& nodes = r.array(o["nodes"], at + ".nodes");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            auto nat = idx(at + ".nodes", i);
            r.expect_object(nodes[i], nat, {"id", "kind"});
            Node n;
            n.id = r.integer(nodes[i]["id"], nat + ".id");
            auto kind = node_kind_from(r.string(nodes[i]["kind"], nat + ".kind"));
            if (!kind) r.fail(nat + ".kind", "unknown node kind");
            n.kind = *kind;
            snap.nodes.push_back(n);
        }
        const auto& edges = r.array(o["edges"], at + ".edges");
        for (std::size_t i = 0; i < edges.size(); ++i) {
            auto eat = idx(at + ".edges", i);
            r.expect_object(edges[i], eat, {"src", "dst", "kind", "weight"});
            Edge e;
            e.src = r.integer(edges[i]["src"], eat + ".src");
            e.dst = r.integer(edges[i]["dst"], eat + ".dst");
            auto kind = edge_kind_from(r.string(edges[i]["kind"], eat + ".kind"));
            if (!kind) r.fail(eat + ".kind", "unknown edge kind");
            e.kind = *kind;
            e.weight = r.number(edges[i]["weight"], eat + ".weight");
            snap.edges.push_back(e);
        }
        const auto& feats = r.array(o["features"], at + ".features");
        snap.features = FeatureMatrix(feats.size(), static_cast<std::size_t>(d));
        for (std::size_t i = 0; i < feats.size(); ++i) {
            auto fat = idx(at + ".features", i);
            const auto& row = r.array(feats[i], fat);
            if (row.size() != static_cast<std::size_t>(d))
                r.fail(fat, "row has " + std::to_string(row.size()) + " values, expected d=" + std::to_string(d));
            for (std::size_t c = 0; c < row.size(); ++c) snap.features(i, c) = r.number(row[c], idx(fat, c));
        }
        snap.interventions = intervention_from_json(o["interventions"], at + ".interventions", line);
        s.graph.snapshots.push_back(std::move(snap));
    }
    return s;
}

std::string write_scenario(const Scenario& s) { return scenario_to_json(s).dump() + "\n"; }

namespace {

Scenario parse_line(const std::string& text, int line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, "<document>", std::string("malformed JSON (byte ") + std::to_string(e.byte) + ")");
    }
    return scenario_from_json(j, line);
}

} // namespace

Scenario read_scenario(const std::string& bytes) {
    auto all = read_scenarios(bytes);
    if (all.size() != 1)
        throw ParseError(1, "<document>", "expected exactly one scenario, found " + std::to_string(all.size()));
    return std::move(all.front());
}

std::string write_scenarios(const std::vector<Scenario>& v) {
    std::string out;
    for (const auto& s : v) out += write_scenario(s);
    return out;
}

std::vector<Scenario> read_scenarios(const std::string& bytes) {
    std::vector<Scenario> out;
    std::istringstream in(bytes);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_line(line, lineno));
    }
    return out;
}

} // namespace stcg::graph

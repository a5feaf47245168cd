#include "stcg/config.hpp"

#include <fstream>
#include <sstream>

namespace stcg::config {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json munition_json(const physics::Munition& m) {
    return {{"id", m.id},
            {"name", m.name},
            {"mass", m.mass},
            {"explosive_mass", m.explosive_mass},
            {"impact_energy", m.impact_energy},
            {"penetration_class", m.penetration_class}};
}

ordered_json stage_json(const delay::RecoveryStage& s) {
    return {{"id", s.id},
            {"base_duration", s.base_duration},
            {"deps", s.deps},
            {"damage_sensitivity", s.damage_sensitivity},
            {"driver", graph::to_string(s.driver)}};
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

graph::ModuleRole role_of(const std::string& s) {
    auto r = graph::module_role_from(s);
    if (!r) throw ConfigError("unknown module role '" + s + "'");
    return *r;
}

} // namespace

void AppConfig::finalize() {
    model.seed = seed;
    train.seed = seed;
    surrogate.seed = seed;
    model.feature_width = graph::kFeatureWidth;
    model.intervention_width = graph::intervention_width(pipeline.registries);
    model.y_min = pipeline.delay.label_min;
    model.y_max = pipeline.delay.label_max;
}

AppConfig defaults() {
    AppConfig c;
    c.finalize();
    return c;
}

ordered_json to_json(const AppConfig& c) {
    const auto& p = c.pipeline;
    ordered_json j;
    j["seed"] = c.seed;
    j["dataset_n"] = c.dataset_n;
    j["jobs"] = c.jobs;
    j["physics"] = {{"k", p.physics.k},
                    {"e_half", p.physics.e_half},
                    {"impedance_concrete", p.physics.impedance_concrete},
                    {"impedance_granite", p.physics.impedance_granite},
                    {"impedance_cavity", p.physics.impedance_cavity}};
    ordered_json stages = ordered_json::array();
    for (const auto& s : p.delay.stages) stages.push_back(stage_json(s));
    ordered_json weights, groups;
    for (const auto& [k, v] : p.delay.sdi.weights) weights[k] = v;
    for (const auto& [k, v] : p.delay.sdi.stage_group) groups[k] = v;
    j["delay"] = {{"stages", stages},
                  {"label_min", p.delay.label_min},
                  {"label_max", p.delay.label_max},
                  {"noise_sigma", p.delay.noise_sigma},
                  {"sdi",
                   {{"weights", weights},
                    {"stage_group", groups},
                    {"t_window", p.delay.sdi.t_window},
                    {"elasticity", p.delay.sdi.elasticity}}}};
    const auto& g = p.gen;
    j["generator"] = {{"min_platforms", g.min_platforms},
                      {"max_platforms", g.max_platforms},
                      {"min_steps", g.min_steps},
                      {"max_steps", g.max_steps},
                      {"max_relays_per_path", g.max_relays_per_path},
                      {"concrete_min", g.concrete_min},
                      {"concrete_max", g.concrete_max},
                      {"granite_min", g.granite_min},
                      {"granite_max", g.granite_max},
                      {"cavity_min", g.cavity_min},
                      {"cavity_max", g.cavity_max},
                      {"exposure_loss", g.exposure_loss},
                      {"exposure_loss_decoy", g.exposure_loss_decoy},
                      {"length_loss", g.length_loss},
                      {"window_loss", g.window_loss},
                      {"rank_penalty_sync", g.rank_penalty_sync},
                      {"rank_penalty_stagger", g.rank_penalty_stagger},
                      {"stagger_factor", g.stagger_factor},
                      {"equivalence_tol_days", g.equivalence_tol_days},
                      {"cf_candidates", g.cf_candidates}};
    ordered_json muns = ordered_json::array(), paths = ordered_json::array(), targets = ordered_json::array();
    for (const auto& m : p.registries.munitions) muns.push_back(munition_json(m));
    for (const auto& pe : p.registries.paths)
        paths.push_back({{"id", pe.id}, {"name", pe.name}, {"angle_deg", pe.angle_deg}, {"length_km", pe.length_km},
                         {"relays", pe.relays}});
    for (const auto& t : p.registries.targets)
        targets.push_back({{"id", t.id}, {"name", t.name}, {"node", t.node}, {"role", graph::to_string(t.role)}});
    j["registries"] = {{"window_horizon_h", p.registries.window_horizon_h},
                       {"munitions", muns},
                       {"paths", paths},
                       {"targets", targets}};
    j["split"] = {{"train_frac", p.train_frac}, {"val_frac", p.val_frac}};
    j["metrics"] = {{"top_fraction", p.top_fraction}, {"top_rel_tol", p.top_rel_tol}, {"cf_band", p.cf_band}};
    auto mj = c.model.to_json();
    ordered_json model;
    for (const char* k : {"heads", "embed_dim", "gat_layers", "temporal_kernel", "dilations", "flat_hidden"})
        model[k] = mj[k];
    j["model"] = model;
    auto tj = c.train.to_json();
    ordered_json train;
    for (const char* k : {"lr", "cosine", "lr_floor", "epochs", "batch_size", "lambda", "beta", "literal_cf",
                          "creg_noise", "time_budget_s"})
        train[k] = tj[k];
    j["train"] = train;
    const auto& s = c.surrogate;
    j["surrogate"] = {{"hidden", s.hidden},         {"epochs", s.epochs},
                      {"lr", s.lr},                 {"mu", s.mu},
                      {"probe_pairs", s.probe_pairs}, {"delta_min", s.delta_min},
                      {"delta_max", s.delta_max},   {"train_frac", s.train_frac},
                      {"violation_tol", s.violation_tol}};
    j["service"] = {{"host", c.service.host},
                    {"port", c.service.port},
                    {"journal_dir", c.service.journal_dir},
                    {"threads", c.service.threads}};
    return j;
}

AppConfig from_json(const json& j) {
    AppConfig c;
    try {
        c.seed = get<std::uint64_t>(j, "seed");
        c.dataset_n = get<std::size_t>(j, "dataset_n");
        c.jobs = get<int>(j, "jobs");
        const auto& ph = j.at("physics");
        auto& P = c.pipeline.physics;
        P.k = get<double>(ph, "k");
        P.e_half = get<double>(ph, "e_half");
        P.impedance_concrete = get<double>(ph, "impedance_concrete");
        P.impedance_granite = get<double>(ph, "impedance_granite");
        P.impedance_cavity = get<double>(ph, "impedance_cavity");

        const auto& dj = j.at("delay");
        auto& D = c.pipeline.delay;
        D.stages.clear();
        for (const auto& s : dj.at("stages"))
            D.stages.push_back({get<std::string>(s, "id"), get<double>(s, "base_duration"),
                                get<std::vector<std::string>>(s, "deps"), get<double>(s, "damage_sensitivity"),
                                role_of(get<std::string>(s, "driver"))});
        D.label_min = get<double>(dj, "label_min");
        D.label_max = get<double>(dj, "label_max");
        D.noise_sigma = get<double>(dj, "noise_sigma");
        const auto& sj = dj.at("sdi");
        D.sdi.weights = sj.at("weights").get<std::map<std::string, double>>();
        D.sdi.stage_group = sj.at("stage_group").get<std::map<std::string, std::string>>();
        D.sdi.t_window = get<double>(sj, "t_window");
        D.sdi.elasticity = get<double>(sj, "elasticity");

        const auto& gj = j.at("generator");
        auto& G = c.pipeline.gen;
        G.min_platforms = get<int>(gj, "min_platforms");
        G.max_platforms = get<int>(gj, "max_platforms");
        G.min_steps = get<int>(gj, "min_steps");
        G.max_steps = get<int>(gj, "max_steps");
        G.max_relays_per_path = get<int>(gj, "max_relays_per_path");
        G.concrete_min = get<double>(gj, "concrete_min");
        G.concrete_max = get<double>(gj, "concrete_max");
        G.granite_min = get<double>(gj, "granite_min");
        G.granite_max = get<double>(gj, "granite_max");
        G.cavity_min = get<double>(gj, "cavity_min");
        G.cavity_max = get<double>(gj, "cavity_max");
        G.exposure_loss = get<double>(gj, "exposure_loss");
        G.exposure_loss_decoy = get<double>(gj, "exposure_loss_decoy");
        G.length_loss = get<double>(gj, "length_loss");
        G.window_loss = get<double>(gj, "window_loss");
        G.rank_penalty_sync = get<double>(gj, "rank_penalty_sync");
        G.rank_penalty_stagger = get<double>(gj, "rank_penalty_stagger");
        G.stagger_factor = get<double>(gj, "stagger_factor");
        G.equivalence_tol_days = get<double>(gj, "equivalence_tol_days");
        G.cf_candidates = get<int>(gj, "cf_candidates");

        const auto& rj = j.at("registries");
        auto& R = c.pipeline.registries;
        R.window_horizon_h = get<double>(rj, "window_horizon_h");
        R.munitions.clear();
        for (const auto& m : rj.at("munitions"))
            R.munitions.push_back({get<int>(m, "id"), get<std::string>(m, "name"), get<double>(m, "mass"),
                                   get<double>(m, "explosive_mass"), get<double>(m, "impact_energy"),
                                   get<double>(m, "penetration_class")});
        R.paths.clear();
        for (const auto& p : rj.at("paths"))
            R.paths.push_back({get<int>(p, "id"), get<std::string>(p, "name"), get<double>(p, "angle_deg"),
                               get<double>(p, "length_km"), get<std::vector<int>>(p, "relays")});
        R.targets.clear();
        for (const auto& t : rj.at("targets"))
            R.targets.push_back({get<int>(t, "id"), get<std::string>(t, "name"), get<int>(t, "node"), role_of(get<std::string>(t, "role"))});

        c.pipeline.train_frac = get<double>(j.at("split"), "train_frac");
        c.pipeline.val_frac = get<double>(j.at("split"), "val_frac");
        c.pipeline.top_fraction = get<double>(j.at("metrics"), "top_fraction");
        c.pipeline.top_rel_tol = get<double>(j.at("metrics"), "top_rel_tol");
        c.pipeline.cf_band = get<double>(j.at("metrics"), "cf_band");

        c.model = model::ModelConfig::from_json(j.at("model"));
        c.train = model::TrainConfig::from_json(j.at("train"));
        const auto& uj = j.at("surrogate");
        auto& S = c.surrogate;
        S.hidden = get<int>(uj, "hidden");
        S.epochs = get<int>(uj, "epochs");
        S.lr = get<double>(uj, "lr");
        S.mu = get<double>(uj, "mu");
        S.probe_pairs = get<int>(uj, "probe_pairs");
        S.delta_min = get<double>(uj, "delta_min");
        S.delta_max = get<double>(uj, "delta_max");
        S.train_frac = get<double>(uj, "train_frac");
        S.violation_tol = get<double>(uj, "violation_tol");
        const auto& vj = j.at("service");
        c.service.host = get<std::string>(vj, "host");
        c.service.port = get<int>(vj, "port");
        c.service.journal_dir = get<std::string>(vj, "journal_dir");
        c.service.threads = get<int>(vj, "threads");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.finalize();
    c.pipeline.delay.sdi.validate();
    c.model.validate();
    c.train.validate();
    c.surrogate.validate();
    if (c.dataset_n < 1) throw ConfigError("config: dataset_n must be >= 1");
    if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    return c;
}

void overlay(json& base, const json& patch, const std::string& at) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string path = at.empty() ? it.key() : at + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + path + "'");
        auto& slot = base[it.key()];
        if (slot.is_object() && it.value().is_object())
            overlay(slot, it.value(), path);
        else
            slot = it.value();
    }
}

void apply_assignment(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' must look like key.path=value");
    const std::string path = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json patch = value;
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string k; std::getline(ss, k, '.');) keys.push_back(k);
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) patch = json{{*it, patch}};
    overlay(doc, patch);
}

AppConfig load(const std::string& path, const std::vector<std::string>& assignments) {
    json doc = json(to_json(defaults()));
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        json file;
        try {
            file = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file '" + path + "': " + e.what());
        }
        overlay(doc, file);
    }
    for (const auto& a : assignments) apply_assignment(doc, a);
    return from_json(doc);
}

} // namespace stcg::config

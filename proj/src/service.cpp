#include "stcg/service.hpp"

#include "stcg/generator.hpp"
#include "stcg/rng.hpp"
#include "stcg/scenario_io.hpp"

#include <httplib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace stcg::service {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct HttpError {
    int status;
    std::string message;
    std::string field;
};

Response reply(int status, const ordered_json& body) { return {status, body.dump()}; }

Response error(int status, const std::string& message, const std::string& field = "") {
    return reply(status, ordered_json{{"error", message}, {"field", field}});
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '/');)
        if (!p.empty()) parts.push_back(p);
    return parts;
}

const json& field(const json& body, const std::string& key, const std::string& at) {
    if (!body.is_object() || !body.contains(key)) throw HttpError{400, "missing required field", at};
    return body.at(key);
}

std::vector<int> int_list(const json& body, const std::string& key, const std::string& at) {
    const auto& v = body.at(key);
    if (!v.is_array()) throw HttpError{400, "expected an array of integers", at};
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) throw HttpError{400, "expected an integer", at + "[" + std::to_string(i) + "]"};
        out.push_back(v[i].get<int>());
    }
    return out;
}

graph::InterventionVector parse_w(const json& j, const std::string& at) {
    try {
        return graph::intervention_from_json(j, at);
    } catch (const graph::ParseError& e) {
        throw HttpError{400, e.what(), e.field()};
    }
}

void check_scenario(const graph::Scenario& s) {
    auto v = graph::validate(s);
    if (!v.empty()) throw HttpError{422, "scenario fails validation: " + graph::format_violations(v), "scenario"};
}

ordered_json edge_json(const model::AttentionEdge& e) {
    return {{"src", e.src}, {"dst", e.dst}, {"weight", e.weight}};
}

} // namespace

Service::Service(harness::PipelineConfig cfg, std::optional<model::Model> model, std::string model_id,
                 ServiceOptions opt)
    : cfg_(std::move(cfg)), model_(std::move(model)), model_id_(std::move(model_id)), opt_(std::move(opt)) {
    if (!opt_.journal_dir.empty()) std::filesystem::create_directories(opt_.journal_dir);
}

const model::Model& Service::require_model() const {
    if (!model_) throw HttpError{409, "no model loaded; start the service with --model", ""};
    return *model_;
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::vector<HistoryEntry> Service::history(const std::string& session) const {
    auto s = find(session);
    if (!s) return {};
    std::lock_guard lk(s->mu);
    return s->history;
}

void Service::record(Session& s, const std::string& method, const std::string& path, const json& body,
                     const Response& r) const {
    HistoryEntry e{s.history.size() + 1, method, path, body, r.status, json::parse(r.body)};
    if (!opt_.journal_dir.empty()) {
        ordered_json line{{"seq", e.seq},       {"method", e.method}, {"path", e.path},
                          {"body", e.body},     {"status", e.status}, {"response", e.response}};
        std::ofstream out(std::filesystem::path(opt_.journal_dir) / (s.id + ".jsonl"), std::ios::app);
        out << line.dump() << '\n';
    }
    s.history.push_back(std::move(e));
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
    json parsed = json::object();
    if (!body.empty()) {
        try {
            parsed = json::parse(body);
        } catch (const json::parse_error& e) {
            return error(400, std::string("body is not valid JSON: ") + e.what());
        }
    }
    try {
        return dispatch(method, path, parsed);
    } catch (const HttpError& e) {
        return error(e.status, e.message, e.field);
    } catch (const graph::ParseError& e) {
        return error(400, e.what(), e.field());
    } catch (const model::ModelError& e) {
        return error(422, e.what());
    } catch (const std::invalid_argument& e) {
        return error(400, e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

Response Service::dispatch(const std::string& method, const std::string& path, const json& body) const {
    auto parts = split_path(path);
    if (parts.size() == 1 && parts[0] == "healthz" && method == "GET")
        return reply(200, {{"status", "ok"},
                           {"model_loaded", has_model()},
                           {"model_id", model_id_},
                           {"model_kind", model_? model_->kind() : ""},
                           {"service_version", kServiceVersion},
                           {"api_version", kApiVersion},
                           {"scenario_schema_version", graph::kScenarioSchemaVersion}});
    if (parts.size() == 1 && parts[0] == "schema" && method == "GET") return reply(200, schema());
    if (parts.empty() || parts[0] != "session") return error(404, "no such endpoint: " + method + " " + path);
    if (parts.size() == 1) {
        if (method != "POST") return error(404, "no such endpoint: " + method + " " + path);
        return create(body);
    }
    if (parts.size() != 3) return error(404, "no such endpoint: " + method + " " + path);
    auto s = find(parts[1]);
    if (!s) return error(404, "unknown session '" + parts[1] + "'");
    std::lock_guard lk(s->mu);
    Response r;
    try {
        r = on_session(*s, method, parts[2], body);
    } catch (const HttpError& e) {
        r = error(e.status, e.message, e.field);
    } catch (const graph::ParseError& e) {
        r = error(400, e.what(), e.field());
    } catch (const model::ModelError& e) {
        r = error(422, e.what());
    } catch (const std::invalid_argument& e) {
        r = error(400, e.what());
    }
    if (method != "GET" && r.status != 404) record(*s, method, path, body, r);
    return r;
}

Response Service::create(const json& body) const {
    if (!body.is_object()) throw HttpError{400, "body must be an object", ""};
    for (auto it = body.begin(); it != body.end(); ++it)
        if (it.key() != "scenario" && it.key() != "template_seed")
            throw HttpError{400, "unknown field", it.key()};
    std::uint64_t n;
    {
        std::lock_guard lk(mu_);
        n = ++counter_;
    }
    Rng rng(opt_.seed, (streams::kService << 32) + n);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%04llu-%06llx", static_cast<unsigned long long>(n),
                  static_cast<unsigned long long>(rng.next_u64() & 0xffffff));
    auto sess = std::make_shared<Session>();
    sess->id = buf;
    if (body.contains("scenario")) {
        sess->scenario = graph::scenario_from_json(body.at("scenario"));
    } else {
        std::uint64_t seed = opt_.seed;
        if (body.contains("template_seed")) {
            if (!body.at("template_seed").is_number_unsigned())
                throw HttpError{400, "expected a non-negative integer", "template_seed"};
            seed = body.at("template_seed").get<std::uint64_t>();
        }
        Rng trng(seed, streams::kService);
        sess->scenario = harness::sample_scenario("template-" + std::to_string(seed), cfg_.registries, cfg_.gen,
                                                  cfg_.physics, trng);
    }
    check_scenario(sess->scenario);
    Response r = reply(201, {{"session_id", sess->id},
                             {"model_id", model_id_},
                             {"scenario", graph::scenario_to_json(sess->scenario)}});
    record(*sess, "POST", "/session", body, r);
    std::lock_guard lk(mu_);
    sessions_[sess->id] = sess;
    return r;
}

Response Service::on_session(Session& s, const std::string& method, const std::string& op, const json& body) const {
    const auto& sc = s.scenario;
    if (op == "scenario" && method == "GET") return reply(200, graph::scenario_to_json(sc));
    if (op == "scenario" && method == "PUT") {
        auto next = graph::scenario_from_json(body.contains("scenario") ? body.at("scenario") : body);
        check_scenario(next);
        s.scenario = std::move(next);
        return reply(200, {{"scenario_id", s.scenario.id}, {"steps", s.scenario.graph.steps()}});
    }
    if (op == "intervention" && method == "PUT") {
        auto w = parse_w(body.contains("w") ? body.at("w") : body, "w");
        auto next = sc.with_intervention(w);
        check_scenario(next);
        s.scenario = std::move(next);
        return reply(200, {{"w", graph::intervention_to_json(w)}});
    }
    if (op == "attention" && method == "GET") {
        const auto& m = require_model();
        auto p = m.predict_delay(sc);
        std::map<std::string, ordered_json> keyed;
        for (const auto& e : p.attention.edges)
            keyed[std::to_string(e.src) + "->" + std::to_string(e.dst)].push_back(
                {{"t", e.t}, {"layer", e.layer}, {"head", e.head}, {"weight", e.weight}});
        ordered_json edges = ordered_json::object();
        for (auto& [k, v] : keyed) edges[k] = std::move(v);
        return reply(200, {{"layers", p.attention.layers}, {"heads", p.attention.heads}, {"edges", edges}});
    }
    if (method != "POST") throw HttpError{404, "no such endpoint: " + method + " /session/{id}/" + op, ""};

    if (op == "predict") {
        const auto& m = require_model();
        m.check_inputs(sc);
        auto p = m.predict_delay(sc);
        auto gt = harness::ground_truth(sc, sc.current_intervention(), cfg_.physics, cfg_.delay, cfg_.gen);
        ordered_json summary = ordered_json::array();
        for (const auto& e : p.attention.summary(opt_.attention_top_k)) summary.push_back(edge_json(e));
        return reply(200, {{"y_hat_days", p.y_hat}, {"sdi", gt.sdi}, {"attention_summary", summary}});
    }
    if (op == "counterfactual") {
        const auto& m = require_model();
        auto alt = parse_w(field(body, "alt_w", "alt_w"), "alt_w");
        check_scenario(sc.with_intervention(alt));
        auto [yf, yc] = m.counterfactual_predict(sc, alt);
        return reply(200, {{"y_factual", yf}, {"y_counterfactual", yc}, {"delta", yc - yf}});
    }
    if (op == "sensitivity") {
        const auto& m = require_model();
        harness::GridAxes axes;
        for (const auto& mu : sc.registries.munitions) axes.weapons.push_back(mu.id);
        for (const auto& pe : sc.registries.paths) axes.paths.push_back(pe.id);
        auto stacks = physics::default_stacks(cfg_.physics);
        for (const auto& st : stacks) axes.structures.push_back(st.id);
        if (body.contains("axes")) {
            const auto& a = body.at("axes");
            if (!a.is_object()) throw HttpError{400, "expected an object", "axes"};
            for (auto it = a.begin(); it != a.end(); ++it) {
                const std::string at = "axes." + it.key();
                if (it.key() == "weapons") axes.weapons = int_list(a, it.key(), at);
                else if (it.key() == "paths") axes.paths = int_list(a, it.key(), at);
                else if (it.key() == "structures") axes.structures = int_list(a, it.key(), at);
                else throw HttpError{400, "unknown field", at};
            }
        }
        auto g = harness::sensitivity_grid(harness::predictor_of(m), sc, axes, stacks);
        return reply(200, harness::to_json(g));
    }
    if (op == "recommend") {
        const auto& m = require_model();
        const auto& cj = field(body, "candidates", "candidates");
        if (!cj.is_array() || cj.empty()) throw HttpError{400, "expected a non-empty array", "candidates"};
        std::vector<harness::Candidate> cands;
        for (std::size_t i = 0; i < cj.size(); ++i) {
            const std::string at = "candidates[" + std::to_string(i) + "]";
            const auto& c = cj[i];
            if (!c.is_object()) throw HttpError{400, "expected an object", at};
            int id = static_cast<int>(i);
            if (c.contains("id")) {
                if (!c.at("id").is_number_integer()) throw HttpError{400, "expected an integer", at + ".id"};
                id = c.at("id").get<int>();
            }
            auto w = parse_w(field(c, "w", at + ".w"), at + ".w");
            check_scenario(sc.with_intervention(w));
            cands.push_back({id, w});
        }
        auto obj = harness::Objective::MaxDelay;
        if (body.contains("objective")) {
            auto o = body.at("objective").is_string() ? harness::objective_from(body.at("objective").get<std::string>())
                                                      : std::nullopt;
            if (!o) throw HttpError{400, "objective must be max_delay or max_sdi", "objective"};
            obj = *o;
        }
        std::size_t top_k = 0;
        if (body.contains("top_k")) {
            if (!body.at("top_k").is_number_unsigned()) throw HttpError{400, "expected a non-negative integer", "top_k"};
            top_k = body.at("top_k").get<std::size_t>();
        }
        return reply(200, {{"objective", harness::to_string(obj)},
                           {"ranked", harness::to_json(harness::recommend(m, sc, cands, obj, top_k, cfg_))}});
    }
    throw HttpError{404, "no such endpoint: POST /session/{id}/" + op, ""};
}

ordered_json Service::schema() {
    auto ep = [](const char* method, const char* path, ordered_json request, ordered_json response) {
        return ordered_json{{"method", method}, {"path", path}, {"request", request}, {"response", response}};
    };
    const ordered_json w = "InterventionVector {weapon_class:int, release_window:number, sync_mode:"
                           "\"synchronized\"|\"staggered\", path_strategy:int, target_priority:[int], decoy:bool}";
    ordered_json eps = ordered_json::array();
    eps.push_back(ep("POST", "/session", {{"scenario", "Scenario (optional)"}, {"template_seed", "uint (optional)"}},
                     {{"session_id", "string"}, {"model_id", "string"}, {"scenario", "Scenario"}}));
    eps.push_back(ep("GET", "/session/{id}/scenario", nullptr, "Scenario"));
    eps.push_back(ep("PUT", "/session/{id}/scenario", "Scenario or {scenario: Scenario}",
                     {{"scenario_id", "string"}, {"steps", "int"}}));
    eps.push_back(ep("PUT", "/session/{id}/intervention", ordered_json{{"w", w}}, {{"w", w}}));
    eps.push_back(ep("POST", "/session/{id}/predict", nullptr,
                     {{"y_hat_days", "number"},
                      {"sdi", "number"},
                      {"attention_summary", "[{src:int, dst:int, weight:number}]"}}));
    eps.push_back(ep("POST", "/session/{id}/counterfactual", ordered_json{{"alt_w", w}},
                     {{"y_factual", "number"}, {"y_counterfactual", "number"}, {"delta", "number"}}));
    eps.push_back(ep("POST", "/session/{id}/sensitivity",
                     {{"axes", "{weapons:[int], paths:[int], structures:[int]} (optional, each defaults to all)"}},
                     {{"axes", "GridAxes"},
                      {"reference", "string"},
                      {"values", "[[[number]]] indexed [weapon][path][structure]"}}));
    eps.push_back(ep("POST", "/session/{id}/recommend",
                     {{"candidates", "[{id:int, w:InterventionVector}]"},
                      {"objective", "\"max_delay\"|\"max_sdi\" (default max_delay)"},
                      {"top_k", "uint (0 = all)"}},
                     {{"objective", "string"}, {"ranked", "[{id, w, score, y_hat, attention}]"}}));
    eps.push_back(ep("GET", "/session/{id}/attention", nullptr,
                     {{"layers", "int"}, {"heads", "int"}, {"edges", "{\"src->dst\": [{t, layer, head, weight}]}"}}));
    eps.push_back(ep("GET", "/healthz", nullptr,
                     {{"status", "ok"},
                      {"model_loaded", "bool"},
                      {"model_id", "string"},
                      {"model_kind", "string"},
                      {"service_version", "string"},
                      {"api_version", "int"},
                      {"scenario_schema_version", "int"}}));
    eps.push_back(ep("GET", "/schema", nullptr, "this document"));
    return {{"api_version", kApiVersion},
            {"errors",
             {{"400", "malformed body; field names the offending JSON path"},
              {"404", "unknown session or endpoint"},
              {"409", "no model loaded"},
              {"422", "scenario or intervention fails validation"}}},
            {"error_body", {{"error", "string"}, {"field", "string"}}},
            {"endpoints", eps}};
}

std::string replay_journal(const Service& svc, const std::string& journal_text) {
    std::stringstream in(journal_text);
    std::string line, old_id, new_id;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json e = json::parse(line);
        std::string path = e.at("path").get<std::string>();
        const std::string method = e.at("method").get<std::string>();
        const std::string body = e.at("body").dump();
        if (path == "/session") {
            if (!new_id.empty()) throw std::invalid_argument("journal line " + std::to_string(n) + ": second session");
            auto r = svc.handle(method, path, body);
            if (r.status != 201) throw std::runtime_error("journal replay: session creation failed: " + r.body);
            old_id = e.at("response").at("session_id").get<std::string>();
            new_id = json::parse(r.body).at("session_id").get<std::string>();
            continue;
        }
        if (new_id.empty()) throw std::invalid_argument("journal line " + std::to_string(n) + ": no session yet");
        const std::string prefix = "/session/" + old_id + "/";
        if (path.rfind(prefix, 0) != 0)
            throw std::invalid_argument("journal line " + std::to_string(n) + ": foreign session path " + path);
        path = "/session/" + new_id + "/" + path.substr(prefix.size());
        svc.handle(method, path, body);
    }
    if (new_id.empty()) throw std::invalid_argument("journal is empty");
    return new_id;
}

// -- HTTP front-end ----------------------------------------------------------------

struct HttpServer::Impl {
    const Service& svc;
    httplib::Server server;
    explicit Impl(const Service& s) : svc(s) {}
};

HttpServer::HttpServer(const Service& svc, int threads) : impl_(std::make_unique<Impl>(svc)) {
    auto& srv = impl_->server;
    const int n = std::max(1, threads);
    srv.new_task_queue = [n] { return new httplib::ThreadPool(static_cast<std::size_t>(n)); };
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        auto r = impl_->svc.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    const char* any = R"(/.*)";
    srv.Get(any, handler);
    srv.Post(any, handler);
    srv.Put(any, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

} // namespace stcg::service

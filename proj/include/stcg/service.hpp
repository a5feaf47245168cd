#pragma once

// Counterfactual sandbox service: stateful sessions over a read-only model.
//
// Every POST/PUT that names a session (and session creation itself) appends
// one entry to that session's history. With a journal directory set, each
// entry is also appended to <dir>/<session id>.jsonl as
//   {"seq":n,"method":"PUT","path":"/session/<id>/intervention","body":{..},
//    "status":200,"response":{..}}
// Replaying those requests in order on a fresh service rebuilds the session.
//
// Error bodies: {"error":"<message>","field":"<json path or empty>"}.

#include "stcg/harness.hpp"
#include "stcg/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace stcg::service {

inline constexpr const char* kServiceVersion = "1.0.0";
inline constexpr int kApiVersion = 1;

struct Response {
    int status = 200;
    std::string body; // JSON document
};

struct HistoryEntry {
    std::size_t seq = 0;
    std::string method;
    std::string path;
    nlohmann::json body;
    int status = 0;
    nlohmann::json response;
};

struct ServiceOptions {
    std::uint64_t seed = 7;  // session ids and template scenarios
    std::string journal_dir; // empty = no journal
    std::size_t attention_top_k = 8;
};

class Service {
  public:
    /// `model` may be empty; prediction endpoints then answer 409.
    Service(harness::PipelineConfig cfg, std::optional<model::Model> model, std::string model_id,
            ServiceOptions opt = {});

    /// Routes one request. Never throws; failures become error responses.
    Response handle(const std::string& method, const std::string& path, const std::string& body) const;

    [[nodiscard]] bool has_model() const { return model_.has_value(); }
    [[nodiscard]] const std::string& model_id() const { return model_id_; }
    [[nodiscard]] std::vector<HistoryEntry> history(const std::string& session) const;
    [[nodiscard]] static nlohmann::ordered_json schema();

  private:
    struct Session {
        std::mutex mu;
        std::string id;
        graph::Scenario scenario;
        std::vector<HistoryEntry> history;
    };

    Response dispatch(const std::string& method, const std::string& path, const nlohmann::json& body) const;
    Response create(const nlohmann::json& body) const;
    Response on_session(Session& s, const std::string& method, const std::string& op,
                        const nlohmann::json& body) const;
    void record(Session& s, const std::string& method, const std::string& path, const nlohmann::json& body,
                const Response& r) const;
    std::shared_ptr<Session> find(const std::string& id) const;
    const model::Model& require_model() const;

    harness::PipelineConfig cfg_;
    std::optional<model::Model> model_;
    std::string model_id_;
    ServiceOptions opt_;

    mutable std::mutex mu_; // guards sessions_ and counter_
    mutable std::map<std::string, std::shared_ptr<Session>> sessions_;
    mutable std::uint64_t counter_ = 0;
};

/// Re-issues the journal's requests against `svc` (session ids are remapped to
/// the new ones) and returns the id of the rebuilt session.
std::string replay_journal(const Service& svc, const std::string& journal_text);

/// Blocking HTTP front-end. `on_ready` receives the bound port (useful with port 0).
class HttpServer {
  public:
    explicit HttpServer(const Service& svc, int threads = 4);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free one); returns the bound port or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace stcg::service

#include "elicit/service.hpp"

#include "elicit/errors.hpp"
#include "json_codec.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>

namespace elicit {
namespace {

constexpr const char* kJson = "application/json";

struct HttpError : std::runtime_error {
    int status;
    std::string code;
    std::string feature;
    HttpError(int s, std::string c, const std::string& msg, std::string f = {})
        : std::runtime_error(msg), status(s), code(std::move(c)), feature(std::move(f)) {}
};

Json config_to_json(const SessionConfig& c) {
    return Json{{"max_iterations", c.max_iterations},
                {"batch_size", c.batch_size},
                {"user_model", c.user_model},
                {"sampler", c.sampler}};
}

SessionConfig config_from_json(const Json& j) {
    SessionConfig c;
    c.max_iterations = j.at("max_iterations").get<int>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.user_model = j.at("user_model").get<UserModelParams>();
    c.sampler = j.at("sampler").get<SamplerConfig>();
    return c;
}

Json optional_mean(const HeatmapData& h, std::size_t r, std::size_t c) {
    const auto m = h.mean(r, c);
    return m ? Json(*m) : Json(nullptr);
}

Json heatmap_json(const Dataset& train, const std::vector<std::size_t>& ids) {
    const HeatmapData h = heatmap_summary(train, ids);
    Json cells = Json::array(), counts = Json::array();
    for (std::size_t r = 0; r < h.rows.size(); ++r) {
        Json row = Json::array(), crow = Json::array();
        for (std::size_t c = 0; c < h.cols.size(); ++c) {
            row.push_back(optional_mean(h, r, c));
            crow.push_back(h.cell_count(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
        cells.push_back(std::move(row));
        counts.push_back(std::move(crow));
    }
    return Json{{"rows", h.rows},
                {"cols", h.cols},
                {"feature_ids", h.feature_ids},
                {"cell_mean", cells},
                {"cell_count", counts},
                {"total_count", h.total_count}};
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json iteration_json(const IterationResult& r, const Dataset& train) {
    Json top = Json::array();
    for (const auto& [id, rel] : r.top_relevance)
        top.push_back(Json{{"feature", train.feature_names[id]}, {"id", id}, {"relevance", rel}});
    return Json{{"iteration", r.iteration},
                {"mse", r.mse},
                {"n_relevant", r.n_relevant},
                {"top_relevance", top},
                {"predictions_digest", hex64(r.predictions_digest)}};
}

struct Entry {
    std::mutex op;  // held for the whole of a mutating request
    std::atomic<bool> updating{false};
    std::unique_ptr<Session> session;  // touched only while holding `op`
    std::shared_ptr<const Dataset> train;  // immutable, set before the entry is published

    mutable std::mutex cache_mu;
    Json view;
    Json metrics;
    std::string snapshot;

    void refresh() {
        const Session& s = *session;
        const Dataset& train = *s.data().train;
        Json pending = nullptr;
        if (s.pending()) {
            std::vector<std::string> names;
            for (auto j : *s.pending()) names.push_back(train.feature_names[j]);
            pending = Json{{"features", names}, {"feature_ids", *s.pending()}, {"heatmap", heatmap_json(train, *s.pending())}};
        }
        Json latest = s.latest() ? iteration_json(*s.latest(), train) : Json(nullptr);
        std::vector<std::string> relevant;
        for (auto j : s.relevance().relevant_ids()) relevant.push_back(train.feature_names[j]);

        Json v{{"id", s.id()},
               {"condition", condition_code(s.condition())},
               {"seed", s.seed()},
               {"iteration", s.iteration()},
               {"max_iterations", s.config().max_iterations},
               {"batch_size", s.config().batch_size},
               {"terminal", s.terminal()},
               {"status", s.terminal() ? "terminal" : "ready"},
               {"pending_query", pending},
               {"latest", latest},
               {"mse_history", s.mse_history()}};
        Json m{{"id", s.id()},
               {"iteration", s.iteration()},
               {"mse_history", s.mse_history()},
               {"n_relevant", relevant.size()},
               {"relevant", relevant},
               {"top_relevance", latest.is_null() ? Json::array() : latest["top_relevance"]}};
        std::string snap = s.snapshot();

        std::lock_guard lock(cache_mu);
        view = std::move(v);
        metrics = std::move(m);
        snapshot = std::move(snap);
    }

    Json current_view() const {
        std::lock_guard lock(cache_mu);
        Json v = view;
        if (updating.load()) v["status"] = "updating";
        return v;
    }
};

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, const HttpError& e) {
    Json body{{"error", e.code}, {"message", e.what()}};
    if (!e.feature.empty()) body["feature"] = e.feature;
    send_json(res, e.status, body);
}

Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const Json::exception& e) {
        throw HttpError(400, "bad_json", e.what());
    }
}

} // namespace

struct Service::Impl {
    httplib::Server server;
    std::shared_mutex registry_mu;
    std::map<std::string, SessionData> datasets;
    std::string default_dataset;
    SessionConfig defaults;
    std::map<std::string, std::shared_ptr<Entry>> sessions;
    std::uint64_t next_id = 1;

    std::shared_ptr<Entry> find(const std::string& id) {
        std::shared_lock lock(registry_mu);
        const auto it = sessions.find(id);
        if (it == sessions.end()) throw HttpError(404, "unknown_session", "no session '" + id + "'");
        return it->second;
    }

    template <class F>
    void handle(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const HttpError& e) {
            send_error(res, e);
        } catch (const StateError& e) {
            send_error(res, HttpError(409, "conflict", e.what()));
        } catch (const ContractError& e) {
            send_error(res, HttpError(422, "invalid", e.what()));
        } catch (const Json::exception& e) {
            send_error(res, HttpError(422, "invalid", e.what()));
        } catch (const std::exception& e) {
            send_error(res, HttpError(500, "internal", e.what()));
        }
    }

    /// Runs `f` on the session unless another mutation holds it.
    template <class F>
    void mutate(Entry& entry, F&& f) {
        std::unique_lock lock(entry.op, std::try_to_lock);
        if (!lock.owns_lock()) throw HttpError(409, "busy", "session is processing another request");
        struct Flag {
            std::atomic<bool>& b;
            ~Flag() { b = false; }
        } flag{entry.updating};
        f();
        entry.refresh();
    }

    void create_session(const httplib::Request& req, httplib::Response& res) {
        const Json body = parse_body(req);
        SessionData data;
        SessionConfig config;
        std::string id;
        {
            std::shared_lock lock(registry_mu);
            const std::string name = body.value("dataset", default_dataset);
            const auto it = datasets.find(name);
            if (it == datasets.end()) throw HttpError(422, "unknown_dataset", "no dataset '" + name + "'");
            data = it->second;
            Json cfg = config_to_json(defaults);
            if (body.contains("config")) cfg.merge_patch(body["config"]);
            config = config_from_json(cfg);
        }
        if (!body.contains("condition")) throw HttpError(422, "invalid", "missing 'condition'");
        const Condition condition = parse_condition(body.at("condition").get<std::string>());
        const auto seed = body.value("seed", std::uint64_t{0});
        if (body.contains("id")) {
            id = body["id"].get<std::string>();
            if (id.empty() || id.find('/') != std::string::npos) throw HttpError(422, "invalid", "bad session id");
        }

        auto entry = std::make_shared<Entry>();
        entry->train = data.train;
        {
            std::unique_lock lock(registry_mu);
            if (id.empty()) {
                do id = "s" + std::to_string(next_id++);
                while (sessions.contains(id));
            }
            if (sessions.contains(id)) throw HttpError(409, "duplicate_id", "session '" + id + "' exists");
            entry->updating = true;
            entry->view = Json{{"id", id}, {"status", "updating"}};
            entry->metrics = Json{{"id", id}, {"mse_history", Json::array()}};
            sessions.emplace(id, entry);
        }
        try {
            std::lock_guard op(entry->op);
            entry->session = std::make_unique<Session>(Session::create(data, condition, config, seed, id));
            entry->refresh();
            entry->updating = false;
        } catch (...) {
            std::unique_lock lock(registry_mu);
            sessions.erase(id);
            throw;
        }
        send_json(res, 201, entry->current_view());
    }

    void feedback(Entry& entry, const httplib::Request& req, httplib::Response& res) {
        const Json body = parse_body(req);
        if (!body.is_object()) throw HttpError(422, "invalid", "feedback must map feature names to 0 or 1");
        Json result;
        mutate(entry, [&] {
            Session& s = *entry.session;
            if (!s.pending()) throw HttpError(409, "no_pending_query", "no query is pending");
            const Dataset& train = *s.data().train;
            const auto& pending = *s.pending();
            std::map<std::size_t, int> given;
            for (const auto& [name, value] : body.items()) {
                const auto j = train.feature_index(name);
                if (!j || std::find(pending.begin(), pending.end(), *j) == pending.end())
                    throw HttpError(422, "not_pending", "feature '" + name + "' is not in the pending query", name);
                int v = -1;
                if (value.is_boolean()) v = value.get<bool>() ? 1 : 0;
                else if (value.is_number_integer()) v = value.get<int>();
                if (v != 0 && v != 1) throw HttpError(422, "bad_value", "response for '" + name + "' must be 0 or 1", name);
                given[*j] = v;
            }
            std::vector<Response> responses;
            for (auto j : pending) {
                const auto it = given.find(j);
                if (it == given.end())
                    throw HttpError(422, "missing", "no response for feature '" + train.feature_names[j] + "'",
                                    train.feature_names[j]);
                responses.push_back({j, it->second});
            }
            entry.updating = true;
            result = iteration_json(s.submit_feedback(responses), train);
        });
        send_json(res, 200, result);
    }

    void install_routes() {
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, Json{{"status", "ok"}});
        });
        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { create_session(req, res); });
        });
        server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { send_json(res, 200, find(req.matches[1])->current_view()); });
        });
        server.Post(R"(/sessions/([^/]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                auto entry = find(req.matches[1]);
                mutate(*entry, [&] { entry->session->next_query(); });
                send_json(res, 200, entry->current_view());
            });
        });
        server.Post(R"(/sessions/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { feedback(*find(req.matches[1]), req, res); });
        });
        server.Get(R"(/sessions/([^/]+)/heatmap)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                auto entry = find(req.matches[1]);
                const Dataset& train = *entry->train;
                std::vector<std::size_t> ids;
                if (req.has_param("features")) {
                    const std::string list = req.get_param_value("features");
                    std::size_t start = 0;
                    while (start <= list.size()) {
                        const auto comma = std::min(list.find(',', start), list.size());
                        const std::string name = list.substr(start, comma - start);
                        if (!name.empty()) {
                            const auto j = train.feature_index(name);
                            if (!j) throw HttpError(422, "unknown_feature", "unknown feature '" + name + "'", name);
                            ids.push_back(*j);
                        }
                        start = comma + 1;
                    }
                } else {
                    const Json view = entry->current_view();
                    if (!view.contains("pending_query") || view["pending_query"].is_null())
                        throw HttpError(422, "invalid", "no features requested and no query pending");
                    ids = view["pending_query"]["feature_ids"].get<std::vector<std::size_t>>();
                }
                send_json(res, 200, heatmap_json(train, ids));
            });
        });
        server.Get(R"(/sessions/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                auto entry = find(req.matches[1]);
                std::lock_guard lock(entry->cache_mu);
                send_json(res, 200, entry->metrics);
            });
        });
        server.Get(R"(/sessions/([^/]+)/snapshot)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                auto entry = find(req.matches[1]);
                std::lock_guard lock(entry->cache_mu);
                res.status = 200;
                res.set_content(entry->snapshot, kJson);
            });
        });
    }
};

Service::Service() : impl_(std::make_unique<Impl>()) { impl_->install_routes(); }

Service::~Service() { stop(); }

void Service::register_dataset(const std::string& name, SessionData data) {
    if (!data.train || !data.test || !data.descriptors) throw ContractError("service: incomplete dataset '" + name + "'");
    std::unique_lock lock(impl_->registry_mu);
    if (impl_->datasets.empty()) impl_->default_dataset = name;
    impl_->datasets[name] = std::move(data);
}

void Service::set_default_config(const SessionConfig& config) {
    std::unique_lock lock(impl_->registry_mu);
    impl_->defaults = config;
}

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw std::runtime_error("service: cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port))
        throw std::runtime_error("service: cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

} // namespace elicit

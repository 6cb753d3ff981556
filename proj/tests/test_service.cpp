#include "elicit/service.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

using namespace elicit;
using elicit::testing::fast_config;
using elicit::testing::small_problem;
using Json = nlohmann::json;

namespace {

class Server {
public:
    Server(const SessionData& data, const SessionConfig& config) {
        service_.register_dataset("default", data);
        service_.set_default_config(config);
        port_ = service_.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { service_.run(); });
        httplib::Client probe("127.0.0.1", port_);
        for (int i = 0; i < 200; ++i) {
            if (auto res = probe.Get("/health"); res && res->status == 200) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        throw std::runtime_error("service did not come up");
    }
    ~Server() {
        service_.stop();
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60, 0);
        return c;
    }

private:
    Service service_;
    std::thread thread_;
    int port_ = 0;
};

Json post(httplib::Client& c, const std::string& path, const Json& body, int expected) {
    auto res = c.Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << " -> " << res->body;
    return Json::parse(res->body);
}

Json get(httplib::Client& c, const std::string& path, int expected = 200) {
    auto res = c.Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << " -> " << res->body;
    return Json::parse(res->body);
}

Json answers(const Json& view, const Dataset& train, const std::vector<std::uint8_t>& truth) {
    Json fb = Json::object();
    for (const auto& name : view["pending_query"]["features"])
        fb[name.get<std::string>()] = truth[*train.feature_index(name.get<std::string>())];
    return fb;
}

} // namespace

TEST(Service, HealthCreateAndLookup) {
    const auto s = small_problem(1);
    Server server(s.data, fast_config());
    auto c = server.client();
    EXPECT_EQ(get(c, "/health")["status"], "ok");

    const Json view = post(c, "/sessions", {{"condition", "c3"}, {"seed", 4}}, 201);
    EXPECT_EQ(view["condition"], "c3");
    EXPECT_EQ(view["iteration"], 0);
    EXPECT_EQ(view["status"], "ready");
    EXPECT_FALSE(view["terminal"].get<bool>());
    EXPECT_TRUE(view["pending_query"].is_null());
    EXPECT_EQ(view["mse_history"].size(), 1u);

    const std::string id = view["id"];
    EXPECT_EQ(get(c, "/sessions/" + id)["id"], id);
    EXPECT_EQ(get(c, "/sessions/nope", 404)["error"], "unknown_session");
    get(c, "/sessions/nope/metrics", 404);
    post(c, "/sessions/nope/query", Json::object(), 404);

    post(c, "/sessions", {{"dataset", "other"}, {"condition", "c2"}}, 422);
    post(c, "/sessions", {{"seed", 1}}, 422);
    post(c, "/sessions", {{"condition", "c7"}}, 422);
    post(c, "/sessions", {{"condition", "c2"}, {"id", id}}, 409);
    auto res = c.Post("/sessions", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST(Service, QueryAndFeedbackContract) {
    const auto s = small_problem(2);
    Server server(s.data, fast_config());
    auto c = server.client();
    const std::string id = post(c, "/sessions", {{"condition", "c2"}, {"seed", 1}}, 201)["id"];
    const std::string base = "/sessions/" + id;

    post(c, base + "/feedback", Json{{"kw000", 1}}, 409);  // nothing pending
    const Json view = post(c, base + "/query", Json::object(), 200);
    ASSERT_EQ(view["pending_query"]["features"].size(), 4u);
    EXPECT_EQ(view["pending_query"]["heatmap"]["cols"], view["pending_query"]["features"]);
    post(c, base + "/query", Json::object(), 409);

    Json fb = answers(view, *s.data.train, s.problem.truth);
    std::string outsider;
    for (const auto& name : s.data.train->feature_names)
        if (!fb.contains(name)) {
            outsider = name;
            break;
        }
    Json extra = fb;
    extra[outsider] = 1;
    const Json err = post(c, base + "/feedback", extra, 422);
    EXPECT_EQ(err["feature"], outsider);
    EXPECT_EQ(post(c, base + "/feedback", Json{{"no-such-feature", 0}}, 422)["feature"], "no-such-feature");

    Json missing = fb;
    const std::string dropped = missing.begin().key();
    missing.erase(dropped);
    EXPECT_EQ(post(c, base + "/feedback", missing, 422)["feature"], dropped);
    Json bad = fb;
    bad[dropped] = 3;
    EXPECT_EQ(post(c, base + "/feedback", bad, 422)["error"], "bad_value");

    const Json result = post(c, base + "/feedback", fb, 200);
    EXPECT_EQ(result["iteration"], 1);
    EXPECT_TRUE(result["mse"].is_number());
    post(c, base + "/feedback", fb, 409);

    const Json metrics = get(c, base + "/metrics");
    EXPECT_EQ(metrics["mse_history"].size(), 2u);
    EXPECT_EQ(metrics["iteration"], 1);
}

TEST(Service, NonInteractiveSessionRefusesQueries) {
    const auto s = small_problem(3);
    Server server(s.data, fast_config());
    auto c = server.client();
    const Json view = post(c, "/sessions", {{"condition", "c1"}}, 201);
    EXPECT_TRUE(view["terminal"].get<bool>());
    EXPECT_EQ(view["status"], "terminal");
    post(c, "/sessions/" + view["id"].get<std::string>() + "/query", Json::object(), 409);
}

TEST(Service, HeatmapUsesExplicitNulls) {
    const auto s = small_problem(4);
    Server server(s.data, fast_config());
    auto c = server.client();
    const std::string id = post(c, "/sessions", {{"condition", "c2"}}, 201)["id"];
    const auto& train = *s.data.train;
    // Pair a feature that has an empty category cell with two others.
    std::size_t sparse = 0;
    for (std::size_t j = 0; j < train.num_features(); ++j) {
        const std::size_t one[] = {j};
        const HeatmapData h1 = heatmap_summary(train, one);
        bool empty = false;
        for (std::size_t r = 0; r < h1.rows.size(); ++r) empty = empty || !h1.defined(r, 0);
        if (empty) {
            sparse = j;
            break;
        }
    }
    const std::size_t ids[] = {sparse, (sparse + 1) % 40, (sparse + 2) % 40};
    std::string list;
    for (auto j : ids) list += (list.empty() ? "" : ",") + train.feature_names[j];
    const Json h = get(c, "/sessions/" + id + "/heatmap?features=" + list);
    const HeatmapData ref = heatmap_summary(train, ids);
    ASSERT_EQ(h["rows"], ref.rows);
    bool saw_null = false;
    for (std::size_t r = 0; r < ref.rows.size(); ++r)
        for (std::size_t col = 0; col < 3; ++col) {
            const Json& cell = h["cell_mean"][r][col];
            if (ref.defined(r, col)) {
                EXPECT_DOUBLE_EQ(cell.get<double>(), *ref.mean(r, col));
            } else {
                EXPECT_TRUE(cell.is_null());
                saw_null = true;
            }
        }
    EXPECT_EQ(h["total_count"], ref.total_count);
    EXPECT_TRUE(saw_null);

    EXPECT_EQ(get(c, "/sessions/" + id + "/heatmap?features=zzz", 422)["feature"], "zzz");
    get(c, "/sessions/" + id + "/heatmap", 422);  // nothing requested, nothing pending
}

TEST(Service, ScriptedRunMatchesLibrary) {
    const auto s = small_problem(5);
    const SessionConfig cfg = fast_config(3, 4);
    Server server(s.data, cfg);
    auto c = server.client();
    const Json created = post(c, "/sessions", {{"condition", "c3"}, {"seed", 21}, {"id", "same"}}, 201);
    while (true) {
        const Json view = get(c, "/sessions/same");
        if (view["terminal"].get<bool>()) break;
        const Json q = post(c, "/sessions/same/query", Json::object(), 200);
        post(c, "/sessions/same/feedback", answers(q, *s.data.train, s.problem.truth), 200);
    }
    auto snap = c.Get("/sessions/same/snapshot");
    ASSERT_TRUE(snap);

    Session lib = Session::create(s.data, Condition::UserModelGuided, cfg, 21, "same");
    while (!lib.terminal()) {
        const auto q = lib.next_query();
        std::vector<Response> r;
        for (auto j : q) r.push_back({j, s.problem.truth[j]});
        lib.submit_feedback(r);
    }
    EXPECT_EQ(get(c, "/sessions/same/metrics")["mse_history"].get<std::vector<double>>(), lib.mse_history());
    EXPECT_EQ(snap->body, lib.snapshot());
}

TEST(Service, ConcurrentFeedbackIsRejectedNotQueued) {
    const auto s = small_problem(6);
    SessionConfig slow = fast_config();
    Server server(s.data, slow);
    auto c = server.client();
    // A long chain with heavy thinning keeps the refit busy for a while without storing much.
    const Json body{{"condition", "c2"},
                    {"seed", 2},
                    {"config", {{"sampler", {{"iterations", 200000}, {"burn_in", 1000}, {"thin", 100}}}}}};
    const std::string id = post(c, "/sessions", body, 201)["id"];
    const std::string base = "/sessions/" + id;
    const Json q = post(c, base + "/query", Json::object(), 200);
    const Json fb = answers(q, *s.data.train, s.problem.truth);

    int first_status = 0;
    std::thread first([&] {
        auto c1 = server.client();
        auto res = c1.Post(base + "/feedback", fb.dump(), "application/json");
        first_status = res ? res->status : -1;
    });
    bool saw_updating = false;
    for (int i = 0; i < 500 && !saw_updating; ++i) {
        saw_updating = get(c, base)["status"] == "updating";
        if (!saw_updating) std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    const Json second = post(c, base + "/feedback", fb, 409);
    first.join();
    EXPECT_TRUE(saw_updating);
    EXPECT_EQ(first_status, 200);
    const Json view = get(c, base);
    EXPECT_EQ(view["iteration"], 1);
    EXPECT_EQ(view["status"], "ready");
    EXPECT_EQ(view["mse_history"].size(), 2u);
}

#include "elicit/session.hpp"

#include "elicit/errors.hpp"
#include "elicit/rng.hpp"
#include "json_codec.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

namespace elicit {
namespace {

constexpr int kSnapshotVersion = 1;
constexpr std::size_t kTopRelevance = 10;

std::uint64_t digest(const Eigen::VectorXd& values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values(i));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void check_data(const SessionData& data) {
    if (!data.train || !data.test || !data.descriptors) throw ContractError("session: missing data");
    if (data.train->num_samples() == 0 || data.test->num_samples() == 0)
        throw ContractError("session: empty train or test set");
    const auto k = data.train->num_features();
    if (data.test->num_features() != k || data.descriptors->num_features() != k)
        throw ContractError("session: feature dimensions of train, test and descriptors differ");
    if (data.test->feature_names != data.train->feature_names)
        throw ContractError("session: train and test feature names differ");
    if (!data.descriptors->feature_names.empty() && data.descriptors->feature_names != data.train->feature_names)
        throw ContractError("session: descriptor rows do not match the dataset features");
}

std::uint64_t chain_seed(std::uint64_t seed) { return derive_seed(seed, "prediction-model"); }

Json result_to_json(const IterationResult& r) {
    Json top = Json::array();
    for (const auto& [j, v] : r.top_relevance) top.push_back(Json::array({j, v}));
    return Json{{"iteration", r.iteration},
                {"mse", r.mse},
                {"n_relevant", r.n_relevant},
                {"top_relevance", top},
                {"predictions_digest", r.predictions_digest}};
}

IterationResult result_from_json(const Json& j) {
    IterationResult r;
    r.iteration = j.at("iteration").get<int>();
    r.mse = j.at("mse").get<double>();
    r.n_relevant = j.at("n_relevant").get<std::size_t>();
    for (const auto& p : j.at("top_relevance"))
        r.top_relevance.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<double>());
    r.predictions_digest = j.at("predictions_digest").get<std::uint64_t>();
    return r;
}

} // namespace

std::string_view condition_code(Condition c) {
    switch (c) {
    case Condition::NonInteractive: return "c1";
    case Condition::RandomOrder: return "c2";
    case Condition::UserModelGuided: return "c3";
    }
    return "c1";
}

Condition parse_condition(std::string_view text) {
    if (text == "c1" || text == "NonInteractive") return Condition::NonInteractive;
    if (text == "c2" || text == "RandomOrder") return Condition::RandomOrder;
    if (text == "c3" || text == "UserModelGuided") return Condition::UserModelGuided;
    throw ContractError("unknown condition '" + std::string(text) + "'");
}

Session::Session(SessionData data, Condition condition, SessionConfig config, std::uint64_t seed, std::string id,
                 UserModel um)
    : data_(std::move(data)), condition_(condition), config_(std::move(config)), seed_(seed), id_(std::move(id)),
      user_model_(std::move(um)), relevance_(data_.train->num_features()) {}

Session Session::create(SessionData data, Condition condition, SessionConfig config, std::uint64_t seed,
                        std::string id) {
    check_data(data);
    if (config.max_iterations < 0) throw ContractError("session: max_iterations must be non-negative");
    if (config.batch_size == 0) throw ContractError("session: batch_size must be positive");

    const RelevanceVector none(data.train->num_features());
    const auto chain = sample_posterior(*data.train, none, config.sampler, chain_seed(seed));
    const double mse0 = evaluate_mse(chain, *data.test);

    UserModel um = condition == Condition::UserModelGuided
                       ? UserModel::init_with_pseudo(data.descriptors, chain.mean_w(), config.user_model)
                       : UserModel(data.descriptors, config.user_model);
    Session s(std::move(data), condition, std::move(config), seed, std::move(id), std::move(um));
    s.mse_history_.push_back(mse0);
    s.latest_ = s.summarize(chain, mse0);
    return s;
}

bool Session::terminal() const {
    if (condition_ == Condition::NonInteractive) return true;
    if (pending_) return false;
    return iteration_ >= config_.max_iterations || user_model_.num_unqueried() == 0;
}

std::vector<std::size_t> Session::next_query() {
    if (terminal()) throw StateError("session " + id_ + " is terminal");
    if (pending_) throw StateError("session " + id_ + " has an unanswered query");

    const int t = iteration_ + 1;
    std::vector<std::size_t> ids;
    if (condition_ == Condition::UserModelGuided) {
        ids = user_model_.select(user_model_.estimate(t), config_.batch_size);
    } else {
        std::vector<std::size_t> pool;
        for (std::size_t j = 0; j < user_model_.num_features(); ++j)
            if (!user_model_.is_queried(j)) pool.push_back(j);
        Rng rng = make_rng(seed_, "random-order", static_cast<std::uint64_t>(t));
        const auto take = std::min(config_.batch_size, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            const auto pick = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
            std::swap(pool[i], pool[pick]);
        }
        ids.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    user_model_.begin_query(ids);
    pending_ = ids;
    return ids;
}

IterationResult Session::submit_feedback(std::span<const Response> responses) {
    if (condition_ == Condition::NonInteractive || !pending_)
        throw StateError("session " + id_ + " has no pending query");

    const std::set<std::size_t> asked(pending_->begin(), pending_->end());
    std::set<std::size_t> answered;
    for (const auto& r : responses) {
        if (!asked.contains(r.feature))
            throw ContractError("response for feature " + std::to_string(r.feature) + " which is not pending");
        if (!answered.insert(r.feature).second)
            throw ContractError("duplicate response for feature " + std::to_string(r.feature));
        if (r.relevant != 0 && r.relevant != 1) throw ContractError("responses must be 0 or 1");
    }
    if (answered.size() != asked.size()) throw ContractError("responses do not cover the pending query");

    const int t = iteration_ + 1;
    RelevanceVector updated = relevance_;
    for (const auto& r : responses)
        if (r.relevant == 1) updated.set(r.feature);
    const auto chain = sample_posterior(*data_.train, updated, config_.sampler, chain_seed(seed_));
    const double mse = evaluate_mse(chain, *data_.test);

    std::vector<FeedbackEntry> entries;
    entries.reserve(responses.size());
    for (const auto& r : responses) entries.push_back({r.feature, r.relevant, t});
    user_model_.record(entries);
    relevance_ = std::move(updated);
    transcript_.emplace_back(*pending_, std::vector<Response>(responses.begin(), responses.end()));
    pending_.reset();
    iteration_ = t;
    mse_history_.push_back(mse);
    latest_ = summarize(chain, mse);
    return *latest_;
}

IterationResult Session::summarize(const PosteriorChain& chain, double mse) const {
    IterationResult r;
    r.iteration = iteration_;
    r.mse = mse;
    r.n_relevant = relevance_.n_plus();
    r.predictions_digest = digest(predict_all(chain, *data_.test));
    const auto est = user_model_.estimate(std::max(1, iteration_));
    std::vector<std::size_t> order(static_cast<std::size_t>(est.r_hat_unit.size()));
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    const auto take = std::min(kTopRelevance, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double ua = est.r_hat_unit(static_cast<Eigen::Index>(a));
                          const double ub = est.r_hat_unit(static_cast<Eigen::Index>(b));
                          return ua != ub ? ua > ub : a < b;
                      });
    for (std::size_t i = 0; i < take; ++i)
        r.top_relevance.emplace_back(order[i], est.r_hat_unit(static_cast<Eigen::Index>(order[i])));
    return r;
}

std::string Session::snapshot() const {
    Json transcript = Json::array();
    for (const auto& [query, responses] : transcript_) {
        Json resp = Json::array();
        for (const auto& r : responses) resp.push_back(Json::array({r.feature, r.relevant}));
        transcript.push_back(Json{{"query", query}, {"responses", resp}});
    }
    Json config{{"max_iterations", config_.max_iterations},
                {"batch_size", config_.batch_size},
                {"user_model", config_.user_model},
                {"sampler", config_.sampler}};
    Json j{{"format", "elicit-session"},
           {"version", kSnapshotVersion},
           {"id", id_},
           {"condition", condition_code(condition_)},
           {"seed", seed_},
           {"config", config},
           {"dimensions",
            {{"features", data_.train->num_features()},
             {"train", data_.train->num_samples()},
             {"test", data_.test->num_samples()}}},
           {"iteration", iteration_},
           {"mse_history", mse_history_},
           {"relevant", relevance_.relevant_ids()},
           {"pending", pending_ ? Json(*pending_) : Json(nullptr)},
           {"user_model", Json::parse(user_model_.snapshot())},
           {"transcript", transcript},
           {"latest", latest_ ? result_to_json(*latest_) : Json(nullptr)}};
    return j.dump();
}

Session Session::restore(std::string_view record, SessionData data) {
    const Json j = parse_record(record, "session");
    check_header(j, "elicit-session", kSnapshotVersion);
    check_data(data);
    try {
        const auto& dims = j.at("dimensions");
        if (dims.at("features").get<std::size_t>() != data.train->num_features() ||
            dims.at("train").get<std::size_t>() != data.train->num_samples() ||
            dims.at("test").get<std::size_t>() != data.test->num_samples())
            throw FormatError("session: record does not match the supplied data");

        SessionConfig config;
        const auto& cj = j.at("config");
        config.max_iterations = cj.at("max_iterations").get<int>();
        config.batch_size = cj.at("batch_size").get<std::size_t>();
        config.user_model = cj.at("user_model").get<UserModelParams>();
        config.sampler = cj.at("sampler").get<SamplerConfig>();

        UserModel um = UserModel::restore(j.at("user_model").dump(), data.descriptors);
        Session s(std::move(data), parse_condition(j.at("condition").get<std::string>()), std::move(config),
                  j.at("seed").get<std::uint64_t>(), j.at("id").get<std::string>(), std::move(um));
        s.iteration_ = j.at("iteration").get<int>();
        s.mse_history_ = j.at("mse_history").get<std::vector<double>>();
        for (auto r : j.at("relevant").get<std::vector<std::size_t>>()) s.relevance_.set(r);
        if (!j.at("pending").is_null()) s.pending_ = j.at("pending").get<std::vector<std::size_t>>();
        for (const auto& item : j.at("transcript")) {
            std::vector<Response> responses;
            for (const auto& r : item.at("responses"))
                responses.push_back({r.at(0).get<std::size_t>(), r.at(1).get<int>()});
            s.transcript_.emplace_back(item.at("query").get<std::vector<std::size_t>>(), std::move(responses));
        }
        if (!j.at("latest").is_null()) s.latest_ = result_from_json(j.at("latest"));

        if (s.mse_history_.size() != static_cast<std::size_t>(s.iteration_) + 1 ||
            s.transcript_.size() != static_cast<std::size_t>(s.iteration_))
            throw FormatError("session: history length does not match the iteration counter");
        RelevanceVector from_log(s.relevance_.size());
        for (const auto& f : s.user_model_.feedback())
            if (f.response == 1) from_log.set(f.feature);
        if (!(from_log == s.relevance_)) throw FormatError("session: relevance vector disagrees with the feedback log");
        std::vector<std::size_t> pend = s.pending_.value_or(std::vector<std::size_t>{});
        std::sort(pend.begin(), pend.end());
        if (pend != s.user_model_.pending()) throw FormatError("session: pending query disagrees with the user model");
        return s;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("session: corrupt record (") + e.what() + ")");
    } catch (const ContractError& e) {
        throw FormatError(std::string("session: inconsistent record (") + e.what() + ")");
    } catch (const std::out_of_range& e) {
        throw FormatError(std::string("session: inconsistent record (") + e.what() + ")");
    }
}

} // namespace elicit

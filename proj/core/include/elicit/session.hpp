#pragma once

#include "elicit/dataset.hpp"
#include "elicit/descriptors.hpp"
#include "elicit/prediction.hpp"
#include "elicit/usermodel.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace elicit {

/// C1 / C2 / C3 of the elicitation study.
enum class Condition { NonInteractive, RandomOrder, UserModelGuided };

/// "c1", "c2", "c3".
std::string_view condition_code(Condition c);
/// Accepts the short codes and the enumerator names; throws ContractError otherwise.
Condition parse_condition(std::string_view text);

struct SessionConfig {
    int max_iterations = 20;
    std::size_t batch_size = 10;
    UserModelParams user_model;
    SamplerConfig sampler;
};

/// Immutable inputs shared by any number of sessions.
struct SessionData {
    std::shared_ptr<const Dataset> train;
    std::shared_ptr<const Dataset> test;
    std::shared_ptr<const DescriptorMatrix> descriptors;
};

struct Response {
    std::size_t feature = 0;
    int relevant = 0;  ///< 0 or 1
};

struct IterationResult {
    int iteration = 0;
    double mse = 0.0;
    std::size_t n_relevant = 0;
    /// Up to ten features with the highest estimated relevance (logistic scale), descending.
    std::vector<std::pair<std::size_t, double>> top_relevance;
    std::uint64_t predictions_digest = 0;
};

/** One elicitation run: fit, ask, update, repeat.
 *
 * The prediction model is refitted from scratch after every round of feedback with the same
 * per-session chain seed, so identical relevance vectors give identical chains. Only positive
 * responses change the prediction model; every response updates the user model.
 */
class Session {
public:
    /// Fits the model with no relevant features and records mse_history[0].
    static Session create(SessionData data, Condition condition, SessionConfig config,
                          std::uint64_t seed, std::string id = "session");

    /// Issues the next batch. Throws StateError when terminal or a query is pending.
    std::vector<std::size_t> next_query();

    /** Applies responses to the pending query and refits.
     *
     * Throws StateError without a pending query and ContractError when `responses` does not
     * cover the pending ids exactly once each with binary values.
     */
    IterationResult submit_feedback(std::span<const Response> responses);

    const std::string& id() const { return id_; }
    Condition condition() const { return condition_; }
    std::uint64_t seed() const { return seed_; }
    const SessionConfig& config() const { return config_; }
    const SessionData& data() const { return data_; }
    int iteration() const { return iteration_; }
    bool terminal() const;
    const std::optional<std::vector<std::size_t>>& pending() const { return pending_; }
    const std::vector<double>& mse_history() const { return mse_history_; }
    const RelevanceVector& relevance() const { return relevance_; }
    const UserModel& user_model() const { return user_model_; }
    const std::optional<IterationResult>& latest() const { return latest_; }
    const std::vector<std::pair<std::vector<std::size_t>, std::vector<Response>>>& transcript() const {
        return transcript_;
    }

    /// Versioned JSON record: config, seeds, transcript, model state and metric history.
    std::string snapshot() const;
    /// Rebuilds a session from `record` over the same data without refitting. Throws
    /// FormatError for corrupt, truncated or version-mismatched records.
    static Session restore(std::string_view record, SessionData data);

private:
    Session(SessionData data, Condition condition, SessionConfig config, std::uint64_t seed, std::string id,
            UserModel um);

    IterationResult summarize(const PosteriorChain& chain, double mse) const;

    SessionData data_;
    Condition condition_;
    SessionConfig config_;
    std::uint64_t seed_;
    std::string id_;
    UserModel user_model_;
    RelevanceVector relevance_;
    int iteration_ = 0;
    std::optional<std::vector<std::size_t>> pending_;
    std::vector<double> mse_history_;
    std::optional<IterationResult> latest_;
    std::vector<std::pair<std::vector<std::size_t>, std::vector<Response>>> transcript_;
};

} // namespace elicit

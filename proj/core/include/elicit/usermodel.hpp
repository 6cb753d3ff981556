#pragma once

#include "elicit/descriptors.hpp"

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace elicit {

/// Bandit hyperparameters.
struct UserModelParams {
    double b = 0.5;        ///< default relevance, in (0,1)
    double lambda = 1e-3;  ///< ridge regularizer, > 0
    double alpha = 0.5;    ///< exploration weight, >= 0
    double delta = 0.05;   ///< failure probability, in (0,1)
    double beta = 0.01;    ///< pseudo-input strength, >= 0

    void validate() const;
};

struct FeedbackEntry {
    std::size_t feature = 0;
    int response = 0;   ///< 0 or 1
    int iteration = 0;
};

struct RelevanceEstimate {
    Eigen::VectorXd v_hat;       ///< descriptor-space coefficients
    Eigen::VectorXd r_hat;       ///< linear-scale relevance
    Eigen::VectorXd r_hat_unit;  ///< logistic map of r_hat, centred so zero signal maps to b
    Eigen::VectorXd c;           ///< confidence widths
    Eigen::VectorXd ucb;         ///< r_hat + c
    double rho = 0.0;
};

/// Standard logistic function.
double logistic(double x);

/// Width multiplier sqrt(alpha ln(2 t K / delta)); t >= 1.
double exploration_rho(double alpha, int t, std::size_t num_features, double delta);

/** Linear UCB model of which features an expert will call relevant.
 *
 * Relevance is modelled as r_j = Z_j v + b and v is the ridge solution over the feedback so far
 * plus a beta-weighted pseudo-feedback r0 on every feature:
 *
 *     v = (Z_t' Z_t + beta Z' Z + lambda I)^{-1} (Z_t' (r_t - b) + beta Z' (r0 - b))
 *
 * The same Gram matrix defines the confidence widths. A feature is "queried" from the moment it
 * is handed out by begin_query(); it is never offered again.
 */
class UserModel {
public:
    /// No pseudo-input: r0 is b everywhere.
    UserModel(std::shared_ptr<const DescriptorMatrix> descriptors, UserModelParams params);

    /// Pseudo-input from prediction weights: r0_j = b + 0.5 w_j / max|w| (r0 = b if w = 0).
    static UserModel init_with_pseudo(std::shared_ptr<const DescriptorMatrix> descriptors,
                                      const Eigen::VectorXd& w_hat, UserModelParams params);

    /// Throws ContractError for t < 1.
    RelevanceEstimate estimate(int t) const;

    /// The n unqueried features with the largest UCB, ties to the lower id. Fewer than n only
    /// when the unqueried pool runs out.
    std::vector<std::size_t> select(const RelevanceEstimate& estimate, std::size_t n) const;

    /// Marks `ids` as shown and awaiting responses. Throws ContractError for repeats.
    void begin_query(std::span<const std::size_t> ids);

    /// Appends feedback for pending features. Throws ContractError for a feature that is not
    /// pending (never queried, or already answered) or a non-binary response.
    void record(std::span<const FeedbackEntry> responses);

    std::size_t num_features() const { return static_cast<std::size_t>(descriptors_->Z.rows()); }
    std::size_t num_unqueried() const;
    bool is_queried(std::size_t j) const { return queried_.at(j) != 0; }
    std::vector<std::size_t> pending() const;

    const UserModelParams& params() const { return params_; }
    const Eigen::VectorXd& r0() const { return r0_; }
    const std::vector<FeedbackEntry>& feedback() const { return feedback_; }
    const DescriptorMatrix& descriptors() const { return *descriptors_; }

    /// JSON record of hyperparameters, r0, feedback log and pending ids.
    std::string snapshot() const;
    /// Rebuilds by replaying the recorded log. Throws FormatError on a corrupt record.
    static UserModel restore(std::string_view record, std::shared_ptr<const DescriptorMatrix> descriptors);

private:
    std::shared_ptr<const DescriptorMatrix> descriptors_;
    UserModelParams params_;
    Eigen::VectorXd r0_;
    std::vector<FeedbackEntry> feedback_;
    std::vector<std::uint8_t> queried_;  ///< 1 = answered, 2 = pending
};

} // namespace elicit

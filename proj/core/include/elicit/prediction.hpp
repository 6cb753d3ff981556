#pragma once

#include "elicit/dataset.hpp"

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace elicit {

/// Expert-declared relevance per feature; r_j = 1 switches feature j to a half-normal prior.
class RelevanceVector {
public:
    RelevanceVector() = default;
    explicit RelevanceVector(std::size_t k) : flags_(k, 0) {}

    std::size_t size() const { return flags_.size(); }
    bool operator[](std::size_t j) const { return flags_[j] != 0; }
    void set(std::size_t j, bool relevant = true) { flags_.at(j) = relevant ? 1 : 0; }

    std::size_t n_plus() const;
    std::size_t n_minus() const { return size() - n_plus(); }
    std::vector<std::size_t> relevant_ids() const;

    bool operator==(const RelevanceVector&) const = default;

private:
    std::vector<std::uint8_t> flags_;
};

/// One state of the model: weights w, variance ratio a > 1, explained-variance share xi in
/// (0,1) and noise sd sigma > 0.
struct ModelParams {
    Eigen::VectorXd w;
    double a = 6.0;
    double xi = 0.1;
    double sigma = 1.0;
};

struct SamplerConfig {
    int iterations = 4000;  ///< total, including burn-in
    int burn_in = 2000;
    int thin = 1;
    int adapt_interval = 50;
    /// Conditioning: a pinned parameter is held at the given value and never updated.
    std::optional<double> fixed_a;
    std::optional<double> fixed_xi;
    std::optional<double> fixed_sigma;
};

struct SamplerDiagnostics {
    double accept_w = 0.0;
    double accept_a = 0.0;
    double accept_xi = 0.0;
    double accept_sigma = 0.0;
};

struct PosteriorChain {
    std::vector<ModelParams> samples;  ///< retained draws only
    int burn_in = 0;
    std::uint64_t seed = 0;
    SamplerConfig config;
    SamplerDiagnostics diagnostics;

    std::size_t num_features() const;
    Eigen::VectorXd mean_w() const;
};

/// Prior variance of non-relevant weights implied by xi: xi / (n_minus + a n_plus).
double sigma0_sq(double xi, double a, std::size_t n_minus, std::size_t n_plus);

/** Log unnormalized posterior density.
 *
 * Gaussian likelihood y ~ N(Xw, sigma^2); w_j ~ N(0, s0) for r_j = 0 and half-N(0, a s0) for
 * r_j = 1 with s0 = sigma0_sq(xi, a, ...); a ~ 1 + half-N(0, 12.5 pi); xi ~ Beta(1, 9);
 * sigma ~ half-N(0, 1). Returns -inf outside the support. Normalizing constants of each factor are
 * included so the value is a proper log joint density.
 */
double log_posterior(const ModelParams& params, const Dataset& train, const RelevanceVector& r);

/** Adaptive random-walk Metropolis-within-Gibbs.
 *
 * Each iteration updates every w_j with its own Gaussian proposal, then a, xi and sigma on
 * unconstrained scales. a and xi additionally get a joint move that rescales w together with the
 * prior variance. Proposal scales adapt during burn-in only. Proposals outside the support are
 * rejected. `train` may have zero rows (prior sampling).
 */
PosteriorChain sample_posterior(const Dataset& train, const RelevanceVector& r,
                                const SamplerConfig& config, std::uint64_t seed);

/// x^T E[w] with E[w] the mean over retained draws.
double predict(const PosteriorChain& chain, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_all(const PosteriorChain& chain, const Dataset& data);

double evaluate_mse(const PosteriorChain& chain, const Dataset& test);

/// (X^T X + (sigma^2 / sigma0^2) I)^{-1} X^T y by a dense Cholesky solve.
Eigen::VectorXd ridge_oracle(const Dataset& train, double sigma0_sq, double sigma_sq);

} // namespace elicit

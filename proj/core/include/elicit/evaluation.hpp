#pragma once

#include "elicit/dataset.hpp"
#include "elicit/descriptors.hpp"
#include "elicit/session.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace elicit {

/// Simulated expert: answers "relevant" for truly relevant features, each answer flipped with
/// probability noise_eps. Flips depend only on (seed, feature), so replays are exact.
struct OracleExpert {
    std::vector<std::uint8_t> true_relevance;
    double noise_eps = 0.0;

    int respond(std::size_t feature, std::uint64_t seed) const;
    std::vector<Response> answer(std::span<const std::size_t> query, std::uint64_t seed) const;
};

struct RunResult {
    Condition condition = Condition::NonInteractive;
    std::uint64_t seed = 0;
    std::vector<double> mse_curve;
};

struct PermutationTestResult {
    double observed_stat = 0.0;
    double p_value = 1.0;
    std::size_t n_permutations = 0;
};

struct WilcoxonResult {
    double w_plus = 0.0;   ///< sum of ranks of positive differences x - y
    double z = 0.0;
    double p_value = 1.0;  ///< two-sided, normal approximation with tie correction
    std::size_t n_nonzero = 0;
};

/// Synthetic small-n-large-p keyword data with a known relevant set.
struct SyntheticProblem {
    Dataset data;                       ///< raw, unsplit
    SplitResult split;                  ///< even split, standardized on train
    std::vector<std::uint8_t> truth;    ///< 1 for relevant features
    Eigen::VectorXd true_weights;       ///< on the raw target scale
};

/** Draws a sparse binary design (density 0.1) and y = X w* + noise.
 *
 * Relevant features get w*_j = effect_size, the rest small N(0, (0.05 effect_size)^2) weights;
 * unit noise. Throws ContractError for n_relevant > K, N < 4, or an all-zero design.
 */
SyntheticProblem generate_synthetic(std::size_t num_features, std::size_t num_samples, std::size_t n_relevant,
                                    double effect_size, std::uint64_t seed);

/** Auxiliary corpus whose topic structure is informative about relevance.
 *
 * Features are spread over latent topics; relevant features concentrate in a few of them, which
 * hold few irrelevant features. Each
 * document draws most keywords from one topic, the rest from the whole vocabulary, plus
 * corpus-only keywords. Some documents contain only corpus-only keywords.
 */
AuxCorpus generate_aux_corpus(std::span<const std::string> feature_names, std::span<const std::uint8_t> truth,
                              std::size_t n_docs, std::uint64_t seed);

/// Builds descriptors for `feature_names` from an auxiliary corpus: filter, cluster, tf-idf.
DescriptorMatrix build_descriptors(const AuxCorpus& aux, std::span<const std::string> feature_names,
                                   std::size_t n_clusters, std::size_t train_sample_size, std::uint64_t seed);

/// Drives a full session with oracle answers and returns its MSE curve.
RunResult simulate_run(Condition condition, const OracleExpert& oracle, const SessionData& data,
                       const SessionConfig& config, std::uint64_t seed);

/// max_t |a_t - b_t|; throws ContractError on a length mismatch.
double max_distance_statistic(std::span<const double> curve_a, std::span<const double> curve_b);

/// Pointwise mean; throws ContractError for an empty group or unequal lengths.
std::vector<double> average_curve(std::span<const RunResult> runs);

/** Run-level permutation test on the max distance between group-average curves.
 *
 * p = (1 + #{permuted >= observed}) / (1 + n_perm). Runs are pooled in a canonical order and the
 * smaller group takes the first slots of each permutation, so p(A,B) = p(B,A).
 */
PermutationTestResult permutation_test(std::span<const RunResult> group_a, std::span<const RunResult> group_b,
                                       std::size_t n_perm, std::uint64_t seed);

/// Paired signed-rank test of x against y (zero differences dropped).
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

/// Trapezoidal area under an MSE curve indexed by iteration.
double curve_area(std::span<const double> curve);

/// CSV with header `condition,seed,t,mse`; values printed to round-trip exactly.
void write_results_table(std::ostream& out, std::span<const RunResult> runs);
/// Inverse of write_results_table; groups rows by (condition, seed) in order of appearance.
std::vector<RunResult> read_results_table(std::istream& in);
/// JSON summary: per-condition average curves and initial-vs-final signed-rank test.
void write_summary(std::ostream& out, std::span<const RunResult> runs);

} // namespace elicit

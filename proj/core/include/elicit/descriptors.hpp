#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace elicit {

/// Auxiliary documents given as keyword lists (repeats count as multiplicity).
struct AuxCorpus {
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> vocabulary;  ///< union of docs, first-appearance order

    /// Builds the vocabulary; throws ContractError on an empty document.
    static AuxCorpus from_documents(std::vector<std::vector<std::string>> docs);
};

struct ClusterModel {
    std::size_t n_clusters = 0;
    std::vector<std::size_t> assignment;      ///< cluster id per corpus document
    std::vector<std::size_t> training_docs;   ///< documents clustered hierarchically, ascending
    Eigen::MatrixXd centroids;                ///< n_clusters x |vocabulary|, mean raw multiplicities
};

/// Per-feature auxiliary descriptors; row j of Z describes feature_names[j].
struct DescriptorMatrix {
    std::vector<std::string> feature_names;
    Eigen::MatrixXd Z;

    std::size_t num_features() const { return static_cast<std::size_t>(Z.rows()); }
    std::size_t num_columns() const { return static_cast<std::size_t>(Z.cols()); }
};

/// Keeps the documents sharing at least one keyword with `prediction_features`.
/// Throws ContractError when nothing survives.
AuxCorpus filter_corpus(const AuxCorpus& aux, std::span<const std::string> prediction_features);

/** Average-linkage agglomerative clustering under cosine distance.
 *
 * A seeded sample of `train_sample_size` documents is clustered hierarchically and the tree is
 * cut at `n_clusters`; every other document joins the nearest centroid (cosine distance, ties to
 * the lower cluster id). Cluster ids are numbered by the first training document they contain.
 */
ClusterModel cluster_documents(const AuxCorpus& aux, std::size_t n_clusters,
                               std::size_t train_sample_size, std::uint64_t seed);

/** Cluster-wise tf times document-wise idf.
 *
 * z(j,c) = occ(j,c) / occ(c) * ln(D / df(j)). Features that never occur in the corpus get a zero
 * row.
 */
DescriptorMatrix build_tfidf(const AuxCorpus& aux, const ClusterModel& model,
                             std::span<const std::string> feature_names);

} // namespace elicit

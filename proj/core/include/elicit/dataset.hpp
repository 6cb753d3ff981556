#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elicit {

/// One ingested document: its keyword list, a real-valued target and a category label.
struct DocumentRecord {
    std::string id;
    std::vector<std::string> keywords;
    double target = 0.0;
    std::string category;
};

/** Samples by binary keyword-presence features.
 *
 * `X(i, j)` is 1 when sample `i` contains keyword `feature_names[j]`, 0 otherwise. There is no
 * intercept column: targets are standardized on the training split, which makes the intercept
 * zero in expectation.
 */
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::string> ids;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> categories;

    std::size_t num_samples() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t num_features() const { return feature_names.size(); }

    std::optional<std::size_t> feature_index(const std::string& name) const;

    /// Throws ContractError unless shapes agree, X is binary, names are unique and y is finite.
    void validate() const;
};

struct SplitSpec {
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
};

/// Affine map used to z-score targets; fitted on training targets only.
struct Standardization {
    double mean = 0.0;
    double sd = 1.0;

    double apply(double raw) const { return (raw - mean) / sd; }
    double invert(double z) const { return z * sd + mean; }
};

struct SplitResult {
    Dataset train;
    Dataset test;
    Standardization scaling;
    std::vector<std::size_t> train_rows;  ///< row indices into the source dataset, ascending
    std::vector<std::size_t> test_rows;
};

/// Category-by-feature mean target over the training set, backing the elicitation heatmap.
struct HeatmapData {
    std::vector<std::string> rows;           ///< category labels, sorted
    std::vector<std::string> cols;           ///< feature names, in request order
    std::vector<std::size_t> feature_ids;
    Eigen::MatrixXd cell_mean;               ///< NaN where the cell has no support
    Eigen::MatrixXi cell_count;              ///< support of each cell
    std::vector<int> total_count;            ///< per column: training samples containing the feature

    bool defined(std::size_t row, std::size_t col) const {
        return cell_count(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) > 0;
    }
    std::optional<double> mean(std::size_t row, std::size_t col) const;
};

/// Builds the presence matrix. Feature order is first appearance across records.
/// Throws ContractError on duplicate ids, non-finite targets, or an empty keyword universe.
Dataset ingest(std::span<const DocumentRecord> records);

/** Deterministic train/test partition for `(dataset, spec)`.
 *
 * Targets of both parts are z-scored with the training mean and (population) standard
 * deviation. Throws ContractError when either part would be empty or the training targets
 * are constant.
 */
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

/// Throws ContractError on an unknown feature id.
HeatmapData heatmap_summary(const Dataset& train, std::span<const std::size_t> feature_ids);

/// Rows of `source` selected by `rows`, in the given order. Targets are copied unchanged.
Dataset subset_rows(const Dataset& source, std::span<const std::size_t> rows);

} // namespace elicit

#include "elicit/dataset.hpp"

#include "elicit/errors.hpp"
#include "elicit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace elicit {

std::optional<std::size_t> Dataset::feature_index(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - feature_names.begin());
}

void Dataset::validate() const {
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (X.cols() != static_cast<Eigen::Index>(feature_names.size()))
        throw ContractError("dataset: X has " + std::to_string(X.cols()) + " columns but " +
                            std::to_string(feature_names.size()) + " feature names");
    if (X.rows() != n || y.size() != n || static_cast<Eigen::Index>(categories.size()) != n)
        throw ContractError("dataset: inconsistent sample counts");
    std::unordered_set<std::string> seen;
    for (const auto& name : feature_names)
        if (!seen.insert(name).second) throw ContractError("dataset: duplicate feature name '" + name + "'");
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        const double v = X.data()[i];
        if (v != 0.0 && v != 1.0) throw ContractError("dataset: X entries must be 0 or 1");
    }
    if (!y.allFinite()) throw ContractError("dataset: non-finite target");
}

std::optional<double> HeatmapData::mean(std::size_t row, std::size_t col) const {
    if (!defined(row, col)) return std::nullopt;
    return cell_mean(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

Dataset ingest(std::span<const DocumentRecord> records) {
    Dataset out;
    std::unordered_map<std::string, std::size_t> column;
    std::unordered_set<std::string> ids;
    for (const auto& rec : records) {
        if (!ids.insert(rec.id).second) throw ContractError("ingest: duplicate record id '" + rec.id + "'");
        if (!std::isfinite(rec.target)) throw ContractError("ingest: non-finite target in record '" + rec.id + "'");
        for (const auto& kw : rec.keywords) {
            if (column.emplace(kw, out.feature_names.size()).second) out.feature_names.push_back(kw);
        }
    }
    if (out.feature_names.empty()) throw ContractError("ingest: empty keyword universe");

    const auto n = static_cast<Eigen::Index>(records.size());
    out.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(out.feature_names.size()));
    out.y.resize(n);
    out.ids.reserve(records.size());
    out.categories.reserve(records.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& rec = records[static_cast<std::size_t>(i)];
        for (const auto& kw : rec.keywords) out.X(i, static_cast<Eigen::Index>(column.at(kw))) = 1.0;
        out.y(i) = rec.target;
        out.ids.push_back(rec.id);
        out.categories.push_back(rec.category);
    }
    return out;
}

Dataset subset_rows(const Dataset& source, std::span<const std::size_t> rows) {
    Dataset out;
    out.feature_names = source.feature_names;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.X.resize(n, source.X.cols());
    out.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        if (r >= source.num_samples()) throw ContractError("subset_rows: row index out of range");
        out.X.row(i) = source.X.row(static_cast<Eigen::Index>(r));
        out.y(i) = source.y(static_cast<Eigen::Index>(r));
        out.ids.push_back(source.ids[r]);
        out.categories.push_back(source.categories[r]);
    }
    return out;
}

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ContractError("split: train_fraction must lie in (0,1)");
    const std::size_t n = dataset.num_samples();
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) throw ContractError("split: fraction yields an empty partition");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(spec.seed, "split");
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i + 1));
        std::swap(order[i], order[j]);
    }

    SplitResult out;
    out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());
    out.train = subset_rows(dataset, out.train_rows);
    out.test = subset_rows(dataset, out.test_rows);

    const double mean = out.train.y.mean();
    const double var = (out.train.y.array() - mean).square().mean();
    if (!(var > 0.0)) throw ContractError("split: training targets are constant");
    out.scaling = Standardization{mean, std::sqrt(var)};
    for (auto* part : {&out.train, &out.test})
        part->y = part->y.unaryExpr([&](double v) { return out.scaling.apply(v); });
    return out;
}

HeatmapData heatmap_summary(const Dataset& train, std::span<const std::size_t> feature_ids) {
    const std::size_t k = train.num_features();
    for (auto j : feature_ids)
        if (j >= k) throw ContractError("heatmap_summary: unknown feature id " + std::to_string(j));

    HeatmapData out;
    std::set<std::string> cats(train.categories.begin(), train.categories.end());
    out.rows.assign(cats.begin(), cats.end());
    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t c = 0; c < out.rows.size(); ++c) row_of[out.rows[c]] = static_cast<Eigen::Index>(c);

    const auto n_rows = static_cast<Eigen::Index>(out.rows.size());
    const auto n_cols = static_cast<Eigen::Index>(feature_ids.size());
    out.feature_ids.assign(feature_ids.begin(), feature_ids.end());
    for (auto j : feature_ids) out.cols.push_back(train.feature_names[j]);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_rows, n_cols);
    out.cell_count = Eigen::MatrixXi::Zero(n_rows, n_cols);
    out.total_count.assign(feature_ids.size(), 0);

    for (std::size_t i = 0; i < train.num_samples(); ++i) {
        const Eigen::Index r = row_of.at(train.categories[i]);
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            if (train.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(feature_ids[c])) == 0.0) continue;
            sums(r, c) += train.y(static_cast<Eigen::Index>(i));
            out.cell_count(r, c) += 1;
            out.total_count[static_cast<std::size_t>(c)] += 1;
        }
    }
    out.cell_mean.resize(n_rows, n_cols);
    for (Eigen::Index r = 0; r < n_rows; ++r)
        for (Eigen::Index c = 0; c < n_cols; ++c)
            out.cell_mean(r, c) = out.cell_count(r, c) > 0 ? sums(r, c) / out.cell_count(r, c)
                                                          : std::numeric_limits<double>::quiet_NaN();
    return out;
}

} // namespace elicit

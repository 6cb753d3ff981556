#pragma once

#include "elicit/evaluation.hpp"

#include <memory>
#include <vector>

namespace elicit::testing {

inline Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<double> y,
                            std::vector<std::string> categories = {}) {
    Dataset d;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto k = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
    d.X.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) d.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    d.y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
    for (Eigen::Index j = 0; j < k; ++j) d.feature_names.push_back("f" + std::to_string(j));
    for (Eigen::Index i = 0; i < n; ++i) d.ids.push_back("r" + std::to_string(i));
    d.categories = categories.empty() ? std::vector<std::string>(rows.size(), "all") : std::move(categories);
    return d;
}

struct SmallProblem {
    SyntheticProblem problem;
    SessionData data;
};

/// A small synthetic instance with informative descriptors; fast enough for unit tests.
inline SmallProblem small_problem(std::uint64_t seed, std::size_t k = 40, std::size_t n = 40,
                                  std::size_t relevant = 5) {
    SmallProblem s{generate_synthetic(k, n, relevant, 1.0, seed), {}};
    const AuxCorpus aux = generate_aux_corpus(s.problem.data.feature_names, s.problem.truth, 300, seed);
    auto z = std::make_shared<const DescriptorMatrix>(
        build_descriptors(aux, s.problem.data.feature_names, 5, 200, seed));
    s.data = SessionData{std::make_shared<const Dataset>(s.problem.split.train),
                         std::make_shared<const Dataset>(s.problem.split.test), std::move(z)};
    return s;
}

inline SessionConfig fast_config(int max_iterations = 3, std::size_t batch = 4) {
    SessionConfig c;
    c.max_iterations = max_iterations;
    c.batch_size = batch;
    c.sampler.iterations = 400;
    c.sampler.burn_in = 200;
    return c;
}

} // namespace elicit::testing

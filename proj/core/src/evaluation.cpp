#include "elicit/evaluation.hpp"

#include "elicit/errors.hpp"
#include "elicit/rng.hpp"
#include "json_codec.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace elicit {
namespace {

constexpr std::size_t kAuxTopics = 20;
constexpr std::size_t kRelevantTopics = 2;
constexpr std::size_t kTopicOnlyKeywords = 15;
constexpr std::size_t kNoiseKeywords = 200;
constexpr double kDesignDensity = 0.1;
// Share of irrelevant features kept out of the relevant topics.
constexpr double kTopicPurity = 0.9;

std::string numbered(const char* prefix, std::size_t i, int width) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
    return buf;
}

void check_curves(std::span<const RunResult> runs, std::size_t& length) {
    for (const auto& r : runs) {
        if (length == 0) length = r.mse_curve.size();
        if (r.mse_curve.size() != length || length == 0)
            throw ContractError("curves must be nonempty and of equal length");
    }
}

} // namespace

int OracleExpert::respond(std::size_t feature, std::uint64_t seed) const {
    if (feature >= true_relevance.size()) throw ContractError("oracle: feature id out of range");
    int answer = true_relevance[feature] ? 1 : 0;
    if (noise_eps > 0.0) {
        Rng rng = make_rng(seed, "oracle-flip", feature);
        if (uniform01(rng) < noise_eps) answer = 1 - answer;
    }
    return answer;
}

std::vector<Response> OracleExpert::answer(std::span<const std::size_t> query, std::uint64_t seed) const {
    std::vector<Response> out;
    out.reserve(query.size());
    for (auto j : query) out.push_back({j, respond(j, seed)});
    return out;
}

SyntheticProblem generate_synthetic(std::size_t num_features, std::size_t num_samples, std::size_t n_relevant,
                                    double effect_size, std::uint64_t seed) {
    if (num_features == 0) throw ContractError("generate_synthetic: K must be positive");
    if (n_relevant > num_features) throw ContractError("generate_synthetic: n_relevant exceeds K");
    if (num_samples < 4) throw ContractError("generate_synthetic: need at least 4 samples");
    if (!(effect_size > 0.0)) throw ContractError("generate_synthetic: effect_size must be positive");

    Rng rng = make_rng(seed, "synthetic");
    const int width = num_features < 1000 ? 3 : static_cast<int>(std::to_string(num_features - 1).size());
    static const char* const kCategories[] = {"Artificial Intelligence", "Data Mining", "Databases", "Theory"};

    SyntheticProblem p;
    Dataset& d = p.data;
    const auto n = static_cast<Eigen::Index>(num_samples), k = static_cast<Eigen::Index>(num_features);
    for (std::size_t j = 0; j < num_features; ++j) d.feature_names.push_back(numbered("kw", j, width));
    d.X = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            if (uniform01(rng) < kDesignDensity) d.X(i, j) = 1.0;
    if (d.X.isZero()) throw ContractError("generate_synthetic: degenerate all-zero design");

    std::vector<std::size_t> order(num_features);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_relevant; ++i)
        std::swap(order[i], order[i + static_cast<std::size_t>(uniform_index(rng, num_features - i))]);
    p.truth.assign(num_features, 0);
    for (std::size_t i = 0; i < n_relevant; ++i) p.truth[order[i]] = 1;

    p.true_weights.resize(k);
    for (Eigen::Index j = 0; j < k; ++j)
        p.true_weights(j) = p.truth[static_cast<std::size_t>(j)] ? effect_size
                                                                 : 0.05 * effect_size * standard_normal(rng);
    d.y = d.X * p.true_weights;
    for (Eigen::Index i = 0; i < n; ++i) {
        d.y(i) += standard_normal(rng);
        d.ids.push_back(numbered("doc", static_cast<std::size_t>(i), 4));
        d.categories.emplace_back(kCategories[uniform_index(rng, 4)]);
    }
    p.split = split(d, SplitSpec{0.5, derive_seed(seed, "synthetic-split")});
    return p;
}

AuxCorpus generate_aux_corpus(std::span<const std::string> feature_names, std::span<const std::uint8_t> truth,
                              std::size_t n_docs, std::uint64_t seed) {
    if (feature_names.empty() || truth.size() != feature_names.size())
        throw ContractError("generate_aux_corpus: truth must cover every feature");
    if (n_docs == 0) throw ContractError("generate_aux_corpus: n_docs must be positive");
    Rng rng = make_rng(seed, "aux-corpus");

    std::vector<std::vector<std::size_t>> members(kAuxTopics);
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        std::size_t topic = static_cast<std::size_t>(uniform_index(rng, kAuxTopics));
        if (truth[j] && uniform01(rng) < 0.85) topic = static_cast<std::size_t>(uniform_index(rng, kRelevantTopics));
        else if (!truth[j] && uniform01(rng) < kTopicPurity)
            topic = kRelevantTopics + static_cast<std::size_t>(uniform_index(rng, kAuxTopics - kRelevantTopics));
        members[topic].push_back(j);
    }

    std::vector<std::vector<std::string>> docs;
    docs.reserve(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::vector<std::string> doc;
        const auto len = 6 + static_cast<std::size_t>(uniform_index(rng, 7));
        if (uniform01(rng) < 0.08) {
            for (std::size_t i = 0; i < len; ++i)
                doc.push_back(numbered("noise-", static_cast<std::size_t>(uniform_index(rng, kNoiseKeywords)), 3));
        } else {
            const auto topic = static_cast<std::size_t>(uniform_index(rng, kAuxTopics));
            for (std::size_t i = 0; i < len; ++i) {
                const double u = uniform01(rng);
                if (u < 0.75 && !members[topic].empty()) {
                    doc.push_back(feature_names[members[topic][uniform_index(rng, members[topic].size())]]);
                } else if (u < 0.9 || members[topic].empty()) {
                    doc.push_back("aux-t" + std::to_string(topic) + "-" +
                                  std::to_string(uniform_index(rng, kTopicOnlyKeywords)));
                } else {
                    doc.push_back(feature_names[uniform_index(rng, feature_names.size())]);
                }
            }
        }
        docs.push_back(std::move(doc));
    }
    return AuxCorpus::from_documents(std::move(docs));
}

DescriptorMatrix build_descriptors(const AuxCorpus& aux, std::span<const std::string> feature_names,
                                   std::size_t n_clusters, std::size_t train_sample_size, std::uint64_t seed) {
    const AuxCorpus filtered = filter_corpus(aux, feature_names);
    const auto sample = std::min(train_sample_size, filtered.docs.size());
    const ClusterModel model = cluster_documents(filtered, n_clusters, sample, seed);
    return build_tfidf(filtered, model, feature_names);
}

RunResult simulate_run(Condition condition, const OracleExpert& oracle, const SessionData& data,
                       const SessionConfig& config, std::uint64_t seed) {
    if (data.train && oracle.true_relevance.size() != data.train->num_features())
        throw ContractError("simulate_run: oracle does not cover the features");
    Session session = Session::create(data, condition, config, seed, "run-" + std::to_string(seed));
    const std::uint64_t oracle_seed = derive_seed(seed, "oracle");
    while (!session.terminal()) {
        const auto query = session.next_query();
        const auto responses = oracle.answer(query, oracle_seed);
        session.submit_feedback(responses);
    }
    return RunResult{condition, seed, session.mse_history()};
}

double max_distance_statistic(std::span<const double> curve_a, std::span<const double> curve_b) {
    if (curve_a.size() != curve_b.size()) throw ContractError("max_distance_statistic: length mismatch");
    double best = 0.0;
    for (std::size_t t = 0; t < curve_a.size(); ++t) best = std::max(best, std::abs(curve_a[t] - curve_b[t]));
    return best;
}

std::vector<double> average_curve(std::span<const RunResult> runs) {
    if (runs.empty()) throw ContractError("average_curve: empty group");
    std::size_t len = 0;
    check_curves(runs, len);
    std::vector<double> mean(len, 0.0);
    for (const auto& r : runs)
        for (std::size_t t = 0; t < len; ++t) mean[t] += r.mse_curve[t];
    for (auto& v : mean) v /= static_cast<double>(runs.size());
    return mean;
}

PermutationTestResult permutation_test(std::span<const RunResult> group_a, std::span<const RunResult> group_b,
                                       std::size_t n_perm, std::uint64_t seed) {
    if (n_perm < 1) throw ContractError("permutation_test: n_perm must be >= 1");
    if (group_a.empty() || group_b.empty()) throw ContractError("permutation_test: groups must be nonempty");
    std::size_t len = 0;
    check_curves(group_a, len);
    check_curves(group_b, len);

    PermutationTestResult out;
    out.n_permutations = n_perm;
    out.observed_stat = max_distance_statistic(average_curve(group_a), average_curve(group_b));

    std::vector<const RunResult*> pool;
    for (const auto& r : group_a) pool.push_back(&r);
    for (const auto& r : group_b) pool.push_back(&r);
    std::sort(pool.begin(), pool.end(), [](const RunResult* x, const RunResult* y) {
        if (x->mse_curve != y->mse_curve) return x->mse_curve < y->mse_curve;
        if (x->seed != y->seed) return x->seed < y->seed;
        return x->condition < y->condition;
    });
    const std::size_t n = pool.size();
    const std::size_t m = std::min(group_a.size(), group_b.size());

    std::vector<double> total(len, 0.0);
    for (const auto* r : pool)
        for (std::size_t t = 0; t < len; ++t) total[t] += r->mse_curve[t];

    Rng rng = make_rng(seed, "permutation");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> first(len);
    const double tol = 1e-12 * std::max(1.0, out.observed_stat);
    std::size_t exceed = 0;
    for (std::size_t p = 0; p < n_perm; ++p) {
        for (std::size_t i = 0; i < m; ++i)
            std::swap(idx[i], idx[i + static_cast<std::size_t>(uniform_index(rng, n - i))]);
        std::fill(first.begin(), first.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < len; ++t) first[t] += pool[idx[i]]->mse_curve[t];
        double stat = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            const double a = first[t] / static_cast<double>(m);
            const double b = (total[t] - first[t]) / static_cast<double>(n - m);
            stat = std::max(stat, std::abs(a - b));
        }
        if (stat >= out.observed_stat - tol) ++exceed;
    }
    out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + n_perm);
    return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractError("wilcoxon_signed_rank: length mismatch");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != y[i]) d.push_back(x[i] - y[i]);
    WilcoxonResult out;
    out.n_nonzero = d.size();
    if (d.empty()) return out;

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<double> rank(d.size());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t k = i;
        while (k + 1 < order.size() && std::abs(d[order[k + 1]]) == std::abs(d[order[i]])) ++k;
        const double avg = 0.5 * static_cast<double>(i + k) + 1.0;
        for (std::size_t q = i; q <= k; ++q) rank[order[q]] = avg;
        const double t = static_cast<double>(k - i + 1);
        tie_term += t * t * t - t;
        i = k + 1;
    }
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) out.w_plus += rank[i];
    const double nn = static_cast<double>(d.size());
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return out;
    const double diff = out.w_plus - mean;
    const double corrected = std::max(0.0, std::abs(diff) - 0.5);
    out.z = std::copysign(corrected / std::sqrt(var), diff);
    out.p_value = std::min(1.0, std::erfc(std::abs(out.z) / std::sqrt(2.0)));
    return out;
}

double curve_area(std::span<const double> curve) {
    double area = 0.0;
    for (std::size_t t = 1; t < curve.size(); ++t) area += 0.5 * (curve[t - 1] + curve[t]);
    return area;
}

void write_results_table(std::ostream& out, std::span<const RunResult> runs) {
    out << "condition,seed,t,mse\n";
    for (const auto& r : runs)
        for (std::size_t t = 0; t < r.mse_curve.size(); ++t)
            out << condition_code(r.condition) << ',' << r.seed << ',' << t << ',' << format_double(r.mse_curve[t])
                << '\n';
}

std::vector<RunResult> read_results_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "condition,seed,t,mse")
        throw FormatError("results table: missing header 'condition,seed,t,mse'");
    std::vector<RunResult> runs;
    std::map<std::pair<std::string, std::uint64_t>, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) throw FormatError("results table: line " + std::to_string(lineno) + " needs 4 fields");
        try {
            const Condition cond = parse_condition(fields[0]);
            const std::uint64_t seed = parse_uint(fields[1]);
            const std::uint64_t t = parse_uint(fields[2]);
            const double mse = parse_double(fields[3]);
            auto [it, inserted] = index.emplace(std::make_pair(fields[0], seed), runs.size());
            if (inserted) runs.push_back(RunResult{cond, seed, {}});
            auto& run = runs[it->second];
            if (t != run.mse_curve.size())
                throw FormatError("iterations must be consecutive from 0");
            run.mse_curve.push_back(mse);
        } catch (const std::exception& e) {
            throw FormatError("results table: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return runs;
}

void write_summary(std::ostream& out, std::span<const RunResult> runs) {
    std::map<Condition, std::vector<RunResult>> groups;
    for (const auto& r : runs) groups[r.condition].push_back(r);
    Json conditions = Json::object();
    for (const auto& [cond, group] : groups) {
        const auto mean = average_curve(group);
        std::vector<double> initial, final_mse, areas;
        for (const auto& r : group) {
            initial.push_back(r.mse_curve.front());
            final_mse.push_back(r.mse_curve.back());
            areas.push_back(curve_area(r.mse_curve));
        }
        const auto w = wilcoxon_signed_rank(final_mse, initial);
        conditions[std::string(condition_code(cond))] = Json{
            {"runs", group.size()},
            {"mean_curve", mean},
            {"mean_area", std::accumulate(areas.begin(), areas.end(), 0.0) / static_cast<double>(areas.size())},
            {"final_vs_initial",
             {{"w_plus", w.w_plus}, {"z", w.z}, {"p_value", w.p_value}, {"n_nonzero", w.n_nonzero}}}};
    }
    Json comparisons = Json::array();
    for (auto a = groups.begin(); a != groups.end(); ++a)
        for (auto b = std::next(a); b != groups.end(); ++b) {
            const auto ma = average_curve(a->second), mb = average_curve(b->second);
            if (ma.size() != mb.size()) continue;
            comparisons.push_back(Json{{"a", condition_code(a->first)},
                                       {"b", condition_code(b->first)},
                                       {"max_distance", max_distance_statistic(ma, mb)}});
        }
    out << Json{{"conditions", conditions}, {"comparisons", comparisons}}.dump(2) << '\n';
}

} // namespace elicit

#include "elicit/descriptors.hpp"

#include "elicit/errors.hpp"
#include "elicit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace elicit {
namespace {

// Sparse keyword-multiplicity vector, sorted by vocabulary index.
struct SparseDoc {
    std::vector<std::pair<std::size_t, double>> entries;
    double norm = 0.0;
};

std::vector<SparseDoc> to_sparse(const AuxCorpus& aux) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t v = 0; v < aux.vocabulary.size(); ++v) index.emplace(aux.vocabulary[v], v);
    std::vector<SparseDoc> out;
    out.reserve(aux.docs.size());
    for (const auto& doc : aux.docs) {
        std::unordered_map<std::size_t, double> counts;
        for (const auto& kw : doc) counts[index.at(kw)] += 1.0;
        SparseDoc sd;
        sd.entries.assign(counts.begin(), counts.end());
        std::sort(sd.entries.begin(), sd.entries.end());
        double sq = 0.0;
        for (const auto& [v, c] : sd.entries) sq += c * c;
        sd.norm = std::sqrt(sq);
        out.push_back(std::move(sd));
    }
    return out;
}

double sparse_dot(const SparseDoc& a, const SparseDoc& b) {
    double s = 0.0;
    auto i = a.entries.begin();
    auto j = b.entries.begin();
    while (i != a.entries.end() && j != b.entries.end()) {
        if (i->first < j->first) ++i;
        else if (j->first < i->first) ++j;
        else { s += i->second * j->second; ++i; ++j; }
    }
    return s;
}

double cosine_distance(const SparseDoc& a, const SparseDoc& b) {
    const double d = 1.0 - sparse_dot(a, b) / (a.norm * b.norm);
    return std::clamp(d, 0.0, 2.0);
}

struct Merge {
    std::size_t a;
    std::size_t b;
    double distance;
};

// Nearest-neighbour chain for average linkage on a dense distance matrix. Slot `a` of a merge
// always holds a cluster containing point `a`, so merges can be relabelled with union-find.
std::vector<Merge> nn_chain_average(Eigen::MatrixXd dist) {
    const auto n = static_cast<std::size_t>(dist.rows());
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<Merge> merges;
    merges.reserve(n > 0 ? n - 1 : 0);
    std::vector<std::size_t> chain;
    std::size_t remaining = n;

    while (remaining > 1) {
        if (chain.empty()) {
            for (std::size_t i = 0; i < n; ++i)
                if (active[i]) { chain.push_back(i); break; }
        }
        std::size_t a = 0, b = 0;
        while (true) {
            a = chain.back();
            const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
            double best = std::numeric_limits<double>::infinity();
            b = n;
            if (prev != n) { b = prev; best = dist(a, prev); }
            for (std::size_t c = 0; c < n; ++c) {
                if (!active[c] || c == a) continue;
                const double d = dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
                if (d < best) { best = d; b = c; }
            }
            if (b == prev) break;
            chain.push_back(b);
        }
        chain.pop_back();
        chain.pop_back();
        const std::size_t keep = std::min(a, b), drop = std::max(a, b);
        merges.push_back({keep, drop, dist(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});

        const double na = static_cast<double>(size[keep]), nb = static_cast<double>(size[drop]);
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == keep || c == drop) continue;
            const auto ci = static_cast<Eigen::Index>(c);
            const double d = (na * dist(static_cast<Eigen::Index>(keep), ci) +
                              nb * dist(static_cast<Eigen::Index>(drop), ci)) / (na + nb);
            dist(static_cast<Eigen::Index>(keep), ci) = d;
            dist(ci, static_cast<Eigen::Index>(keep)) = d;
        }
        size[keep] += size[drop];
        active[drop] = false;
        --remaining;
    }
    std::stable_sort(merges.begin(), merges.end(),
                     [](const Merge& x, const Merge& y) { return x.distance < y.distance; });
    return merges;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

} // namespace

AuxCorpus AuxCorpus::from_documents(std::vector<std::vector<std::string>> docs) {
    AuxCorpus out;
    std::unordered_set<std::string> seen;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (docs[d].empty()) throw ContractError("aux corpus: document " + std::to_string(d) + " is empty");
        for (const auto& kw : docs[d])
            if (seen.insert(kw).second) out.vocabulary.push_back(kw);
    }
    out.docs = std::move(docs);
    return out;
}

AuxCorpus filter_corpus(const AuxCorpus& aux, std::span<const std::string> prediction_features) {
    if (prediction_features.empty()) throw ContractError("filter_corpus: no prediction features");
    const std::unordered_set<std::string> wanted(prediction_features.begin(), prediction_features.end());
    std::vector<std::vector<std::string>> kept;
    for (const auto& doc : aux.docs) {
        if (std::any_of(doc.begin(), doc.end(), [&](const std::string& kw) { return wanted.contains(kw); }))
            kept.push_back(doc);
    }
    if (kept.empty()) throw ContractError("filter_corpus: no auxiliary document shares a keyword with the data");
    return AuxCorpus::from_documents(std::move(kept));
}

ClusterModel cluster_documents(const AuxCorpus& aux, std::size_t n_clusters,
                               std::size_t train_sample_size, std::uint64_t seed) {
    const std::size_t n_docs = aux.docs.size();
    if (n_clusters == 0) throw ContractError("cluster: n_clusters must be positive");
    if (train_sample_size > n_docs) throw ContractError("cluster: train_sample_size exceeds corpus size");
    if (n_clusters > train_sample_size) throw ContractError("cluster: n_clusters exceeds train_sample_size");

    const auto docs = to_sparse(aux);
    for (const auto& d : docs)
        if (!(d.norm > 0.0)) throw ContractError("cluster: zero document vector");

    std::vector<std::size_t> sample(n_docs);
    std::iota(sample.begin(), sample.end(), std::size_t{0});
    if (train_sample_size < n_docs) {
        Rng rng = make_rng(seed, "cluster-sample");
        for (std::size_t i = 0; i < train_sample_size; ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_index(rng, n_docs - i));
            std::swap(sample[i], sample[j]);
        }
        sample.resize(train_sample_size);
        std::sort(sample.begin(), sample.end());
    }

    const auto m = static_cast<Eigen::Index>(sample.size());
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(m, m);
    bool all_identical = true;
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double d = cosine_distance(docs[sample[static_cast<std::size_t>(i)]],
                                             docs[sample[static_cast<std::size_t>(j)]]);
            dist(i, j) = dist(j, i) = d;
            if (d > 1e-12) all_identical = false;
        }
    if (n_clusters > 1 && all_identical)
        throw ContractError("cluster: all sampled documents are identical; clusters are undefined");

    const auto merges = nn_chain_average(std::move(dist));
    std::vector<std::size_t> parent(sample.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (std::size_t k = 0; k + n_clusters < sample.size(); ++k) {
        const auto ra = find_root(parent, merges[k].a), rb = find_root(parent, merges[k].b);
        parent[std::max(ra, rb)] = std::min(ra, rb);
    }

    ClusterModel model;
    model.n_clusters = n_clusters;
    model.training_docs = sample;
    model.assignment.assign(n_docs, n_clusters);
    std::unordered_map<std::size_t, std::size_t> label_of_root;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const auto root = find_root(parent, i);
        auto [it, inserted] = label_of_root.emplace(root, label_of_root.size());
        model.assignment[sample[i]] = it->second;
    }

    const auto vocab = static_cast<Eigen::Index>(aux.vocabulary.size());
    model.centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_clusters), vocab);
    std::vector<double> members(n_clusters, 0.0);
    for (auto d : sample) {
        const auto c = model.assignment[d];
        members[c] += 1.0;
        for (const auto& [v, cnt] : docs[d].entries)
            model.centroids(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v)) += cnt;
    }
    for (std::size_t c = 0; c < n_clusters; ++c) model.centroids.row(static_cast<Eigen::Index>(c)) /= members[c];
    const Eigen::VectorXd centroid_norm = model.centroids.rowwise().norm();

    for (std::size_t d = 0; d < n_docs; ++d) {
        if (model.assignment[d] != n_clusters) continue;
        std::size_t best_c = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_clusters; ++c) {
            double dot = 0.0;
            for (const auto& [v, cnt] : docs[d].entries)
                dot += cnt * model.centroids(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v));
            const double dd = 1.0 - dot / (docs[d].norm * centroid_norm(static_cast<Eigen::Index>(c)));
            if (dd < best) { best = dd; best_c = c; }
        }
        model.assignment[d] = best_c;
    }
    return model;
}

DescriptorMatrix build_tfidf(const AuxCorpus& aux, const ClusterModel& model,
                             std::span<const std::string> feature_names) {
    if (model.assignment.size() != aux.docs.size())
        throw ContractError("build_tfidf: cluster model does not cover the corpus");
    const auto k = static_cast<Eigen::Index>(feature_names.size());
    const auto nc = static_cast<Eigen::Index>(model.n_clusters);

    std::unordered_map<std::string, Eigen::Index> row;
    for (Eigen::Index j = 0; j < k; ++j) row.emplace(feature_names[static_cast<std::size_t>(j)], j);

    Eigen::MatrixXd occ = Eigen::MatrixXd::Zero(k, nc);
    Eigen::VectorXd cluster_total = Eigen::VectorXd::Zero(nc);
    Eigen::VectorXd df = Eigen::VectorXd::Zero(k);
    for (std::size_t d = 0; d < aux.docs.size(); ++d) {
        const auto c = static_cast<Eigen::Index>(model.assignment[d]);
        if (c >= nc) throw ContractError("build_tfidf: document assigned outside [0, n_clusters)");
        cluster_total(c) += static_cast<double>(aux.docs[d].size());
        std::unordered_set<Eigen::Index> present;
        for (const auto& kw : aux.docs[d]) {
            auto it = row.find(kw);
            if (it == row.end()) continue;
            occ(it->second, c) += 1.0;
            present.insert(it->second);
        }
        for (auto j : present) df(j) += 1.0;
    }

    const double n_docs = static_cast<double>(aux.docs.size());
    DescriptorMatrix out;
    out.feature_names.assign(feature_names.begin(), feature_names.end());
    out.Z = Eigen::MatrixXd::Zero(k, nc);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (df(j) == 0.0) continue;
        const double idf = std::log(n_docs / df(j));
        for (Eigen::Index c = 0; c < nc; ++c)
            if (cluster_total(c) > 0.0) out.Z(j, c) = occ(j, c) / cluster_total(c) * idf;
    }
    return out;
}

} // namespace elicit

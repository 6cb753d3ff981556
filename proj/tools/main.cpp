// elicit: command-line entry points over the elicit libraries.

#include "elicit/errors.hpp"
#include "elicit/evaluation.hpp"
#include "elicit/io.hpp"
#include "elicit/service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace elicit;
using Json = nlohmann::json;

namespace {

int default_port() {
    if (const char* p = std::getenv("ELICIT_PORT")) {
        try {
            return std::stoi(p);
        } catch (const std::exception&) {
            throw ContractError(std::string("ELICIT_PORT is not a port number: ") + p);
        }
    }
    return 8080;
}

Dataset load_dataset(const fs::path& path) {
    std::istringstream in(read_file(path));
    return read_dataset(in);
}

DescriptorMatrix load_descriptors(const fs::path& path) {
    std::istringstream in(read_file(path));
    return read_descriptors(in);
}

/// Splits the raw dataset and checks that the descriptor rows line up with its features.
SessionData prepare(const fs::path& dataset_path, const fs::path& descriptor_path, std::uint64_t split_seed) {
    const Dataset raw = load_dataset(dataset_path);
    auto z = std::make_shared<DescriptorMatrix>(load_descriptors(descriptor_path));
    if (z->feature_names != raw.feature_names)
        throw ContractError("descriptor rows do not match the dataset features");
    SplitResult parts = split(raw, SplitSpec{0.5, split_seed});
    return SessionData{std::make_shared<const Dataset>(std::move(parts.train)),
                       std::make_shared<const Dataset>(std::move(parts.test)), std::move(z)};
}

std::vector<std::uint8_t> load_truth(const fs::path& path, const std::vector<std::string>& names) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw FormatError(std::string("truth file: ") + e.what());
    }
    std::vector<std::uint8_t> truth(names.size(), 0);
    for (const auto& name : j.at("relevant")) {
        const auto it = std::find(names.begin(), names.end(), name.get<std::string>());
        if (it == names.end()) throw ContractError("truth file names unknown feature '" + name.get<std::string>() + "'");
        truth[static_cast<std::size_t>(it - names.begin())] = 1;
    }
    return truth;
}

std::vector<RunResult> load_table(const fs::path& path) {
    std::istringstream in(read_file(path));
    return read_results_table(in);
}

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

struct Common {
    int sampler_iterations = SamplerConfig{}.iterations;
    int burn_in = SamplerConfig{}.burn_in;
    int max_iterations = 20;
    std::size_t batch = 10;
    std::uint64_t split_seed = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--sampler-iterations", sampler_iterations, "MCMC iterations per fit, burn-in included");
        cmd->add_option("--burn-in", burn_in, "MCMC burn-in per fit");
        cmd->add_option("--max-iterations", max_iterations, "elicitation rounds per session");
        cmd->add_option("--batch", batch, "features queried per round");
        cmd->add_option("--split-seed", split_seed, "seed of the train/test split");
    }

    SessionConfig config() const {
        SessionConfig c;
        c.max_iterations = max_iterations;
        c.batch_size = batch;
        c.sampler.iterations = sampler_iterations;
        c.sampler.burn_in = burn_in;
        return c;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive prior elicitation for sparse linear regression"};
    app.require_subcommand(1);

    fs::path data_path, out_path, aux_path, dataset_path, descriptor_path, truth_path, summary_path, group_a, group_b;
    std::size_t clusters = 20, sample = 1000, runs = 1, permutations = 10000, jobs = 1;
    std::uint64_t seed = 0;
    double eps = 0.0;
    std::string condition_text;
    std::string host = "127.0.0.1";
    int port = 0;
    Common common;

    auto* ingest_cmd = app.add_subcommand("ingest", "Build a dataset from line-delimited document records");
    ingest_cmd->add_option("--data", data_path, "document records (JSONL)")->required();
    ingest_cmd->add_option("--out", out_path, "dataset file to write")->required();

    auto* desc_cmd = app.add_subcommand("descriptors", "Cluster an auxiliary corpus into tf-idf descriptors");
    desc_cmd->add_option("--aux", aux_path, "auxiliary corpus (JSONL)")->required();
    desc_cmd->add_option("--data", dataset_path, "dataset file")->required();
    desc_cmd->add_option("--clusters", clusters, "number of clusters");
    desc_cmd->add_option("--sample", sample, "documents clustered hierarchically");
    desc_cmd->add_option("--seed", seed);
    desc_cmd->add_option("--out", out_path, "descriptor CSV to write")->required();

    std::size_t gen_k = 457, gen_n = 162, gen_relevant = 20, gen_aux = 3000;
    double gen_effect = 1.0;
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic problem with known relevant features");
    gen_cmd->add_option("--features", gen_k);
    gen_cmd->add_option("--samples", gen_n);
    gen_cmd->add_option("--relevant", gen_relevant);
    gen_cmd->add_option("--effect", gen_effect, "weight of each relevant feature");
    gen_cmd->add_option("--aux-docs", gen_aux, "auxiliary corpus size");
    gen_cmd->add_option("--seed", seed);
    gen_cmd->add_option("--out-dir", out_path, "directory for dataset.json, docs.jsonl, aux.jsonl, truth.json")
        ->required();

    auto* sim_cmd = app.add_subcommand("simulate", "Run sessions answered by a simulated expert");
    sim_cmd->add_option("--condition", condition_text, "c1, c2 or c3")->required();
    sim_cmd->add_option("--dataset", dataset_path)->required();
    sim_cmd->add_option("--descriptors", descriptor_path)->required();
    sim_cmd->add_option("--truth", truth_path, "JSON {\"relevant\": [feature names]}");
    sim_cmd->add_option("--runs", runs);
    sim_cmd->add_option("--eps", eps, "probability of flipping each simulated answer");
    sim_cmd->add_option("--seed", seed, "seed of the first run; run r uses seed + r");
    sim_cmd->add_option("--jobs", jobs, "runs executed concurrently");
    sim_cmd->add_option("--out", out_path, "results table (CSV)")->required();
    sim_cmd->add_option("--summary", summary_path, "optional JSON summary");
    common.add_to(sim_cmd);

    auto* eval_cmd = app.add_subcommand("evaluate", "Permutation test between two result tables");
    eval_cmd->add_option("--group-a", group_a)->required();
    eval_cmd->add_option("--group-b", group_b)->required();
    eval_cmd->add_option("--permutations", permutations);
    eval_cmd->add_option("--seed", seed);

    auto* serve_cmd = app.add_subcommand("serve", "Serve sessions over HTTP");
    serve_cmd->add_option("--dataset", dataset_path)->required();
    serve_cmd->add_option("--descriptors", descriptor_path)->required();
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port, "defaults to $ELICIT_PORT or 8080");
    common.add_to(serve_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) {
            std::istringstream in(read_file(data_path));
            const auto records = read_document_records(in);
            const Dataset d = ingest(records);
            std::ostringstream out;
            write_dataset(out, d);
            write_file(out_path, out.str());
            std::cout << "samples=" << d.num_samples() << " features=" << d.num_features() << '\n';
        } else if (*desc_cmd) {
            std::istringstream in(read_file(aux_path));
            const AuxCorpus aux = read_aux_corpus(in);
            const Dataset d = load_dataset(dataset_path);
            const auto z = build_descriptors(aux, d.feature_names, clusters, sample, seed);
            std::ostringstream out;
            write_descriptors(out, z);
            write_file(out_path, out.str());
            std::cout << "features=" << z.num_features() << " clusters=" << z.num_columns() << '\n';
        } else if (*gen_cmd) {
            const auto p = generate_synthetic(gen_k, gen_n, gen_relevant, gen_effect, seed);
            const AuxCorpus aux = generate_aux_corpus(p.data.feature_names, p.truth, gen_aux, seed);
            fs::create_directories(out_path);
            std::ostringstream ds, docs, auxs;
            write_dataset(ds, p.data);
            std::vector<DocumentRecord> records;
            for (std::size_t i = 0; i < p.data.num_samples(); ++i) {
                DocumentRecord r{p.data.ids[i], {}, p.data.y(static_cast<Eigen::Index>(i)), p.data.categories[i]};
                for (std::size_t j = 0; j < p.data.num_features(); ++j)
                    if (p.data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0)
                        r.keywords.push_back(p.data.feature_names[j]);
                records.push_back(std::move(r));
            }
            write_document_records(docs, records);
            write_aux_corpus(auxs, aux);
            std::vector<std::string> relevant;
            for (std::size_t j = 0; j < p.truth.size(); ++j)
                if (p.truth[j]) relevant.push_back(p.data.feature_names[j]);
            write_file(out_path / "dataset.json", ds.str());
            write_file(out_path / "docs.jsonl", docs.str());
            write_file(out_path / "aux.jsonl", auxs.str());
            write_file(out_path / "truth.json", Json{{"relevant", relevant}}.dump() + "\n");
        } else if (*sim_cmd) {
            const Condition condition = parse_condition(condition_text);
            if (runs == 0) throw ContractError("--runs must be positive");
            if (!(eps >= 0.0 && eps < 0.5)) throw ContractError("--eps must lie in [0, 0.5)");
            const SessionData data = prepare(dataset_path, descriptor_path, common.split_seed);
            OracleExpert oracle;
            oracle.noise_eps = eps;
            oracle.true_relevance = truth_path.empty() ? std::vector<std::uint8_t>(data.train->num_features(), 0)
                                                       : load_truth(truth_path, data.train->feature_names);
            const SessionConfig config = common.config();

            std::vector<RunResult> results(runs);
            const std::size_t width = std::max<std::size_t>(1, jobs);
            for (std::size_t start = 0; start < runs; start += width) {
                std::vector<std::future<RunResult>> batch;
                for (std::size_t r = start; r < std::min(runs, start + width); ++r)
                    batch.push_back(std::async(std::launch::async, [&, r] {
                        return simulate_run(condition, oracle, data, config, seed + r);
                    }));
                for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
            }
            std::ostringstream table;
            write_results_table(table, results);
            write_file(out_path, table.str());
            if (!summary_path.empty()) {
                std::ostringstream summary;
                write_summary(summary, results);
                write_file(summary_path, summary.str());
            }
        } else if (*eval_cmd) {
            const auto a = load_table(group_a);
            const auto b = load_table(group_b);
            const auto result = permutation_test(a, b, permutations, seed);
            std::cout << Json{{"observed_stat", result.observed_stat},
                              {"p_value", result.p_value},
                              {"n_permutations", result.n_permutations}}
                             .dump()
                      << '\n';
        } else if (*serve_cmd) {
            Service service;
            service.register_dataset("default", prepare(dataset_path, descriptor_path, common.split_seed));
            service.set_default_config(common.config());
            const int bound = service.bind(host, port == 0 ? default_port() : port);
            std::cout << "listening on " << host << ':' << bound << std::endl;
            service.run();
        }
    } catch (const ContractError& e) {
        std::cerr << "error: contract: " << one_line(e.what()) << '\n';
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << one_line(e.what()) << '\n';
        return 4;
    } catch (const StateError& e) {
        std::cerr << "error: state: " << one_line(e.what()) << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}

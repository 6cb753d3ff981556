#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("elicit-cli-" + std::to_string(::getpid()) + "-" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    /// Runs the CLI with `args`; stdout and stderr land in out.txt and err.txt.
    int run(const std::string& args) {
        const std::string cmd = "cd '" + dir_.string() + "' && '" ELICIT_CLI_PATH "' " + args + " >out.txt 2>err.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string out() const { return slurp(dir_ / "out.txt"); }
    std::string err() const { return slurp(dir_ / "err.txt"); }
    fs::path path(const std::string& name) const { return dir_ / name; }

    void generate() {
        ASSERT_EQ(run("generate --features 40 --samples 40 --relevant 5 --aux-docs 300 --seed 3 --out-dir gen"), 0)
            << err();
        ASSERT_EQ(run("descriptors --aux gen/aux.jsonl --data gen/dataset.json --clusters 5 --sample 200 --seed 3 "
                      "--out z.csv"),
                  0)
            << err();
    }

    static constexpr const char* kFast = "--sampler-iterations 400 --burn-in 200 --max-iterations 3 --batch 4";

    fs::path dir_;
};

} // namespace

TEST_F(Cli, PipelineIsReproducible) {
    generate();
    const std::string z1 = slurp(path("z.csv"));
    ASSERT_EQ(run("descriptors --aux gen/aux.jsonl --data gen/dataset.json --clusters 5 --sample 200 --seed 3 "
                  "--out z2.csv"),
              0);
    EXPECT_EQ(slurp(path("z2.csv")), z1);

    const std::string sim = std::string("simulate --condition c3 --dataset gen/dataset.json --descriptors z.csv "
                                        "--truth gen/truth.json --runs 3 --seed 10 ") + kFast;
    ASSERT_EQ(run(sim + " --out a.csv --summary a.json"), 0) << err();
    ASSERT_EQ(run(sim + " --jobs 2 --out b.csv"), 0) << err();
    const std::string table = slurp(path("a.csv"));
    EXPECT_EQ(slurp(path("b.csv")), table);
    EXPECT_EQ(table.substr(0, table.find('\n')), "condition,seed,t,mse");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1 + 3 * 4);

    const Json summary = Json::parse(slurp(path("a.json")));
    EXPECT_EQ(summary["conditions"]["c3"]["runs"], 3);
    EXPECT_EQ(summary["conditions"]["c3"]["mean_curve"].size(), 4u);
}

TEST_F(Cli, NonInteractiveRowsAndSelfComparison) {
    generate();
    ASSERT_EQ(run("simulate --condition c1 --dataset gen/dataset.json --descriptors z.csv --runs 4 --out c1.csv " +
                  std::string(kFast)),
              0)
        << err();
    const std::string table = slurp(path("c1.csv"));
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1 + 4);

    ASSERT_EQ(run("evaluate --group-a c1.csv --group-b c1.csv --permutations 200 --seed 1"), 0) << err();
    const Json result = Json::parse(out());
    EXPECT_EQ(result["observed_stat"].get<double>(), 0.0);
    EXPECT_EQ(result["p_value"].get<double>(), 1.0);
    EXPECT_EQ(result["n_permutations"], 200);
}

TEST_F(Cli, ErrorsAreOneLineWithDistinctExitCodes) {
    generate();
    // Descriptors built for another dataset do not line up.
    ASSERT_EQ(run("generate --features 30 --samples 40 --relevant 3 --aux-docs 100 --seed 4 --out-dir other"), 0);
    const int contract = run("simulate --condition c2 --dataset other/dataset.json --descriptors z.csv --out x.csv");
    EXPECT_EQ(contract, 3);
    const std::string e = err();
    EXPECT_EQ(e.rfind("error: contract: ", 0), 0u) << e;
    EXPECT_EQ(std::count(e.begin(), e.end(), '\n'), 1);

    std::ofstream(path("broken.json")) << "{\"format\":";
    EXPECT_EQ(run("simulate --condition c2 --dataset broken.json --descriptors z.csv --out x.csv"), 4);
    EXPECT_EQ(err().rfind("error: format: ", 0), 0u);

    EXPECT_EQ(run("simulate --condition c9 --dataset gen/dataset.json --descriptors z.csv --out x.csv"), 3);
    EXPECT_NE(run("simulate --dataset gen/dataset.json"), 0);
    EXPECT_FALSE(fs::exists(path("x.csv")));
}

TEST_F(Cli, IngestMatchesGeneratedDataset) {
    generate();
    ASSERT_EQ(run("ingest --data gen/docs.jsonl --out again.json"), 0) << err();
    const Json a = Json::parse(slurp(path("again.json")));
    const Json b = Json::parse(slurp(path("gen/dataset.json")));
    EXPECT_LE(a["feature_names"].size(), b["feature_names"].size());
    EXPECT_EQ(a["y"], b["y"]);
    EXPECT_EQ(a["ids"], b["ids"]);

    std::ofstream(path("bad.jsonl")) << "{\"id\":\"a\",\"keywords\":[\"x\"],\"target\":1,\"category\":\"c\"}\n"
                                     << "{\"id\":\"a\",\"keywords\":[\"y\"],\"target\":2,\"category\":\"c\"}\n";
    EXPECT_EQ(run("ingest --data bad.jsonl --out bad.json"), 3);
}

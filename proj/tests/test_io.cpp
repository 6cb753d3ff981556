#include "elicit/errors.hpp"
#include "elicit/io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace elicit;

TEST(DocumentRecords, RoundTrip) {
    const std::vector<DocumentRecord> recs{{"a", {"x", "y"}, 1.5, "AI"}, {"b", {}, -2.0, "DB"}};
    std::ostringstream out;
    write_document_records(out, recs);
    std::istringstream in(out.str() + "\n");
    const auto back = read_document_records(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].keywords, recs[0].keywords);
    EXPECT_EQ(back[1].target, -2.0);
    EXPECT_EQ(back[1].category, "DB");
}

TEST(DocumentRecords, MissingFieldNamesTheLine) {
    std::istringstream in(R"({"id":"a","keywords":["x"],"target":1,"category":"c"}
{"id":"b","keywords":["x"],"category":"c"}
)");
    try {
        read_document_records(in);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    std::istringstream not_json("{id: 1}\n");
    EXPECT_THROW(read_document_records(not_json), FormatError);
    std::istringstream wrong_type(R"({"id":"a","keywords":"x","target":1,"category":"c"})");
    EXPECT_THROW(read_document_records(wrong_type), FormatError);
}

TEST(AuxCorpusFile, RoundTripAndEmptyDocument) {
    const auto aux = AuxCorpus::from_documents({{"x", "x", "y"}, {"z"}});
    std::ostringstream out;
    write_aux_corpus(out, aux);
    std::istringstream in(out.str());
    const auto back = read_aux_corpus(in);
    EXPECT_EQ(back.docs, aux.docs);
    std::istringstream empty(R"({"id":"q","keywords":[]})");
    EXPECT_THROW(read_aux_corpus(empty), FormatError);
    std::istringstream no_id(R"({"keywords":["x"]})");
    EXPECT_THROW(read_aux_corpus(no_id), FormatError);
}

TEST(DatasetFile, RoundTripIsExact) {
    const auto p = generate_synthetic(30, 20, 3, 1.0, 2);
    std::ostringstream out;
    write_dataset(out, p.data);
    std::istringstream in(out.str());
    const Dataset back = read_dataset(in);
    EXPECT_EQ(back.X, p.data.X);
    EXPECT_EQ(back.y, p.data.y);
    EXPECT_EQ(back.feature_names, p.data.feature_names);
    EXPECT_EQ(back.categories, p.data.categories);
    std::ostringstream again;
    write_dataset(again, back);
    EXPECT_EQ(again.str(), out.str());

    std::istringstream truncated(out.str().substr(0, 50));
    EXPECT_THROW(read_dataset(truncated), FormatError);
    std::istringstream wrong(R"({"format":"elicit-dataset","version":2})");
    EXPECT_THROW(read_dataset(wrong), FormatError);
}

TEST(DescriptorFile, RoundTripAndHeader) {
    DescriptorMatrix z;
    z.feature_names = {"a", "with,comma"};
    z.Z.resize(2, 3);
    z.Z << 0.1, 0, 1.0 / 3.0, 0, 2.5, 1e-17;
    std::ostringstream out;
    write_descriptors(out, z);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "feature,0,1,2");
    std::istringstream in(out.str());
    const auto back = read_descriptors(in);
    EXPECT_EQ(back.Z, z.Z);
    EXPECT_EQ(back.feature_names, z.feature_names);

    std::istringstream bad_header("name,0,1\na,1,2\n");
    EXPECT_THROW(read_descriptors(bad_header), FormatError);
    std::istringstream ragged("feature,0,1\na,1\n");
    EXPECT_THROW(read_descriptors(ragged), FormatError);
}

TEST(ChainFile, RoundTrip) {
    const auto p = generate_synthetic(6, 20, 2, 1.0, 3);
    SamplerConfig cfg;
    cfg.iterations = 200;
    cfg.burn_in = 100;
    cfg.fixed_sigma = 0.5;
    const auto chain = sample_posterior(p.split.train, RelevanceVector(6), cfg, 77);
    std::ostringstream out;
    write_chain(out, chain);
    const std::string text = out.str();
    EXPECT_EQ(text.rfind("# seed=77\n", 0), 0u);
    EXPECT_NE(text.find("w_1,w_2,w_3,w_4,w_5,w_6,a,xi,sigma\n"), std::string::npos);
    std::istringstream in(text);
    const auto back = read_chain(in);
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.config.fixed_sigma, 0.5);
    EXPECT_FALSE(back.config.fixed_a.has_value());
    ASSERT_EQ(back.samples.size(), chain.samples.size());
    for (std::size_t i = 0; i < chain.samples.size(); ++i) {
        EXPECT_EQ(back.samples[i].w, chain.samples[i].w);
        EXPECT_EQ(back.samples[i].xi, chain.samples[i].xi);
    }
    std::istringstream no_meta("w_1,a,xi,sigma\n0,2,0.1,1\n");
    EXPECT_THROW(read_chain(no_meta), FormatError);
}

TEST(Files, MissingFileIsAFormatError) {
    EXPECT_THROW(read_file("/nonexistent/elicit/file"), FormatError);
}

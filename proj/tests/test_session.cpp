#include "elicit/errors.hpp"
#include "elicit/session.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace elicit;
using elicit::testing::fast_config;
using elicit::testing::small_problem;

namespace {

std::vector<Response> answer_all(const std::vector<std::size_t>& q, const std::vector<std::uint8_t>& truth) {
    std::vector<Response> out;
    for (auto j : q) out.push_back({j, truth[j]});
    return out;
}

std::vector<Response> all_negative(const std::vector<std::size_t>& q) {
    std::vector<Response> out;
    for (auto j : q) out.push_back({j, 0});
    return out;
}

} // namespace

TEST(Condition, Codes) {
    EXPECT_EQ(condition_code(Condition::RandomOrder), "c2");
    EXPECT_EQ(parse_condition("c3"), Condition::UserModelGuided);
    EXPECT_EQ(parse_condition("NonInteractive"), Condition::NonInteractive);
    EXPECT_THROW(parse_condition("c4"), ContractError);
}

TEST(Session, NonInteractiveIsTerminalImmediately) {
    const auto s = small_problem(1);
    Session session = Session::create(s.data, Condition::NonInteractive, fast_config(), 3);
    EXPECT_TRUE(session.terminal());
    EXPECT_EQ(session.mse_history().size(), 1u);
    EXPECT_THROW(session.next_query(), StateError);
}

TEST(Session, SameSeedSameStart) {
    const auto s = small_problem(2);
    Session a = Session::create(s.data, Condition::UserModelGuided, fast_config(), 9);
    Session b = Session::create(s.data, Condition::UserModelGuided, fast_config(), 9);
    EXPECT_EQ(a.mse_history(), b.mse_history());
    EXPECT_EQ(a.next_query(), b.next_query());
}

TEST(Session, GuidedFirstBatchIsTopInitialUcb) {
    const auto s = small_problem(3);
    Session session = Session::create(s.data, Condition::UserModelGuided, fast_config(), 4);
    const auto expected = session.user_model().select(session.user_model().estimate(1), 4);
    EXPECT_EQ(session.next_query(), expected);
    EXPECT_EQ(session.pending(), expected);
}

TEST(Session, RandomOrderQueriesTwoHundredDistinctFeatures) {
    const auto p = generate_synthetic(457, 40, 5, 1.0, 4);
    const AuxCorpus aux = generate_aux_corpus(p.data.feature_names, p.truth, 400, 4);
    SessionData data{std::make_shared<const Dataset>(p.split.train), std::make_shared<const Dataset>(p.split.test),
                     std::make_shared<const DescriptorMatrix>(build_descriptors(aux, p.data.feature_names, 5, 200, 4))};
    SessionConfig cfg;
    cfg.sampler.iterations = 20;
    cfg.sampler.burn_in = 10;
    Session a = Session::create(data, Condition::RandomOrder, cfg, 8);
    Session b = Session::create(data, Condition::RandomOrder, cfg, 8);
    std::set<std::size_t> seen;
    while (!a.terminal()) {
        const auto q = a.next_query();
        EXPECT_EQ(b.next_query(), q);
        for (auto j : q) EXPECT_TRUE(seen.insert(j).second);
        a.submit_feedback(all_negative(q));
        b.submit_feedback(all_negative(q));
    }
    EXPECT_EQ(seen.size(), 200u);
    EXPECT_EQ(a.iteration(), 20);
    EXPECT_EQ(a.mse_history().size(), 21u);
}

TEST(Session, NegativeAnswersLeaveThePredictionModelUnchanged) {
    const auto s = small_problem(5);
    Session session = Session::create(s.data, Condition::RandomOrder, fast_config(), 6);
    const auto q = session.next_query();
    const auto r = session.submit_feedback(all_negative(q));
    EXPECT_EQ(session.mse_history()[1], session.mse_history()[0]);
    EXPECT_EQ(r.n_relevant, 0u);
    EXPECT_EQ(session.user_model().feedback().size(), q.size());
}

TEST(Session, RelevanceFollowsPositiveAnswersAndIsMonotone) {
    const auto s = small_problem(6);
    Session session = Session::create(s.data, Condition::UserModelGuided, fast_config(5, 4), 2);
    std::size_t last = 0;
    std::set<std::size_t> positives;
    while (!session.terminal()) {
        const auto q = session.next_query();
        const auto responses = answer_all(q, s.problem.truth);
        for (const auto& r : responses)
            if (r.relevant) positives.insert(r.feature);
        session.submit_feedback(responses);
        EXPECT_GE(session.relevance().n_plus(), last);
        last = session.relevance().n_plus();
        for (std::size_t j = 0; j < session.relevance().size(); ++j)
            EXPECT_EQ(session.relevance()[j], positives.contains(j));
    }
    EXPECT_EQ(session.mse_history().size(), 6u);
    EXPECT_EQ(session.transcript().size(), 5u);
}

TEST(Session, MarkingTheStrongestFeatureRelevantLowersMse) {
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto p = generate_synthetic(60, 80, 4, 1.0, seed);
        std::size_t best = 0;
        for (std::size_t j = 0; j < 60; ++j)
            if (p.true_weights(static_cast<Eigen::Index>(j)) > p.true_weights(static_cast<Eigen::Index>(best)))
                best = j;
        const Eigen::MatrixXd z = Eigen::MatrixXd::Identity(60, 60);
        auto d = std::make_shared<DescriptorMatrix>();
        d->Z = z;
        d->feature_names = p.data.feature_names;
        SessionData data{std::make_shared<const Dataset>(p.split.train),
                         std::make_shared<const Dataset>(p.split.test), d};
        SessionConfig cfg;
        cfg.batch_size = 60;
        Session session = Session::create(data, Condition::RandomOrder, cfg, seed);
        const auto q = session.next_query();
        std::vector<Response> responses;
        for (auto j : q) responses.push_back({j, j == best ? 1 : 0});
        session.submit_feedback(responses);
        improved += session.mse_history()[1] < session.mse_history()[0];
    }
    EXPECT_GE(improved, 18);
}

TEST(Session, StopsWhenFeaturesRunOut) {
    const auto s = small_problem(7, 10, 30, 2);
    Session session = Session::create(s.data, Condition::RandomOrder, fast_config(20, 4), 1);
    int rounds = 0;
    while (!session.terminal()) {
        session.submit_feedback(all_negative(session.next_query()));
        ++rounds;
    }
    EXPECT_EQ(rounds, 3);  // 4 + 4 + 2
    EXPECT_EQ(session.user_model().num_unqueried(), 0u);
}

TEST(Session, ContractAndStateErrors) {
    const auto s = small_problem(8);
    Session session = Session::create(s.data, Condition::UserModelGuided, fast_config(), 1);
    EXPECT_THROW(session.submit_feedback(std::vector<Response>{}), StateError);
    const auto q = session.next_query();
    EXPECT_THROW(session.next_query(), StateError);

    auto partial = all_negative(q);
    partial.pop_back();
    EXPECT_THROW(session.submit_feedback(partial), ContractError);
    auto stray = all_negative(q);
    stray[0].feature = (q[0] + 1) % 40;
    while (std::find(q.begin(), q.end(), stray[0].feature) != q.end()) stray[0].feature = (stray[0].feature + 1) % 40;
    EXPECT_THROW(session.submit_feedback(stray), ContractError);
    auto nonbinary = all_negative(q);
    nonbinary[0].relevant = 2;
    EXPECT_THROW(session.submit_feedback(nonbinary), ContractError);

    // Rejected submissions leave the session untouched.
    EXPECT_EQ(session.iteration(), 0);
    EXPECT_EQ(session.pending(), q);
    session.submit_feedback(all_negative(q));
    EXPECT_EQ(session.iteration(), 1);
}

TEST(Session, DimensionMismatchIsRejected) {
    const auto s = small_problem(9);
    auto bad = s.data;
    auto z = std::make_shared<DescriptorMatrix>(*s.data.descriptors);
    z->Z.conservativeResize(z->Z.rows() - 1, Eigen::NoChange);
    z->feature_names.pop_back();
    bad.descriptors = z;
    EXPECT_THROW(Session::create(bad, Condition::RandomOrder, fast_config(), 1), ContractError);
    bad = s.data;
    bad.test = nullptr;
    EXPECT_THROW(Session::create(bad, Condition::RandomOrder, fast_config(), 1), ContractError);
}

TEST(SessionSnapshot, RestoreThenQueryMatches) {
    const auto s = small_problem(10);
    Session a = Session::create(s.data, Condition::UserModelGuided, fast_config(4, 4), 12, "x");
    a.submit_feedback(answer_all(a.next_query(), s.problem.truth));
    Session b = Session::restore(a.snapshot(), s.data);
    EXPECT_EQ(b.snapshot(), a.snapshot());
    EXPECT_EQ(b.next_query(), a.next_query());
    EXPECT_EQ(b.snapshot(), a.snapshot());  // pending query survives too
    Session c = Session::restore(a.snapshot(), s.data);
    const auto q = a.pending().value();
    a.submit_feedback(answer_all(q, s.problem.truth));
    c.submit_feedback(answer_all(q, s.problem.truth));
    EXPECT_EQ(a.mse_history(), c.mse_history());
    EXPECT_EQ(a.snapshot(), c.snapshot());
}

TEST(SessionSnapshot, TranscriptReplayIsBitIdentical) {
    const auto s = small_problem(11);
    Session a = Session::create(s.data, Condition::RandomOrder, fast_config(3, 5), 5, "r");
    while (!a.terminal()) a.submit_feedback(answer_all(a.next_query(), s.problem.truth));

    Session b = Session::create(s.data, Condition::RandomOrder, fast_config(3, 5), 5, "r");
    for (const auto& [query, responses] : a.transcript()) {
        ASSERT_EQ(b.next_query(), query);
        b.submit_feedback(responses);
    }
    EXPECT_EQ(a.mse_history(), b.mse_history());
    EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(SessionSnapshot, CorruptRecordsAreRejected) {
    const auto s = small_problem(12);
    Session a = Session::create(s.data, Condition::RandomOrder, fast_config(), 1);
    const std::string snap = a.snapshot();
    EXPECT_THROW(Session::restore(snap.substr(0, snap.size() - 10), s.data), FormatError);
    EXPECT_THROW(Session::restore("", s.data), FormatError);

    std::string wrong_version = snap;
    const auto at = wrong_version.rfind("\"version\":1");
    ASSERT_NE(at, std::string::npos);
    wrong_version.replace(at, 11, "\"version\":7");
    EXPECT_THROW(Session::restore(wrong_version, s.data), FormatError);

    const auto other = small_problem(12, 41);
    EXPECT_THROW(Session::restore(snap, other.data), FormatError);
}

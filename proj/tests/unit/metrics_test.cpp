#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "equirec/metrics.hpp"
#include "equirec/synth.hpp"
#include "fixtures.hpp"

namespace equirec {
namespace {

Suggestion sug(const NodeId& s, const NodeId& t) { return Suggestion{s, t, SuggestionSource::Collab, 0.5, {}, 0.5, 0}; }

const MetricReport* cell(const std::vector<MetricReport>& reports, std::optional<NodeKind> c,
                         std::optional<GradeBand> g) {
    for (const auto& r : reports) {
        if (r.category == c && r.grade_band == g) return &r;
    }
    return nullptr;
}

TEST(MetricsTest, CoverageExamples) {
    std::vector<NodeId> targets;
    for (int i = 0; i < 10; ++i) targets.push_back("t" + std::to_string(i));
    const std::vector<Suggestion> four = {sug("a", "t0"), sug("b", "t0"), sug("a", "t1"), sug("a", "t2"),
                                          sug("c", "t3")};
    EXPECT_DOUBLE_EQ(coverage(four, targets), 0.4);
    EXPECT_DOUBLE_EQ(coverage({}, targets), 0.0);
    std::vector<Suggestion> all;
    for (const auto& t : targets) all.push_back(sug("a", t));
    EXPECT_DOUBLE_EQ(coverage(all, targets), 1.0);
    try {
        coverage(four, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTargetSet);
    }
}

TEST(MetricsTest, PrecisionExamples) {
    const std::vector<Suggestion> s = {sug("a", "t0"), sug("a", "t1"), sug("a", "t2"), sug("a", "t3"),
                                       sug("a", "t4")};
    const std::vector<Reaction> r = {{"a", "t0", Polarity::Positive, 1},
                                     {"a", "t1", Polarity::Positive, 1},
                                     {"a", "t2", Polarity::Positive, 1},
                                     {"a", "t3", Polarity::Negative, 1}};
    EXPECT_DOUBLE_EQ(*precision(s, ReactionIndex(r)), 0.75);
    EXPECT_EQ(precision(s, ReactionIndex{}), std::nullopt);
    EXPECT_DOUBLE_EQ(*precision(s, ReactionIndex(std::span(r).first(3))), 1.0);
    // Reactions outside the suggestion set do not count.
    const std::vector<Reaction> stray = {{"b", "t0", Polarity::Negative, 1}};
    EXPECT_EQ(precision(s, ReactionIndex(stray)), std::nullopt);
}

TEST(MetricsTest, AveragePrecisionExamples) {
    const std::vector<RankedList> one = {{"a", {"A", "B", "C"}}};
    const std::vector<Reaction> ac = {{"a", "A", Polarity::Positive, 1}, {"a", "C", Polarity::Positive, 1}};
    EXPECT_NEAR(*mean_average_precision(one, ReactionIndex(ac)), 0.833333, 1e-6);

    const std::vector<Reaction> all = {{"a", "A", Polarity::Positive, 1},
                                       {"a", "B", Polarity::Positive, 1},
                                       {"a", "C", Polarity::Positive, 1}};
    EXPECT_DOUBLE_EQ(*mean_average_precision(one, ReactionIndex(all)), 1.0);

    const std::vector<Reaction> none = {{"a", "B", Polarity::Negative, 1}};
    EXPECT_DOUBLE_EQ(*mean_average_precision(one, ReactionIndex(none)), 0.0);
    EXPECT_EQ(mean_average_precision(one, ReactionIndex{}), std::nullopt);
}

TEST(MetricsTest, PersonalizationExamples) {
    const std::vector<RankedList> same = {{"a", {"A", "B"}}, {"b", {"B", "A"}}};
    EXPECT_DOUBLE_EQ(*personalization_rate(same), 0.0);
    const std::vector<RankedList> disjoint = {{"a", {"A"}}, {"b", {"B"}}};
    EXPECT_DOUBLE_EQ(*personalization_rate(disjoint), 1.0);
    const std::vector<RankedList> overlap = {{"a", {"A", "B"}}, {"b", {"B", "C"}}};
    EXPECT_NEAR(*personalization_rate(overlap), 0.666667, 1e-6);
    EXPECT_EQ(personalization_rate(std::vector<RankedList>{{"a", {"A"}}}), std::nullopt);
}

TEST(MetricsTest, PersonalizationIsPermutationInvariant) {
    std::vector<RankedList> lists = {{"a", {"A", "B", "C"}}, {"b", {"B", "D"}}, {"c", {"E"}}, {"d", {"A", "E"}}};
    const auto base = *personalization_rate(lists);
    std::mt19937 gen(3);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(lists.begin(), lists.end(), gen);
        for (auto& l : lists) std::shuffle(l.targets.begin(), l.targets.end(), gen);
        EXPECT_NEAR(*personalization_rate(lists), base, 1e-12);
    }
}

TEST(MetricsTest, RankedListsKeepFirstOccurrence) {
    const std::vector<Suggestion> log = {sug("b", "x"), sug("a", "y"), sug("b", "z"), sug("b", "x")};
    const auto lists = ranked_lists(log);
    ASSERT_EQ(lists.size(), 2u);
    EXPECT_EQ(lists[0].student_id, "a");
    EXPECT_EQ(lists[1].targets, (std::vector<NodeId>{"x", "z"}));
}

TEST(MetricsTest, ThreeUserFixture) {
    const auto d = testing::metrics_dataset();
    const auto reports = metric_sweep(d, d.suggestions);
    ASSERT_EQ(reports.size(), 8u);

    const auto* all = cell(reports, std::nullopt, std::nullopt);
    ASSERT_NE(all, nullptr);
    EXPECT_EQ(&reports.front(), all);
    EXPECT_NEAR(all->coverage, 4.0 / 10.0, 1e-6);
    EXPECT_NEAR(*all->precision, 3.0 / 4.0, 1e-6);
    EXPECT_NEAR(*all->map, ((1.0 + 2.0 / 3.0) / 2.0 + 1.0 / 2.0) / 2.0, 1e-6);
    EXPECT_NEAR(*all->personalization, 1.0 - (1.0 / 4.0 + 1.0 / 3.0 + 1.0 / 2.0) / 3.0, 1e-6);
    EXPECT_EQ(all->n_suggestions, 6u);
    EXPECT_EQ(all->n_reacted, 4u);
    EXPECT_EQ(all->n_users, 3u);

    const auto* book = cell(reports, NodeKind::Book, std::nullopt);
    ASSERT_NE(book, nullptr);
    EXPECT_DOUBLE_EQ(book->coverage, all->coverage);
    EXPECT_EQ(book->map, all->map);

    const auto* elem = cell(reports, std::nullopt, GradeBand::Elementary);
    ASSERT_NE(elem, nullptr);
    EXPECT_NEAR(elem->coverage, 0.3, 1e-6);
    EXPECT_NEAR(*elem->precision, 1.0, 1e-6);
    EXPECT_NEAR(*elem->map, 5.0 / 6.0, 1e-6);
    EXPECT_EQ(elem->personalization, std::nullopt);

    const auto* mid = cell(reports, NodeKind::Book, GradeBand::Middle);
    ASSERT_NE(mid, nullptr);
    EXPECT_NEAR(*mid->precision, 0.5, 1e-6);
    EXPECT_NEAR(*mid->map, 0.5, 1e-6);
    EXPECT_NEAR(mid->coverage, 0.2, 1e-6);

    const auto* high = cell(reports, std::nullopt, GradeBand::High);
    ASSERT_NE(high, nullptr);
    EXPECT_NEAR(high->coverage, 0.1, 1e-6);
    EXPECT_EQ(high->precision, std::nullopt);
    EXPECT_EQ(high->map, std::nullopt);
    EXPECT_EQ(high->n_reacted, 0u);

    EXPECT_EQ(cell(reports, NodeKind::Video, std::nullopt), nullptr);
}

TEST(MetricsTest, MapCutoff) {
    const auto d = testing::metrics_dataset();
    const auto lists = ranked_lists(d.suggestions);
    const ReactionIndex index(d.reactions);
    // Top-1: u1 [A] relevant, u2 [B] disliked, u3 unreacted.
    EXPECT_NEAR(*mean_average_precision(lists, index, 1), 0.5, 1e-12);
}

TEST(MetricsTest, SweepScoping) {
    Dataset d;
    d.nodes = {testing::student("m1", GradeBand::Middle), testing::node("b1", NodeKind::Book),
               testing::node("b2", NodeKind::Book), testing::node("v1", NodeKind::Video)};
    normalize(d);
    const std::vector<Suggestion> log = {sug("m1", "b1")};
    const auto reports = metric_sweep(d, log);
    ASSERT_EQ(reports.size(), 4u);
    EXPECT_NE(cell(reports, NodeKind::Book, GradeBand::Middle), nullptr);
    EXPECT_NE(cell(reports, NodeKind::Book, std::nullopt), nullptr);
    EXPECT_NE(cell(reports, std::nullopt, GradeBand::Middle), nullptr);
    EXPECT_NE(cell(reports, std::nullopt, std::nullopt), nullptr);
    EXPECT_NEAR(cell(reports, NodeKind::Book, std::nullopt)->coverage, 0.5, 1e-12);
    EXPECT_NEAR(cell(reports, std::nullopt, std::nullopt)->coverage, 1.0 / 3.0, 1e-12);
    EXPECT_TRUE(metric_sweep(d, {}).empty());
}

TEST(MetricsTest, CohortInvariants) {
    CohortConfig config;
    config.n_students = 60;
    config.seed = 4;
    config.reaction_rate = 0.8;
    const auto d = generate_cohort(config).dataset;
    const auto reports = metric_sweep(d, d.suggestions);
    ASSERT_FALSE(reports.empty());
    for (const auto& r : reports) {
        for (auto v : {std::optional(r.coverage), r.precision, r.map, r.personalization}) {
            if (!v) continue;
            EXPECT_GE(*v, 0.0);
            EXPECT_LE(*v, 1.0);
        }
        EXPECT_EQ(r.precision.has_value(), r.n_reacted > 0);
    }
    // Pooled precision is the reaction-weighted mean of the per-category ones.
    double weighted = 0;
    std::size_t reacted = 0;
    for (const auto& r : reports) {
        if (!r.category || r.grade_band || !r.precision) continue;
        weighted += *r.precision * static_cast<double>(r.n_reacted);
        reacted += r.n_reacted;
    }
    const auto* all = cell(reports, std::nullopt, std::nullopt);
    EXPECT_EQ(all->n_reacted, reacted);
    EXPECT_NEAR(*all->precision, weighted / static_cast<double>(reacted), 1e-12);
}

TEST(MetricsTest, JsonAndTable) {
    const auto d = testing::metrics_dataset();
    const auto reports = metric_sweep(d, d.suggestions);
    const auto j = metrics_to_json(reports);
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j.size(), reports.size());
    EXPECT_EQ(j[0].at("scope").at("category"), "All");
    EXPECT_EQ(j[0].at("scope").at("grade_band"), "All");
    const auto& high = j[3];
    EXPECT_EQ(high.at("scope").at("grade_band"), "High");
    EXPECT_TRUE(high.at("precision").is_null());
    const auto table = format_metric_table(reports);
    EXPECT_NE(table.find("Elementary"), std::string::npos);
    EXPECT_NE(table.find("0.7500"), std::string::npos) << table;
}

}  // namespace
}  // namespace equirec

#include <fstream>

#include <gtest/gtest.h>

#include "equirec/dataset_io.hpp"
#include "equirec/synth.hpp"
#include "fixtures.hpp"

namespace equirec {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

void write(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    out << text;
}

std::string read(const fs::path& file) { return read_text_file(file); }

ErrorCode load_error(const fs::path& root, std::string* message = nullptr) {
    try {
        load_dataset(root);
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.code();
    }
    ADD_FAILURE() << "load succeeded";
    return ErrorCode::ConfigError;
}

const char* kNodes =
    "id,kind,label,grade_band\n"
    "s1,Student,Sam,Middle\n"
    "i1,Interest,Robots,\n"
    "b1,Book,Robot Book,\n";

TEST(DatasetIoTest, LoadsWorkedExampleFixture) {
    const auto d = load_dataset(testing::data_dir() / "worked_example");
    EXPECT_EQ(d.nodes.size(), 10u);
    EXPECT_EQ(d.edges.size(), 9u);
    EXPECT_TRUE(d.reactions.empty());
    EXPECT_TRUE(d.suggestions.empty());
    EXPECT_TRUE(d.profiles.empty());
    ASSERT_NE(d.find_edge("Student", "InterestA"), nullptr);
    EXPECT_DOUBLE_EQ(d.find_edge("Student", "InterestA")->weight, 1.0);
    EXPECT_DOUBLE_EQ(d.find_edge("InterestB", "Book")->weight, 0.85);
    EXPECT_EQ(d.find_node("Book")->label, "Introduction to Astronomy");
    auto expected = testing::worked_example_dataset();
    for (auto& n : expected.nodes) n.label = d.find_node(n.id)->label;
    EXPECT_EQ(d, expected);
}

TEST(DatasetIoTest, MissingRequiredFile) {
    TempDir dir;
    write(dir.path() / "nodes.csv", kNodes);
    EXPECT_EQ(load_error(dir.path()), ErrorCode::MissingFile);
}

TEST(DatasetIoTest, OptionalFilesDefaultToEmpty) {
    TempDir dir;
    write(dir.path() / "nodes.csv", kNodes);
    write(dir.path() / "edges.csv", "src,dst,kind,weight\ns1,i1,Accepted,1.000000\n");
    const auto d = load_dataset(dir.path());
    EXPECT_TRUE(d.reactions.empty());
    EXPECT_TRUE(d.suggestions.empty());
    EXPECT_EQ(d.edges.size(), 1u);
}

TEST(DatasetIoTest, ZeroWeightNamesTheRow) {
    TempDir dir;
    write(dir.path() / "nodes.csv", kNodes);
    write(dir.path() / "edges.csv", "src,dst,kind,weight\ns1,i1,Accepted,1.0\ni1,b1,SimilarTo,0.0\n");
    std::string message;
    EXPECT_EQ(load_error(dir.path(), &message), ErrorCode::IntegrityError);
    EXPECT_NE(message.find("edges.csv"), std::string::npos) << message;
    EXPECT_NE(message.find("row 3"), std::string::npos) << message;
}

TEST(DatasetIoTest, IntegrityErrorsNameFileAndRow) {
    struct Case {
        const char* file;
        std::string text;
        std::string row;
    };
    const std::vector<Case> cases = {
        {"edges.csv", "src,dst,kind,weight\ni1,i1,SimilarTo,0.5\n", "row 2"},
        {"edges.csv", "src,dst,kind,weight\ni1,ghost,SimilarTo,0.5\n", "row 2"},
        {"edges.csv", "src,dst,kind,weight\ni1,b1,SimilarTo,0.5\nb1,i1,SimilarTo,0.4\n", "row 3"},
        {"edges.csv", "src,dst,kind,weight\ni1,b1,SimilarTo,1.2\n", "row 2"},
        {"nodes.csv", "id,kind,label,grade_band\ns1,Student,Sam,\n", "row 2"},
        {"nodes.csv", "id,kind,label,grade_band\nb1,Book,B,High\n", "row 2"},
        {"nodes.csv", "id,kind,label,grade_band\nb1,Book,B,\nb1,Video,V,\n", "row 3"},
        {"profiles.csv",
         "student_id,gender,race_code,has_parents,is_homeless,is_migrant,is_immigrant,is_foster,is_gifted\n"
         "s1,F,7,Other,false,false,false,false,false\n",
         "row 2"},
        {"profiles.csv",
         "student_id,gender,race_code,has_parents,is_homeless,is_migrant,is_immigrant,is_foster,is_gifted\n"
         "b1,F,1,Other,false,false,false,false,false\n",
         "row 2"},
        {"reactions.jsonl", "{\"student_id\":\"s1\",\"target_id\":\"i1\",\"polarity\":\"Positive\",\"ts\":1}\n",
         "row 1"},
        {"suggestions.jsonl",
         "{\"student_id\":\"s1\",\"target_id\":\"b1\",\"source\":\"Content\",\"confidence\":0.5,"
         "\"reasoning\":[\"i1\",\"b1\"],\"score\":0.5,\"ts\":0}\n",
         "row 1"},
    };
    for (const auto& c : cases) {
        TempDir dir;
        write(dir.path() / "nodes.csv", kNodes);
        write(dir.path() / "edges.csv", "src,dst,kind,weight\n");
        write(dir.path() / c.file, c.text);
        std::string message;
        EXPECT_EQ(load_error(dir.path(), &message), ErrorCode::IntegrityError) << c.text;
        EXPECT_NE(message.find(c.file), std::string::npos) << message;
        EXPECT_NE(message.find(c.row), std::string::npos) << message;
    }
}

TEST(DatasetIoTest, SchemaErrors) {
    const std::vector<std::pair<const char*, std::string>> cases = {
        {"nodes.csv", "id,kind,label\ns1,Student,Sam\n"},
        {"nodes.csv", "id,kind,label,grade_band\nx,Planet,X,\n"},
        {"nodes.csv", "id,kind,label,grade_band\nx,Book,\"unterminated,\n"},
        {"edges.csv", "src,dst,kind,weight\ni1,b1,Likes,0.5\n"},
        {"edges.csv", "src,dst,kind,weight\ni1,b1,SimilarTo,heavy\n"},
        {"reactions.jsonl", "{not json}\n"},
        {"reactions.jsonl", "{\"student_id\":\"s1\",\"target_id\":\"b1\",\"polarity\":\"Meh\",\"ts\":1}\n"},
        {"profiles.csv",
         "student_id,gender,race_code,has_parents,is_homeless,is_migrant,is_immigrant,is_foster,is_gifted\n"
         "s1,F,1,Other,maybe,false,false,false,false\n"},
    };
    for (const auto& [file, text] : cases) {
        TempDir dir;
        write(dir.path() / "nodes.csv", kNodes);
        write(dir.path() / "edges.csv", "src,dst,kind,weight\n");
        write(dir.path() / file, text);
        EXPECT_EQ(load_error(dir.path()), ErrorCode::SchemaError) << file << ": " << text;
    }
}

TEST(DatasetIoTest, QuotedLabelsSurviveRoundTrip) {
    TempDir dir;
    auto d = testing::worked_example_dataset();
    d.nodes.push_back(EntityNode{"Quote", NodeKind::Book, "Say \"hi\", then\nleave", std::nullopt});
    normalize(d);
    save_dataset(d, dir.path());
    EXPECT_EQ(load_dataset(dir.path()), d);
}

TEST(DatasetIoTest, RoundTripIsIdempotent) {
    std::vector<Dataset> samples = {testing::worked_example_dataset(), testing::flagged_audit_dataset(),
                                    testing::metrics_dataset()};
    CohortConfig config;
    config.n_students = 30;
    config.seed = 11;
    samples.push_back(generate_cohort(config).dataset);
    for (std::uint64_t seed = 0; seed < 20; ++seed) samples.push_back(testing::random_graph(seed));

    for (const auto& d : samples) {
        TempDir a, b;
        save_dataset(d, a.path());
        const auto once = load_dataset(a.path());
        save_dataset(once, b.path());
        const auto twice = load_dataset(b.path());
        EXPECT_EQ(once, twice);
        EXPECT_EQ(testing::diff_trees(a.path(), b.path()), "");
        EXPECT_EQ(once.nodes, d.nodes);
        EXPECT_EQ(once.profiles, d.profiles);
        EXPECT_EQ(once.reactions, d.reactions);
        ASSERT_EQ(once.edges.size(), d.edges.size());
        for (std::size_t i = 0; i < d.edges.size(); ++i) {
            EXPECT_NEAR(once.edges[i].weight, d.edges[i].weight, 5e-7);
        }
    }
}

TEST(DatasetIoTest, EdgeWeightsUseSixDecimals) {
    auto d = testing::worked_example_dataset();
    const auto text = edges_csv(d);
    EXPECT_NE(text.find("Book,InterestB,SimilarTo,0.850000\n"), std::string::npos) << text;
    EXPECT_EQ(text.rfind("src,dst,kind,weight\n", 0), 0u);
}

TEST(DatasetIoTest, SaveOutputsAppendsInOrder) {
    TempDir dir;
    const auto d = testing::worked_example_dataset();
    save_dataset(d, dir.path());
    const auto file = dir.path() / "suggestions.jsonl";
    const auto before = read(file);
    save_outputs(d, {}, dir.path());
    EXPECT_EQ(read(file), before);

    std::vector<Suggestion> batch;
    for (const char* t : {"Book", "Major", "Video"}) {
        batch.push_back(Suggestion{"Student", t, SuggestionSource::Collab, 0.5, {}, 0.5, 4});
    }
    save_outputs(d, batch, dir.path());
    save_outputs(d, std::span(batch).first(1), dir.path());
    const auto text = read(file);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_LT(text.find("\"Book\""), text.find("\"Major\""));
    EXPECT_LT(text.find("\"Major\""), text.find("\"Video\""));
    EXPECT_FALSE(fs::exists(dir.path() / "suggestions.jsonl.tmp"));
    EXPECT_EQ(load_dataset(dir.path()).suggestions.size(), 4u);
}

TEST(DatasetIoTest, SaveOutputsCreatesMissingFile) {
    TempDir dir;
    const auto d = testing::worked_example_dataset();
    const std::vector<Suggestion> batch = {{"Student", "Book", SuggestionSource::Collab, 0.5, {}, 0.5, 0}};
    save_outputs(d, batch, dir.path());
    EXPECT_EQ(read(dir.path() / "suggestions.jsonl"), suggestions_jsonl(batch));
}

TEST(DatasetIoTest, WritesAreDeterministic) {
    const auto d = testing::flagged_audit_dataset();
    TempDir a, b;
    save_dataset(d, a.path());
    save_dataset(d, b.path());
    save_outputs(d, std::span(d.suggestions).first(3), a.path());
    save_outputs(d, std::span(d.suggestions).first(3), b.path());
    EXPECT_EQ(testing::diff_trees(a.path(), b.path()), "");
}

TEST(DatasetIoTest, SuggestionJsonShape) {
    const Suggestion s{"Student", "Book", SuggestionSource::Content, 0.85, {"Student", "InterestA", "InterestB", "Book"},
                       0.85, 2};
    EXPECT_EQ(to_json(s).dump(),
              R"({"student_id":"Student","target_id":"Book","source":"Content","confidence":0.85,)"
              R"("reasoning":["Student","InterestA","InterestB","Book"],"score":0.85,"ts":2})");
    const Reaction r{"Student", "Book", Polarity::Negative, 3};
    EXPECT_EQ(to_json(r).dump(), R"({"student_id":"Student","target_id":"Book","polarity":"Negative","ts":3})");
}

TEST(DatasetIoTest, ReadReactionsBatch) {
    TempDir dir;
    write(dir.path() / "batch.jsonl",
          "{\"student_id\":\"s1\",\"target_id\":\"b1\",\"polarity\":\"Positive\",\"ts\":4}\n\n"
          "{\"student_id\":\"s1\",\"target_id\":\"b2\",\"polarity\":\"Negative\",\"ts\":5}\n");
    const auto batch = read_reactions(dir.path() / "batch.jsonl");
    ASSERT_EQ(batch.size(), 2u);
    EXPECT_EQ(batch[1], (Reaction{"s1", "b2", Polarity::Negative, 5}));
    try {
        read_reactions(dir.path() / "absent.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingFile);
    }
}

TEST(DatasetIoTest, AtomicWriteFailsIntoMissingDirectory) {
    TempDir dir;
    try {
        write_file_atomic(dir.path() / "no" / "such" / "file.txt", "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}

}  // namespace
}  // namespace equirec

#include "tableqa/prompt.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "tableqa/ingest.hpp"
#include "test_util.hpp"

using namespace tableqa;

namespace {

DatasetRecord record_with(std::string passage, Table table) {
    DatasetRecord rec;
    rec.id = "target";
    rec.table = std::move(table);
    rec.passage = std::move(passage);
    rec.qa.push_back({"q?", "a", AnswerShape::Scalar});
    return rec;
}

SynthExample example_with(Table table, std::string question, std::string answer,
                          std::string id = "e") {
    SynthExample ex;
    ex.id = std::move(id);
    ex.category = table.category;
    ex.table = std::move(table);
    ex.question = std::move(question);
    ex.answer = std::move(answer);
    return ex;
}

const DatasetRecord& mango_record() {
    static const auto records =
        read_dataset(std::string(TABLEQA_FIXTURE_DIR) + "/dataset12.jsonl");
    for (const auto& r : records)
        if (r.id == "mango-prices") return r;
    throw std::runtime_error("fixture record missing");
}

}  // namespace

TEST(SerializeTable, CompactArrayOfArrays) {
    const Table t = testutil::make_table({"City", "Max"}, {{"Bengaluru", "28"}});
    EXPECT_EQ(serialize_table(t), R"([["City","Max"],["Bengaluru","28"]])");
    const Table minimal = testutil::make_table({"A", "B"}, {{"x", "y"}});
    EXPECT_EQ(serialize_table(minimal), R"([["A","B"],["x","y"]])");
}

TEST(SerializeTable, EscapesQuotesReversibly) {
    const Table t = testutil::make_table({"A", "B"}, {{"say \"hi\"", "back\\slash"}});
    const auto parsed = nlohmann::json::parse(serialize_table(t));
    EXPECT_EQ(parsed[1][0].get<std::string>(), "say \"hi\"");
    EXPECT_EQ(parsed[1][1].get<std::string>(), "back\\slash");
}

TEST(SerializeTable, RoundTripsThroughOcrParse) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 100; ++i) {
        const Table t = testutil::random_numeric_table(rng);
        const auto parsed = nlohmann::json::parse(serialize_table(t));
        OcrTable ocr;
        for (const auto& row : parsed)
            ocr.cells.push_back(row.get<std::vector<std::string>>());
        const Table back = parse_ocr_table(ocr);
        EXPECT_EQ(back.header, t.header);
        ASSERT_EQ(back.rows.size(), t.rows.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            for (std::size_t c = 0; c < t.rows[r].size(); ++c)
                EXPECT_EQ(back.rows[r][c].raw, t.rows[r][c].raw);
    }
}

TEST(BuildZeroShot, PassageTableQuestionAnswerLayout) {
    const auto rec = record_with("P", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const Prompt p = build_zero_shot(rec, "Q1");
    EXPECT_EQ(p.text, "P\n[[\"A\",\"B\"],[\"x\",\"y\"]]\nQ: Q1\nA:");
    EXPECT_EQ(p.mode, PromptMode::ZeroShot);
    EXPECT_TRUE(p.example_ids.empty());
}

TEST(BuildZeroShot, EmptyPassageLineElided) {
    const auto rec = record_with("", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    EXPECT_EQ(build_zero_shot(rec, "Q1").text, "[[\"A\",\"B\"],[\"x\",\"y\"]]\nQ: Q1\nA:");
}

TEST(BuildZeroShot, MatchesGoldenBytes) {
    const auto& rec = mango_record();
    const Prompt p = build_zero_shot(rec, rec.qa[0].question);
    EXPECT_EQ(p.text, testutil::read_file(std::string(TABLEQA_GOLDEN_DIR) + "/zero_shot.txt"));
}

TEST(BuildFewShot, MatchesGoldenBytes) {
    std::vector<SynthExample> examples;
    examples.push_back(example_with(
        testutil::make_table({"Item", "Cost"}, {{"Pen", "10"}, {"Book", "45"}},
                             Category::Financial),
        "What is the Cost of Pen?", "10", "g0"));
    examples.push_back(example_with(
        testutil::make_table({"Metal", "Rate"}, {{"Gold", "52,000"}, {"Silver", "61,500"}},
                             Category::Financial),
        "What is the maximum value in the column \"Rate\"?", "61500", "g1"));
    examples.push_back(example_with(
        testutil::make_table({"Fuel", "Price"}, {{"Petrol", "96.72"}, {"Diesel", "89.62"}},
                             Category::Financial),
        "What is the Price of Diesel?", "89.62", "g2"));
    const auto& rec = mango_record();
    const Prompt p = build_few_shot(rec, rec.qa[0].question, examples);
    EXPECT_EQ(p.text, testutil::read_file(std::string(TABLEQA_GOLDEN_DIR) + "/few_shot.txt"));
    EXPECT_EQ(p.example_ids, (std::vector<std::string>{"g0", "g1", "g2"}));
}

TEST(BuildFewShot, ZeroShotTextIsSuffix) {
    const auto rec = record_with("P", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const auto ex = example_with(testutil::make_table({"C", "D"}, {{"u", "v"}}), "eq", "ea");
    const Prompt few = build_few_shot(rec, "Q1", {ex});
    const Prompt zero = build_zero_shot(rec, "Q1");
    EXPECT_EQ(few.text, "[[\"C\",\"D\"],[\"u\",\"v\"]]\nQ: eq\nA: ea\n\n" + zero.text);
    EXPECT_TRUE(few.text.ends_with(zero.text));
}

TEST(BuildFewShot, ThreeExamplesThreeAnswerMarkers) {
    const auto rec = record_with("", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    std::vector<SynthExample> examples;
    for (int i = 0; i < 3; ++i)
        examples.push_back(example_with(testutil::make_table({"C", "D"}, {{"u", "v"}}),
                                        "eq" + std::to_string(i), "ea", "e" + std::to_string(i)));
    const Prompt p = build_few_shot(rec, "Q1", examples);
    EXPECT_EQ(count_occurrences(p.text, "A: "), 3u);
    EXPECT_TRUE(p.text.ends_with("A:"));
}

TEST(SuffixLawProperty, HoldsForRandomRecords) {
    std::mt19937_64 rng(37);
    for (int i = 0; i < 200; ++i) {
        const DatasetRecord rec = testutil::random_record(rng, i);
        std::vector<SynthExample> examples;
        const std::size_t n = 1 + rng() % 3;
        for (std::size_t e = 0; e < n; ++e)
            examples.push_back(example_with(testutil::random_numeric_table(rng),
                                            "eq" + std::to_string(e), "ea"));
        const Prompt zero = build_zero_shot(rec, rec.qa[0].question);
        const Prompt few = build_few_shot(rec, rec.qa[0].question, examples);
        ASSERT_TRUE(zero.text.ends_with("A:"));
        ASSERT_TRUE(few.text.ends_with("A:"));
        ASSERT_TRUE(few.text.ends_with(zero.text));
    }
}

TEST(BuildPrompts, ByteDeterministic) {
    const auto& rec = mango_record();
    EXPECT_EQ(build_zero_shot(rec, rec.qa[0].question).text,
              build_zero_shot(rec, rec.qa[0].question).text);
}

namespace {

std::vector<SynthExample> category_pool() {
    std::vector<SynthExample> pool;
    auto add = [&](Category cat, const std::string& id) {
        auto ex = example_with(testutil::make_table({"A", "B"}, {{"x", "1"}}, cat), "q", "a", id);
        pool.push_back(std::move(ex));
    };
    for (int i = 0; i < 5; ++i) add(Category::Sports, "s" + std::to_string(i));
    for (int i = 0; i < 5; ++i) add(Category::Weather, "w" + std::to_string(i));
    return pool;
}

}  // namespace

TEST(SelectExamples, SameCategoryWhenEnough) {
    const auto pool = category_pool();
    const auto picked = select_examples(pool, Category::Sports, 3, "rec-1");
    ASSERT_EQ(picked.size(), 3u);
    for (const auto& ex : picked) EXPECT_EQ(ex.category, Category::Sports);
}

TEST(SelectExamples, PadsFromOthersThenAnywhere) {
    std::vector<SynthExample> pool;
    pool.push_back(example_with(testutil::make_table({"A", "B"}, {{"x", "1"}}, Category::Sports),
                                "q", "a", "s0"));
    for (int i = 0; i < 2; ++i)
        pool.push_back(example_with(
            testutil::make_table({"A", "B"}, {{"x", "1"}}, Category::Others), "q", "a",
            "o" + std::to_string(i)));
    for (int i = 0; i < 2; ++i)
        pool.push_back(example_with(
            testutil::make_table({"A", "B"}, {{"x", "1"}}, Category::Weather), "q", "a",
            "w" + std::to_string(i)));
    const auto picked = select_examples(pool, Category::Sports, 4, "rec-1");
    ASSERT_EQ(picked.size(), 4u);
    EXPECT_EQ(picked[0].category, Category::Sports);
    EXPECT_EQ(picked[1].category, Category::Others);
    EXPECT_EQ(picked[2].category, Category::Others);
    EXPECT_EQ(picked[3].category, Category::Weather);
}

TEST(SelectExamples, SingletonPool) {
    std::vector<SynthExample> pool{
        example_with(testutil::make_table({"A", "B"}, {{"x", "1"}}), "q", "a", "only")};
    const auto picked = select_examples(pool, Category::Weather, 1, "rec-1");
    ASSERT_EQ(picked.size(), 1u);
    EXPECT_EQ(picked[0].id, "only");
}

TEST(SelectExamples, EmptyPoolThrows) {
    EXPECT_THROW(select_examples({}, Category::Sports, 3, "rec-1"), EmptyPool);
}

TEST(SelectExamples, DeterministicPerSeedKey) {
    const auto pool = category_pool();
    const auto a = select_examples(pool, Category::Sports, 5, "rec-42");
    const auto b = select_examples(pool, Category::Sports, 5, "rec-42");
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(FitBudget, UnderBudgetUnchanged) {
    const auto rec = record_with("P", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const Prompt p = build_zero_shot(rec, "Q1");
    EXPECT_EQ(fit_budget(p, p.text.size()).text, p.text);
    EXPECT_EQ(fit_budget(p, 100000).text, p.text);
}

TEST(FitBudget, DropsLeadingBlocksFirst) {
    const auto rec = record_with("passage text", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    std::vector<SynthExample> examples;
    for (int i = 0; i < 3; ++i)
        examples.push_back(example_with(testutil::make_table({"C", "D"}, {{"uu", "vv"}}),
                                        "eq" + std::to_string(i), "ea",
                                        "e" + std::to_string(i)));
    const Prompt p = build_few_shot(rec, "Q1", examples);
    const Prompt trimmed = fit_budget(p, p.text.size() - 1);
    EXPECT_EQ(trimmed.example_ids, (std::vector<std::string>{"e1", "e2"}));
    EXPECT_EQ(trimmed.dropped_example_ids, (std::vector<std::string>{"e0"}));
    EXPECT_LE(trimmed.text.size(), p.text.size() - 1);
    EXPECT_TRUE(trimmed.text.ends_with(build_zero_shot(rec, "Q1").text));
}

TEST(FitBudget, DowngradesToZeroShotWhenAllBlocksDropped) {
    const auto rec = record_with("", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const auto ex = example_with(testutil::make_table({"C", "D"}, {{"u", "v"}}), "eq", "ea", "e0");
    const Prompt p = build_few_shot(rec, "Q1", {ex});
    const Prompt trimmed = fit_budget(p, p.core.size());
    EXPECT_EQ(trimmed.mode, PromptMode::ZeroShot);
    EXPECT_TRUE(trimmed.example_ids.empty());
    EXPECT_EQ(trimmed.text, p.core);
}

TEST(FitBudget, TruncatesPassageFromStartWithMarker) {
    const std::string passage(200, 'p');
    const auto rec = record_with(passage, testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const Prompt p = build_zero_shot(rec, "Q1");
    const std::size_t budget = p.core.size() + 1 + 50;
    const Prompt trimmed = fit_budget(p, budget);
    EXPECT_EQ(trimmed.text.size(), budget);
    EXPECT_TRUE(trimmed.passage.starts_with("..."));
    EXPECT_TRUE(trimmed.text.ends_with(p.core));
    EXPECT_EQ(trimmed.passage_chars_dropped, passage.size() - (50 - 3));
    // tail of the passage is what survives
    EXPECT_TRUE(trimmed.passage.ends_with("ppp"));
}

TEST(FitBudget, MandatorySegmentsNeverAltered) {
    const auto rec = record_with(std::string(100, 'p'),
                                 testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const Prompt p = build_zero_shot(rec, "Q1");
    const Prompt trimmed = fit_budget(p, p.core.size());
    EXPECT_EQ(trimmed.text, p.core);  // passage fully dropped, core intact
    EXPECT_EQ(trimmed.passage_chars_dropped, 100u);
}

TEST(FitBudget, BudgetTooSmallForMandatorySegments) {
    const auto rec = record_with("", testutil::make_table({"A", "B"}, {{"x", "y"}}));
    const Prompt p = build_zero_shot(rec, "Q1");
    EXPECT_THROW(fit_budget(p, p.core.size() - 1), BudgetTooSmall);
}

#include "tableqa/backend.hpp"

#include <gtest/gtest.h>

#include <thread>

#include "tableqa/prompt.hpp"
#include "test_util.hpp"

using namespace tableqa;

namespace {

std::string weather_prompt(const std::string& question) {
    const Table t = testutil::make_table(
        {"City", "Min", "Max"}, {{"Bengaluru", "19", "28"}, {"Mysuru", "21", "32"}},
        Category::Weather);
    return serialize_table(t) + "\nQ: " + question + "\nA:";
}

}  // namespace

TEST(MockBackend, AnswersLookupWithLeadingSpace) {
    MockBackend mock;
    CompletionRequest req;
    req.prompt = weather_prompt("What is the Max of Bengaluru?");
    const auto resp = mock.complete(req);
    EXPECT_EQ(resp.text, " 28");
    EXPECT_FALSE(resp.cached);
    EXPECT_EQ(resp.backend, BackendKind::Mock);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(MockBackend, SummarizationEchoesDescription) {
    MockBackend mock;
    CompletionRequest req;
    req.prompt = "Summarize: In the row for Bengaluru, the Max is 28.\nSummary:";
    req.stop = {"\n"};
    EXPECT_EQ(mock.complete(req).text, " In the row for Bengaluru, the Max is 28.");
}

TEST(MockBackend, PureFunctionOfPrompt) {
    MockBackend mock;
    CompletionRequest req;
    req.prompt = weather_prompt("Which city has the highest Max?");
    EXPECT_EQ(mock.complete(req).text, mock.complete(req).text);
}

TEST(MockBackend, StripsStopSequences) {
    MockBackend mock;
    CompletionRequest req;
    req.prompt = weather_prompt("What is the Max of Bengaluru?");
    req.stop = {"8"};  // contrived: stop inside the oracle answer
    EXPECT_EQ(mock.complete(req).text, " 2");
}

TEST(CachedBackend, SecondIdenticalRequestHitsCache) {
    const auto dir = testutil::fresh_temp_dir("tableqa-cache");
    CachedBackend cached(dir, std::make_unique<MockBackend>());
    CompletionRequest req;
    req.prompt = weather_prompt("What is the Max of Bengaluru?");

    const auto first = cached.complete(req);
    EXPECT_FALSE(first.cached);
    EXPECT_EQ(cached.calls(), 1u);

    const auto second = cached.complete(req);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(second.text, first.text);
    EXPECT_EQ(cached.calls(), 1u);  // no second backend call
    EXPECT_EQ(cached.hits(), 1u);
    EXPECT_EQ(cached.misses(), 1u);
}

TEST(CachedBackend, DifferentParametersGetDistinctKeys) {
    const auto dir = testutil::fresh_temp_dir("tableqa-cache");
    CachedBackend cached(dir, std::make_unique<MockBackend>());
    CompletionRequest req;
    req.prompt = weather_prompt("What is the Max of Bengaluru?");
    cached.complete(req);
    req.temperature = 0.5;
    cached.complete(req);
    EXPECT_EQ(cached.calls(), 2u);

    std::size_t entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        (void)e;
        ++entries;
    }
    EXPECT_EQ(entries, 2u);
}

TEST(CachedBackend, WarmCacheMakesZeroBackendCalls) {
    const auto dir = testutil::fresh_temp_dir("tableqa-cache");
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 5; ++i) {
        CompletionRequest r;
        r.prompt = std::string(i, ' ') + weather_prompt("What is the Min of Mysuru?");
        reqs.push_back(r);
    }
    {
        CachedBackend warmup(dir, std::make_unique<MockBackend>());
        for (const auto& r : reqs) warmup.complete(r);
        EXPECT_EQ(warmup.calls(), reqs.size());
    }
    CachedBackend warm(dir, std::make_unique<MockBackend>());
    for (const auto& r : reqs) EXPECT_TRUE(warm.complete(r).cached);
    EXPECT_EQ(warm.calls(), 0u);
}

TEST(CachedBackend, CorruptEntryRaisesCacheCorrupt) {
    const auto dir = testutil::fresh_temp_dir("tableqa-cache");
    CachedBackend cached(dir, std::make_unique<MockBackend>());
    CompletionRequest req;
    req.prompt = weather_prompt("What is the Max of Mysuru?");
    cached.complete(req);

    for (const auto& entry : std::filesystem::directory_iterator(dir))
        testutil::write_file(entry.path(), "{not valid json");
    EXPECT_THROW(cached.complete(req), CacheCorrupt);
}

TEST(CachedBackend, SafeUnderConcurrentWorkers) {
    const auto dir = testutil::fresh_temp_dir("tableqa-cache");
    CachedBackend cached(dir, std::make_unique<MockBackend>());
    std::vector<std::string> prompts;
    for (int i = 0; i < 10; ++i)
        prompts.push_back(std::string(i, ' ') + weather_prompt("What is the Max of Bengaluru?"));

    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    for (int w = 0; w < 8; ++w) {
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i) {
                CompletionRequest req;
                req.prompt = prompts[i % prompts.size()];
                if (cached.complete(req).text != " 28") failures.fetch_add(1);
            }
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(failures.load(), 0);

    std::size_t entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        (void)e;
        ++entries;
    }
    EXPECT_EQ(entries, prompts.size());
    // duplicate misses are allowed, but every prompt was computed at least once
    EXPECT_GE(cached.calls(), prompts.size());
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableqa/backend.hpp"
#include "tableqa/errors.hpp"
#include "tableqa/ingest.hpp"
#include "tableqa/model.hpp"
#include "tableqa/prompt.hpp"

namespace tableqa {

// Templated natural-language rendering of one table row, optionally followed
// by a model-written summary of it.
struct RowDescription {
    std::size_t row_index = 0;
    std::string text;
    std::optional<std::string> summary;
};

// "In the row for <key>, the <header> is <value>, ..." over columns 1..n.
inline RowDescription describe_row(const Table& table, std::size_t row_index) {
    if (row_index >= table.rows.size())
        throw BadIndex("row " + std::to_string(row_index) + " of " +
                       std::to_string(table.rows.size()));
    const auto& row = table.rows[row_index];
    std::string text = std::string(mockspec::kRowKeyPrefix) + row[0].raw + ", ";
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        if (c > 1) text += ", ";
        text += "the " + table.header[c] + " is " + row[c].raw;
    }
    text += ".";
    return RowDescription{row_index, std::move(text), std::nullopt};
}

// Fills in `summary` via the completion backend. The mock backend echoes the
// description, so offline runs fall back to the identity summary.
inline RowDescription summarize_row(RowDescription desc, CompletionBackend& backend) {
    CompletionRequest req;
    req.prompt = std::string(mockspec::kSummarizePrefix) + desc.text +
                 std::string(mockspec::kSummarizeSuffix);
    req.stop = {"\n"};
    desc.summary = trim(backend.complete(req).text);
    return desc;
}

// "What is the <minimum|maximum|mean> value in the column \"<name>\"?"
inline SynthExample stat_question(const Table& table, const std::string& column, StatOp op) {
    SynthExample ex;
    ex.table = table;
    ex.category = table.category;
    ex.origin = SynthOrigin::StatTemplate;
    ex.question = "What is the " + stat_op_name(op) + " value in the column \"" + column + "\"?";
    ex.answer = stat_answer(table, column, op);  // throws NoNumericData
    return ex;
}

// "What is the <column> of <row key>?" answered by the raw cell. The key
// column itself cannot be asked about.
inline SynthExample lookup_question(const Table& table, std::size_t row_index,
                                    const std::string& column) {
    if (row_index >= table.rows.size())
        throw BadIndex("row " + std::to_string(row_index) + " of " +
                       std::to_string(table.rows.size()));
    const std::size_t col = column_index(table, column);
    if (col == 0) throw UnknownColumn(column + " (key column cannot be looked up)");
    SynthExample ex;
    ex.table = table;
    ex.category = table.category;
    ex.origin = SynthOrigin::LookupTemplate;
    ex.question = "What is the " + column + " of " + table.rows[row_index][0].raw + "?";
    ex.answer = table.rows[row_index][col].raw;
    return ex;
}

enum class QgMode { WithAnswer, WithEntity };

// Fixed instruction prompt for model-backed question generation. The mock
// backend parses these markers to reply deterministically.
inline std::string make_qg_prompt(const RowDescription& desc, QgMode mode,
                                  const std::string& hint) {
    const std::string& basis = desc.summary ? *desc.summary : desc.text;
    std::string prompt = "Write one question and its answer about the description below.\n";
    prompt += std::string(mockspec::kQgDescription) + basis + "\n";
    if (mode == QgMode::WithAnswer)
        prompt += std::string(mockspec::kQgAnswerConstraint) + hint + "\".\n";
    else
        prompt += std::string(mockspec::kQgEntityConstraint) + hint + "\".\n";
    prompt += std::string(mockspec::kQgMarker);
    return prompt;
}

// Generates one Q/A pair from a row description via the backend. WithAnswer
// pins the answer to `hint` verbatim; WithEntity asks for a question that
// mentions `hint`.
inline SynthExample llm_generate_qa(const Table& table, const RowDescription& desc,
                                    CompletionBackend& backend, QgMode mode,
                                    const std::string& hint) {
    CompletionRequest req;
    req.prompt = make_qg_prompt(desc, mode, hint);
    req.stop = {"\nQ:"};
    const std::string completion = backend.complete(req).text;

    const auto q_pos = completion.find("Q:");
    if (q_pos == std::string::npos) throw UnparseableCompletion(completion);
    const auto a_pos = completion.find("A:", q_pos + 2);
    if (a_pos == std::string::npos) throw UnparseableCompletion(completion);
    const std::string question = trim(completion.substr(q_pos + 2, a_pos - (q_pos + 2)));
    std::string answer = trim(completion.substr(a_pos + 2));
    if (mode == QgMode::WithAnswer) answer = hint;
    if (question.empty() || answer.empty()) throw UnparseableCompletion(completion);

    SynthExample ex;
    ex.table = table;
    ex.category = table.category;
    ex.origin = SynthOrigin::LlmGenerated;
    ex.question = question;
    ex.answer = answer;
    return ex;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
    std::uint64_t h = fnv1a(key);
    h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

// Emits up to `count` examples for one record: stat and lookup questions
// interleaved, each drawn without replacement from the table's question
// space. Tables without numeric columns yield lookups only.
inline void emit_for_record(const DatasetRecord& record, std::size_t count, std::uint64_t seed,
                            std::vector<SynthExample>& out) {
    const Table& t = record.table;
    std::mt19937_64 rng(mix_seed(seed, record.id));

    std::vector<std::pair<std::string, StatOp>> stats;
    for (const auto& column : t.header)
        if (!column_numbers(t, column).empty())
            for (StatOp op : {StatOp::Min, StatOp::Max, StatOp::Mean})
                stats.emplace_back(column, op);
    std::vector<std::pair<std::size_t, std::size_t>> lookups;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 1; c < t.header.size(); ++c) lookups.emplace_back(r, c);

    seeded_shuffle(stats, rng);
    seeded_shuffle(lookups, rng);

    std::size_t si = 0, li = 0;
    bool want_stat = !stats.empty();
    for (std::size_t emitted = 0; emitted < count && (si < stats.size() || li < lookups.size());
         ++emitted) {
        if (want_stat && si < stats.size()) {
            out.push_back(stat_question(t, stats[si].first, stats[si].second));
            ++si;
        } else if (li < lookups.size()) {
            out.push_back(lookup_question(t, lookups[li].first, t.header[lookups[li].second]));
            ++li;
        } else {
            out.push_back(stat_question(t, stats[si].first, stats[si].second));
            ++si;
        }
        want_stat = !want_stat;
    }
}

}  // namespace detail

// Builds a pool of `per_table` examples per record, deterministic for a
// fixed seed.
inline std::vector<SynthExample> build_pool(const std::vector<DatasetRecord>& records,
                                            std::size_t per_table, std::uint64_t seed) {
    std::vector<SynthExample> pool;
    for (const auto& record : records) detail::emit_for_record(record, per_table, seed, pool);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i].id = "p" + std::to_string(i);
    return pool;
}

// Builds a pool of about `total` examples by spreading the target across
// records (the first total % n records contribute one extra).
inline std::vector<SynthExample> build_pool_total(const std::vector<DatasetRecord>& records,
                                                  std::size_t total, std::uint64_t seed) {
    std::vector<SynthExample> pool;
    if (records.empty()) return pool;
    const std::size_t base = total / records.size();
    const std::size_t extra = total % records.size();
    for (std::size_t i = 0; i < records.size(); ++i)
        detail::emit_for_record(records[i], base + (i < extra ? 1 : 0), seed, pool);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i].id = "p" + std::to_string(i);
    return pool;
}

// Pool files are line-delimited JSON: {answer, category, origin, question, table}.
inline void write_pool(const std::vector<SynthExample>& pool,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + path.string());
    for (const auto& ex : pool) {
        nlohmann::json j{{"question", ex.question},
                         {"answer", ex.answer},
                         {"category", category_name(ex.category)},
                         {"origin", origin_name(ex.origin)},
                         {"table", detail::table_to_json(ex.table)}};
        out << j.dump() << '\n';
    }
}

inline std::vector<SynthExample> read_pool(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open pool file: " + path.string());
    std::vector<SynthExample> pool;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw MalformedRecord(line_number, "pool line is not JSON");
        try {
            SynthExample ex;
            ex.question = j.at("question").get<std::string>();
            ex.answer = j.at("answer").get<std::string>();
            ex.category = category_from_name(j.at("category").get<std::string>());
            ex.origin = origin_from_name(j.at("origin").get<std::string>());
            ex.table = detail::table_from_json(j.at("table"));
            ex.table.category = ex.category;
            ex.id = "p" + std::to_string(pool.size());
            if (ex.answer.empty()) throw Error("answer must be non-empty");
            pool.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_number, e.what());
        } catch (const Error& e) {
            throw MalformedRecord(line_number, e.what());
        }
    }
    return pool;
}

}  // namespace tableqa

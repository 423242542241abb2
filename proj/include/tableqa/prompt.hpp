#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableqa/errors.hpp"
#include "tableqa/model.hpp"
#include "tableqa/strutil.hpp"

namespace tableqa {

enum class PromptMode { ZeroShot, FewShot };

inline std::string prompt_mode_name(PromptMode m) {
    return m == PromptMode::ZeroShot ? "zero_shot" : "few_shot";
}

// A fully assembled prompt. The segment fields carry the structure so the
// budget guard can drop example blocks or trim the passage without touching
// the serialized target table, the question, or the "A:" suffix.
struct Prompt {
    std::string text;
    PromptMode mode = PromptMode::ZeroShot;
    std::vector<std::string> example_ids;

    std::vector<std::string> example_blocks;  // parallel to example_ids
    std::string passage;                      // empty means no passage line
    std::string core;                         // <table json>\nQ: <question>\nA:

    std::vector<std::string> dropped_example_ids;
    std::size_t passage_chars_dropped = 0;
};

// Compact JSON array-of-arrays: header first, then raw cell strings.
// Byte-deterministic; non-ASCII passes through unescaped.
inline std::string serialize_table(const Table& table) {
    auto arr = nlohmann::json::array();
    arr.push_back(table.header);
    for (const auto& row : table.rows) {
        auto r = nlohmann::json::array();
        for (const auto& cell : row) r.push_back(cell.raw);
        arr.push_back(std::move(r));
    }
    return arr.dump();
}

namespace detail {

inline std::string assemble_prompt(const Prompt& p) {
    std::string text;
    for (const auto& block : p.example_blocks) {
        text += block;
        text += "\n\n";
    }
    if (!p.passage.empty()) {
        text += p.passage;
        text += '\n';
    }
    text += p.core;
    return text;
}

inline std::string example_block(const SynthExample& ex) {
    return serialize_table(ex.table) + "\nQ: " + ex.question + "\nA: " + ex.answer;
}

// Fisher-Yates with an explicit index draw so the permutation is identical
// on every platform for a given seed.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace detail

// <passage>\n<table json>\nQ: <question>\nA:    (passage line omitted if empty)
inline Prompt build_zero_shot(const DatasetRecord& record, const std::string& question) {
    Prompt p;
    p.mode = PromptMode::ZeroShot;
    p.passage = record.passage;
    p.core = serialize_table(record.table) + "\nQ: " + question + "\nA:";
    p.text = detail::assemble_prompt(p);
    return p;
}

// Up to k pool examples matching `category`, in a stable seeded-shuffle order
// keyed by the target record id. Falls back to Others, then any category,
// when the matching pool is short.
inline std::vector<SynthExample> select_examples(const std::vector<SynthExample>& pool,
                                                 Category category, std::size_t k,
                                                 const std::string& seed_key) {
    if (pool.empty()) throw EmptyPool();
    std::mt19937_64 rng(fnv1a(seed_key));

    std::vector<std::size_t> matching, others, rest;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].category == category)
            matching.push_back(i);
        else if (pool[i].category == Category::Others)
            others.push_back(i);
        else
            rest.push_back(i);
    }
    detail::seeded_shuffle(matching, rng);
    detail::seeded_shuffle(others, rng);
    detail::seeded_shuffle(rest, rng);

    std::vector<SynthExample> out;
    for (const auto* group : {&matching, &others, &rest}) {
        for (std::size_t idx : *group) {
            if (out.size() >= k) break;
            out.push_back(pool[idx]);
        }
    }
    return out;
}

// Example blocks (<table json>\nQ: q\nA: a) joined by blank lines, then the
// zero-shot prompt; that prompt is always a literal suffix of the result.
inline Prompt build_few_shot(const DatasetRecord& record, const std::string& question,
                             const std::vector<SynthExample>& examples) {
    if (examples.empty()) throw EmptyPool();
    Prompt p = build_zero_shot(record, question);
    p.mode = PromptMode::FewShot;
    for (const auto& ex : examples) {
        p.example_ids.push_back(ex.id);
        p.example_blocks.push_back(detail::example_block(ex));
    }
    p.text = detail::assemble_prompt(p);
    return p;
}

// Character-budget guard. Whole leading example blocks go first; after that
// the passage is trimmed from its start behind a "..." marker. The serialized
// target table, question, and "A:" suffix are never altered.
inline Prompt fit_budget(const Prompt& prompt, std::size_t max_chars) {
    if (prompt.core.size() > max_chars) throw BudgetTooSmall(prompt.core.size(), max_chars);
    Prompt p = prompt;
    if (p.text.size() <= max_chars) return p;

    while (!p.example_blocks.empty() && detail::assemble_prompt(p).size() > max_chars) {
        p.dropped_example_ids.push_back(p.example_ids.front());
        p.example_ids.erase(p.example_ids.begin());
        p.example_blocks.erase(p.example_blocks.begin());
    }
    if (p.mode == PromptMode::FewShot && p.example_blocks.empty())
        p.mode = PromptMode::ZeroShot;  // every block was dropped

    if (detail::assemble_prompt(p).size() > max_chars && !p.passage.empty()) {
        static constexpr std::string_view kMarker = "...";
        const std::size_t fixed = p.core.size() + 1;  // "\n" after passage line
        if (max_chars > fixed + kMarker.size()) {
            const std::size_t room = max_chars - fixed - kMarker.size();
            if (room < p.passage.size()) {
                p.passage_chars_dropped = p.passage.size() - room;
                p.passage = std::string(kMarker) + p.passage.substr(p.passage.size() - room);
            }
        } else {
            p.passage_chars_dropped = p.passage.size();
            p.passage.clear();
        }
    }
    p.text = detail::assemble_prompt(p);
    return p;
}

}  // namespace tableqa

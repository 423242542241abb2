#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableqa/errors.hpp"
#include "tableqa/ingest.hpp"
#include "tableqa/model.hpp"
#include "tableqa/strutil.hpp"

namespace tableqa {
namespace detail {

// Finds the span of a balanced JSON array starting at `start` (which must
// point at '['), honouring string literals and escapes.
inline std::optional<std::size_t> balanced_array_end(const std::string& text, std::size_t start) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[') ++depth;
        else if (c == ']' && --depth == 0) return i;
    }
    return std::nullopt;
}

inline std::optional<Table> table_from_serialized(const std::string& candidate) {
    nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
    if (j.is_discarded() || !j.is_array() || j.size() < 2) return std::nullopt;
    OcrTable ocr;
    for (const auto& row : j) {
        if (!row.is_array() || row.empty()) return std::nullopt;
        std::vector<std::string> cells;
        for (const auto& cell : row) {
            if (!cell.is_string()) return std::nullopt;
            cells.push_back(cell.get<std::string>());
        }
        ocr.cells.push_back(std::move(cells));
    }
    try {
        return parse_ocr_table(ocr);
    } catch (const Error&) {
        return std::nullopt;
    }
}

// The prompt may carry several serialized tables (few-shot examples followed
// by the target); the question always refers to the last one.
inline Table last_serialized_table(const std::string& prompt) {
    std::optional<Table> last;
    for (std::size_t pos = prompt.find("[["); pos != std::string::npos;
         pos = prompt.find("[[", pos + 1)) {
        if (auto end = balanced_array_end(prompt, pos)) {
            if (auto t = table_from_serialized(prompt.substr(pos, *end - pos + 1))) {
                last = std::move(t);
                pos = *end;  // skip past this table
            }
        }
    }
    if (!last) throw NoTableFound();
    return *last;
}

inline std::string final_question(const std::string& prompt) {
    if (!prompt.ends_with("A:")) throw NoQuestionFound();
    const std::size_t a_pos = prompt.size() - 2;
    if (a_pos == 0 || prompt[a_pos - 1] != '\n') throw NoQuestionFound();
    const std::size_t q_pos = prompt.rfind("Q: ", a_pos);
    if (q_pos == std::string::npos || (q_pos != 0 && prompt[q_pos - 1] != '\n'))
        throw NoQuestionFound();
    return trim(prompt.substr(q_pos + 3, a_pos - 1 - (q_pos + 3)));
}

inline bool has_word(const std::string& haystack_lower, const std::string& word) {
    return keyword_hits(haystack_lower, word) > 0;
}

inline std::optional<StatOp> stat_op_from_text(const std::string& q_lower) {
    for (const char* w : {"minimum", "lowest", "smallest"})
        if (has_word(q_lower, w)) return StatOp::Min;
    for (const char* w : {"maximum", "highest", "largest"})
        if (has_word(q_lower, w)) return StatOp::Max;
    for (const char* w : {"mean", "average"})
        if (has_word(q_lower, w)) return StatOp::Mean;
    return std::nullopt;
}

// Resolves a free-text phrase against the header: exact (case-insensitive)
// first, then containment either way, preferring longer header names.
inline std::optional<std::string> resolve_column(const Table& table, const std::string& phrase) {
    const std::string p = to_lower(trim(phrase));
    if (p.empty()) return std::nullopt;
    for (const auto& h : table.header)
        if (to_lower(h) == p) return h;
    std::optional<std::string> best;
    for (const auto& h : table.header) {
        const std::string hl = to_lower(h);
        if (p.find(hl) != std::string::npos || hl.find(p) != std::string::npos)
            if (!best || h.size() > best->size()) best = h;
    }
    return best;
}

inline std::string strip_terminal_punct(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.back() == '?' || s.back() == '.' || s.back() == '!'))
        s.pop_back();
    return trim(s);
}

inline std::optional<std::string> quoted_segment(const std::string& text) {
    const auto open = text.find('"');
    if (open == std::string::npos) return std::nullopt;
    const auto close = text.find('"', open + 1);
    if (close == std::string::npos) return std::nullopt;
    return text.substr(open + 1, close - open - 1);
}

inline std::optional<std::size_t> find_row_by_key(const Table& table, const std::string& key) {
    const std::string k = to_lower(trim(key));
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (to_lower(trim(table.rows[r][0].raw)) == k) return r;
    return std::nullopt;
}

// "What is the <column> of <key>?"
inline std::optional<std::string> answer_lookup(const Table& table, const std::string& question) {
    const std::string q = strip_terminal_punct(question);
    const std::string ql = to_lower(q);
    if (!ql.starts_with("what is the ") && !ql.starts_with("what was the ")) return std::nullopt;
    const std::size_t head = ql.find(" the ") + 5;
    // Try every " of " split point so column names containing "of" still work.
    for (std::size_t of = q.rfind(" of "); of != std::string::npos && of > head;
         of = q.rfind(" of ", of - 1)) {
        const std::string column = trim(q.substr(head, of - head));
        const std::string key = trim(q.substr(of + 4));
        std::optional<std::string> header;
        for (const auto& h : table.header)
            if (equals_ci(h, column)) header = h;
        if (!header) continue;
        if (auto row = find_row_by_key(table, key))
            return table.rows[*row][column_index(table, *header)].raw;
    }
    return std::nullopt;
}

// "What is the <minimum|lowest|...> value in the column \"<name>\"?"
inline std::optional<std::string> answer_stat(const Table& table, const std::string& question) {
    const std::string ql = to_lower(question);
    if (ql.find("column") == std::string::npos) return std::nullopt;
    const auto op = stat_op_from_text(ql);
    if (!op) return std::nullopt;

    std::optional<std::string> phrase = quoted_segment(question);
    if (!phrase) {
        const auto pos = ql.find("column");
        phrase = strip_terminal_punct(question.substr(pos + 6));
    }
    const auto header = resolve_column(table, *phrase);
    if (!header) return std::nullopt;
    try {
        return stat_answer(table, *header, *op);
    } catch (const NoNumericData&) {
        return std::nullopt;
    }
}

// "Sort the <...> in increasing order of <column>." -> first-column values
// ordered by that column's numeric value.
inline std::optional<std::string> answer_sort(const Table& table, const std::string& question) {
    const std::string q = strip_terminal_punct(question);
    const std::string ql = to_lower(q);
    if (!ql.starts_with("sort ")) return std::nullopt;
    const auto of = ql.rfind(" order of ");
    if (of == std::string::npos) return std::nullopt;
    const bool descending = ql.find("decreasing") != std::string::npos ||
                            ql.find("descending") != std::string::npos;
    std::string phrase = trim(q.substr(of + 10));
    if (to_lower(phrase).starts_with("their ")) phrase = trim(phrase.substr(6));
    const auto header = resolve_column(table, phrase);
    if (!header) return std::nullopt;

    const std::size_t idx = column_index(table, *header);
    std::vector<std::pair<double, std::string>> keyed;
    for (const auto& row : table.rows)
        if (row[idx].numeric) keyed.emplace_back(*row[idx].numeric, trim(row[0].raw));
    if (keyed.empty()) return std::nullopt;
    std::stable_sort(keyed.begin(), keyed.end(),
                     [&](const auto& a, const auto& b) {
                         return descending ? a.first > b.first : a.first < b.first;
                     });
    std::string joined;
    for (const auto& [value, name] : keyed) {
        if (!joined.empty()) joined += ", ";
        joined += name;
    }
    return joined;
}

// "Which <...> has the <lowest|highest> <column>?" -> first-column value of
// the extremal row (first occurrence on ties).
inline std::optional<std::string> answer_comparison(const Table& table,
                                                    const std::string& question) {
    const std::string q = strip_terminal_punct(question);
    const std::string ql = to_lower(q);
    if (!ql.starts_with("which ")) return std::nullopt;
    StatOp op;
    std::size_t syn_pos = std::string::npos, syn_len = 0;
    for (const char* w : {"lowest", "least", "smallest", "minimum"}) {
        if (const auto pos = ql.find(w); pos != std::string::npos) {
            op = StatOp::Min; syn_pos = pos; syn_len = std::string(w).size();
            break;
        }
    }
    if (syn_pos == std::string::npos) {
        for (const char* w : {"highest", "most", "largest", "maximum", "greatest"}) {
            if (const auto pos = ql.find(w); pos != std::string::npos) {
                op = StatOp::Max; syn_pos = pos; syn_len = std::string(w).size();
                break;
            }
        }
    }
    if (syn_pos == std::string::npos) return std::nullopt;
    const auto header = resolve_column(table, q.substr(syn_pos + syn_len));
    if (!header) return std::nullopt;

    const std::size_t idx = column_index(table, *header);
    std::optional<double> best;
    std::string who;
    for (const auto& row : table.rows) {
        if (!row[idx].numeric) continue;
        const double v = *row[idx].numeric;
        if (!best || (op == StatOp::Min ? v < *best : v > *best)) {
            best = v;
            who = trim(row[0].raw);
        }
    }
    if (!best) return std::nullopt;
    return who;
}

}  // namespace detail

// Deterministic stand-in for a completion model: parses the last serialized
// table and the final question out of the prompt and answers lookup, column
// statistic, sort, and which-row comparison questions directly from the
// table. Anything outside that grammar yields the literal "UNKNOWN".
inline std::string oracle_answer(const std::string& prompt) {
    const Table table = detail::last_serialized_table(prompt);
    const std::string question = detail::final_question(prompt);
    if (auto a = detail::answer_stat(table, question)) return *a;
    if (auto a = detail::answer_lookup(table, question)) return *a;
    if (auto a = detail::answer_sort(table, question)) return *a;
    if (auto a = detail::answer_comparison(table, question)) return *a;
    return "UNKNOWN";
}

}  // namespace tableqa

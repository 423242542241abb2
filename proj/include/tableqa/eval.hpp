#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableqa/backend.hpp"
#include "tableqa/errors.hpp"
#include "tableqa/model.hpp"
#include "tableqa/prompt.hpp"
#include "tableqa/strutil.hpp"

namespace tableqa {

enum class Policy { Strict, Containment, Lenient };

inline std::string policy_name(Policy p) {
    switch (p) {
        case Policy::Strict: return "strict";
        case Policy::Lenient: return "lenient";
        default: return "containment";
    }
}

inline Policy policy_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "strict") return Policy::Strict;
    if (n == "containment") return Policy::Containment;
    if (n == "lenient") return Policy::Lenient;
    throw Error("unknown policy: " + name);
}

// Canonical view of an answer string: lowercased/trimmed text with wrapping
// quotes and terminal periods removed, every numeric token (multiset), and
// the comma-separated item list.
struct NormalizedAnswer {
    std::string text;
    std::vector<double> numbers;  // sorted; multiset semantics
    std::vector<std::string> items;
};

namespace detail {

struct NumberToken {
    double value;
    std::size_t pos;
};

// Numeric tokens in normalized text. Comma groups of 2-3 digits glued to the
// preceding digits count as thousands separators; a hyphen between digits
// splits the token, so "2021-22" yields 2021 and 22 rather than one number.
inline std::vector<NumberToken> extract_numbers(const std::string& s) {
    std::vector<NumberToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        const bool sign_start = (c == '-' || c == '+') && i + 1 < s.size() && is_digit(s[i + 1]) &&
                                (i == 0 || !is_alnum(s[i - 1]));
        if (!is_digit(c) && !sign_start) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        std::string cleaned;
        if (sign_start) {
            if (c == '-') cleaned += '-';
            ++i;
        }
        while (i < s.size() && is_digit(s[i])) cleaned += s[i++];
        while (i < s.size() && s[i] == ',') {
            std::size_t g = 0;
            while (i + 1 + g < s.size() && is_digit(s[i + 1 + g])) ++g;
            if (g < 2 || g > 3) break;
            for (std::size_t k = 0; k < g; ++k) cleaned += s[i + 1 + k];
            i += 1 + g;
        }
        if (i < s.size() && s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1])) {
            cleaned += '.';
            ++i;
            while (i < s.size() && is_digit(s[i])) cleaned += s[i++];
        }
        if (i < s.size() && s[i] == '%') ++i;  // magnitude only
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), value);
        if (ec == std::errc() && ptr == cleaned.data() + cleaned.size())
            out.push_back({value, start});
    }
    return out;
}

inline std::string strip_wrapping(std::string s) {
    for (;;) {
        const std::string before = s;
        s = trim(s);
        while (!s.empty() && s.back() == '.') s.pop_back();
        s = trim(s);
        if (s.size() >= 2) {
            const char f = s.front(), b = s.back();
            if ((f == '"' && b == '"') || (f == '\'' && b == '\''))
                s = s.substr(1, s.size() - 2);
        }
        if (s == before) return s;
    }
}

}  // namespace detail

// Idempotent: normalize(normalize(x).text) == normalize(x).
inline NormalizedAnswer normalize(const std::string& raw) {
    NormalizedAnswer n;
    n.text = detail::strip_wrapping(to_lower(raw));
    for (const auto& token : detail::extract_numbers(n.text)) n.numbers.push_back(token.value);
    std::sort(n.numbers.begin(), n.numbers.end());
    for (const auto& part : split(n.text, ',')) {
        const std::string item = trim(part);
        if (!item.empty()) n.items.push_back(item);
    }
    return n;
}

namespace detail {

inline bool number_subset(const std::vector<double>& gold, const std::vector<double>& pred) {
    if (gold.empty()) return false;
    return std::includes(pred.begin(), pred.end(), gold.begin(), gold.end());
}

inline bool numbers_intersect(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else return true;
    }
    return false;
}

// Gold strings that are nothing but one number (optionally a percent) match
// numerically, never by substring; "1" inside "13" must not count.
inline bool pure_number(const NormalizedAnswer& n) {
    if (n.numbers.size() != 1) return false;
    std::string t = trim(n.text);
    if (!t.empty() && t.back() == '%') t.pop_back();
    return parse_decimal(t).has_value();
}

// True when the prediction claims a different extremum than the gold value,
// e.g. gold "110" vs "the lowest value ... is 90".
inline bool conflicting_extremal_claim(const NormalizedAnswer& gold,
                                       const NormalizedAnswer& pred) {
    if (gold.numbers.size() != 1) return false;
    static const char* kSynonyms[] = {"lowest", "least", "minimum", "smallest",
                                      "highest", "greatest", "maximum", "largest"};
    const auto tokens = extract_numbers(pred.text);
    for (const char* syn : kSynonyms) {
        const std::string word(syn);
        for (std::size_t pos = pred.text.find(word); pos != std::string::npos;
             pos = pred.text.find(word, pos + word.size())) {
            const bool left_ok = pos == 0 || !is_alnum(pred.text[pos - 1]);
            const bool right_ok = pos + word.size() >= pred.text.size() ||
                                  !is_alnum(pred.text[pos + word.size()]);
            if (!left_ok || !right_ok) continue;
            for (const auto& token : tokens) {
                if (token.pos > pos) {
                    if (token.value != gold.numbers[0]) return true;
                    break;
                }
            }
        }
    }
    return false;
}

inline bool item_present(const std::string& item, const NormalizedAnswer& pred) {
    if (!item.empty() && pred.text.find(item) != std::string::npos) return true;
    const auto tokens = extract_numbers(item);
    if (tokens.size() == 1) {
        for (double v : pred.numbers)
            if (v == tokens[0].value) return true;
    }
    return false;
}

// Walks gold items left to right, requiring each substring match to start
// after the previous one. Numeric-only items fall back to multiset presence
// without advancing the cursor.
inline std::size_t ordered_matches(const std::vector<std::string>& items,
                                   const NormalizedAnswer& pred) {
    std::size_t cursor = 0, matched = 0;
    for (const auto& item : items) {
        const auto pos = pred.text.find(item, cursor);
        if (pos != std::string::npos) {
            cursor = pos + item.size();
            ++matched;
            continue;
        }
        const auto tokens = extract_numbers(item);
        if (tokens.size() == 1) {
            for (double v : pred.numbers)
                if (v == tokens[0].value) {
                    ++matched;
                    break;
                }
        }
    }
    return matched;
}

inline bool judge_scalar(const NormalizedAnswer& gold, const NormalizedAnswer& pred,
                         Policy policy) {
    if (policy == Policy::Strict) return false;  // equality handled by caller
    if (conflicting_extremal_claim(gold, pred)) return false;
    if (number_subset(gold.numbers, pred.numbers)) return true;
    if (!pure_number(gold) && !gold.text.empty() &&
        pred.text.find(gold.text) != std::string::npos)
        return true;
    return false;
}

inline bool judge_list(const NormalizedAnswer& gold, const NormalizedAnswer& pred,
                       AnswerShape shape, Policy policy) {
    const bool ordered = shape == AnswerShape::ListOrdered;
    if (policy == Policy::Strict) {
        if (gold.items.size() != pred.items.size()) return false;
        auto g = gold.items, p = pred.items;
        if (!ordered) {
            std::sort(g.begin(), g.end());
            std::sort(p.begin(), p.end());
        }
        return g == p;
    }
    const std::size_t matched =
        ordered ? ordered_matches(gold.items, pred)
                : static_cast<std::size_t>(std::count_if(
                      gold.items.begin(), gold.items.end(),
                      [&](const std::string& item) { return item_present(item, pred); }));
    if (policy == Policy::Containment) return matched == gold.items.size();
    // Lenient: at least half the items, with no gold number contradicted.
    if (2 * matched < gold.items.size()) return false;
    if (!gold.numbers.empty() && !pred.numbers.empty() &&
        !numbers_intersect(gold.numbers, pred.numbers))
        return false;
    return true;
}

}  // namespace detail

// Pure verdict function. Scalar answers match on normalized equality, gold
// numbers contained in the prediction (with no conflicting extremal claim),
// or — for non-numeric golds — substring containment. Lists require their
// items present (in order for ListOrdered); Strict demands full equality and
// Lenient accepts half the items when no gold number is contradicted.
inline bool judge(const std::string& gold, const std::string& prediction, AnswerShape shape,
                  Policy policy) {
    const NormalizedAnswer g = normalize(gold);
    const NormalizedAnswer p = normalize(prediction);
    if (g.text == p.text) return true;
    if (shape == AnswerShape::Scalar) {
        if (policy == Policy::Strict) return false;
        if (detail::judge_scalar(g, p, Policy::Containment)) return true;
        return false;
    }
    return detail::judge_list(g, p, shape, policy);
}

struct Verdict {
    std::string record_id;
    std::string question;
    std::string gold;
    std::string prediction;
    bool correct = false;
    bool errored = false;
    std::string error;
    Policy policy = Policy::Containment;
    PromptMode mode = PromptMode::ZeroShot;
    Category category = Category::Others;
    AnswerShape shape = AnswerShape::Scalar;
};

struct EvalOptions {
    PromptMode mode = PromptMode::ZeroShot;
    Policy policy = Policy::Containment;
    std::size_t k = 3;
    std::size_t budget = 8192;
    std::size_t concurrency = 4;
    int max_tokens = 64;
    double temperature = 0.0;
    std::vector<std::string> stop = {"\nQ:"};
};

namespace detail {

inline Verdict evaluate_one(const DatasetRecord& record, const QAPair& qa,
                            const EvalOptions& opts, const std::vector<SynthExample>* pool,
                            CompletionBackend& backend) {
    Verdict v;
    v.record_id = record.id;
    v.question = qa.question;
    v.gold = qa.gold;
    v.policy = opts.policy;
    v.mode = opts.mode;
    v.category = record.table.category;
    v.shape = qa.shape;
    try {
        Prompt prompt =
            opts.mode == PromptMode::ZeroShot
                ? build_zero_shot(record, qa.question)
                : build_few_shot(record, qa.question,
                                 select_examples(*pool, record.table.category, opts.k, record.id));
        prompt = fit_budget(prompt, opts.budget);
        CompletionRequest req;
        req.prompt = prompt.text;
        req.max_tokens = opts.max_tokens;
        req.temperature = opts.temperature;
        req.stop = opts.stop;
        v.prediction = trim(backend.complete(req).text);
        v.correct = judge(qa.gold, v.prediction, qa.shape, opts.policy);
    } catch (const Error& e) {
        // Errored completions count as incorrect, never skipped.
        v.errored = true;
        v.error = e.what();
        v.correct = false;
    }
    return v;
}

}  // namespace detail

// Evaluates one record's questions in order.
inline std::vector<Verdict> evaluate_record(const DatasetRecord& record, const EvalOptions& opts,
                                            const std::vector<SynthExample>* pool,
                                            CompletionBackend& backend) {
    if (opts.mode == PromptMode::FewShot && (pool == nullptr || pool->empty()))
        throw EmptyPool();
    std::vector<Verdict> verdicts;
    verdicts.reserve(record.qa.size());
    for (const auto& qa : record.qa)
        verdicts.push_back(detail::evaluate_one(record, qa, opts, pool, backend));
    return verdicts;
}

// Evaluates every question of every record, up to `concurrency` in flight.
// Verdicts come back in dataset order regardless of scheduling.
inline std::vector<Verdict> evaluate_dataset(const std::vector<DatasetRecord>& records,
                                             const EvalOptions& opts,
                                             const std::vector<SynthExample>* pool,
                                             CompletionBackend& backend) {
    if (opts.mode == PromptMode::FewShot && (pool == nullptr || pool->empty()))
        throw EmptyPool();
    struct Job {
        const DatasetRecord* record;
        const QAPair* qa;
    };
    std::vector<Job> jobs;
    for (const auto& record : records)
        for (const auto& qa : record.qa) jobs.push_back({&record, &qa});

    std::vector<Verdict> verdicts(jobs.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(std::max<std::size_t>(opts.concurrency, 1), jobs.size());
    auto run = [&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
            verdicts[i] = detail::evaluate_one(*jobs[i].record, *jobs[i].qa, opts, pool, backend);
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run);
        for (auto& t : threads) t.join();
    }
    return verdicts;
}

struct EvalReport {
    std::vector<Verdict> verdicts;
    std::map<std::string, double> accuracy_by_mode;
    std::map<std::string, double> accuracy_by_category;
    nlohmann::json config;
};

inline EvalReport build_report(std::vector<Verdict> verdicts, nlohmann::json config) {
    EvalReport report;
    report.verdicts = std::move(verdicts);
    report.config = std::move(config);
    std::map<std::string, std::pair<std::size_t, std::size_t>> by_mode, by_category;
    for (const auto& v : report.verdicts) {
        auto& m = by_mode[prompt_mode_name(v.mode)];
        auto& c = by_category[category_name(v.category)];
        ++m.second;
        ++c.second;
        if (v.correct) {
            ++m.first;
            ++c.first;
        }
    }
    for (const auto& [k, v] : by_mode)
        report.accuracy_by_mode[k] = static_cast<double>(v.first) / v.second;
    for (const auto& [k, v] : by_category)
        report.accuracy_by_category[k] = static_cast<double>(v.first) / v.second;
    return report;
}

enum class ReportFormat { JsonFile, Csv, MarkdownTable };

inline ReportFormat report_format_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "json") return ReportFormat::JsonFile;
    if (n == "csv") return ReportFormat::Csv;
    if (n == "markdown" || n == "md") return ReportFormat::MarkdownTable;
    throw Error("unknown report format: " + name);
}

namespace detail {

inline std::string percent1(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline nlohmann::json verdict_to_json(const Verdict& v) {
    return nlohmann::json{{"record_id", v.record_id},
                          {"question", v.question},
                          {"gold", v.gold},
                          {"prediction", v.prediction},
                          {"correct", v.correct},
                          {"errored", v.errored},
                          {"error", v.error},
                          {"policy", policy_name(v.policy)},
                          {"mode", prompt_mode_name(v.mode)},
                          {"category", category_name(v.category)},
                          {"shape", shape_name(v.shape)}};
}

}  // namespace detail

// Fine-tuned table-QA baseline accuracy, reported for context in rendered
// reports when the reference row is requested.
inline constexpr double kReferenceBaselineAccuracy = 0.184;
inline constexpr std::string_view kReferenceBaselineName = "TAPAS (fine-tuned)";

// Deterministic bytes for a fixed report.
inline std::string render_report(const EvalReport& report, ReportFormat format,
                                 bool include_reference_row = false) {
    if (format == ReportFormat::JsonFile) {
        std::size_t correct = 0;
        for (const auto& v : report.verdicts) correct += v.correct ? 1 : 0;
        nlohmann::json j;
        j["config"] = report.config;
        j["accuracy_by_mode"] = report.accuracy_by_mode;
        j["accuracy_by_category"] = report.accuracy_by_category;
        j["totals"] = {{"questions", report.verdicts.size()}, {"correct", correct}};
        auto verdicts = nlohmann::json::array();
        for (const auto& v : report.verdicts) verdicts.push_back(detail::verdict_to_json(v));
        j["verdicts"] = std::move(verdicts);
        return j.dump(2) + "\n";
    }
    if (format == ReportFormat::Csv) {
        std::string out =
            "record_id,mode,category,shape,question,gold,prediction,correct,errored,policy\n";
        for (const auto& v : report.verdicts) {
            out += detail::csv_escape(v.record_id) + ',' + prompt_mode_name(v.mode) + ',' +
                   category_name(v.category) + ',' + shape_name(v.shape) + ',' +
                   detail::csv_escape(v.question) + ',' + detail::csv_escape(v.gold) + ',' +
                   detail::csv_escape(v.prediction) + ',' + (v.correct ? "true" : "false") + ',' +
                   (v.errored ? "true" : "false") + ',' + policy_name(v.policy) + '\n';
        }
        return out;
    }

    // Markdown: one accuracy row per mode, mirroring the usual
    // model-vs-accuracy comparison layout.
    std::string out = "| Model | Accuracy |\n| --- | --- |\n";
    if (include_reference_row)
        out += "| " + std::string(kReferenceBaselineName) + " | " +
               detail::percent1(kReferenceBaselineAccuracy) + " |\n";
    if (report.accuracy_by_mode.empty()) {
        out += "| (no verdicts) | n/a |\n";
    } else {
        for (const char* mode : {"zero_shot", "few_shot"}) {
            const auto it = report.accuracy_by_mode.find(mode);
            if (it == report.accuracy_by_mode.end()) continue;
            const std::string label = std::string(mode) == "zero_shot" ? "Zero-Shot" : "Few-Shot";
            out += "| " + label + " | " + detail::percent1(it->second) + " |\n";
        }
    }
    if (!report.accuracy_by_category.empty()) {
        out += "\n| Category | Accuracy |\n| --- | --- |\n";
        for (const auto& [category, accuracy] : report.accuracy_by_category)
            out += "| " + category + " | " + detail::percent1(accuracy) + " |\n";
    }
    return out;
}

}  // namespace tableqa

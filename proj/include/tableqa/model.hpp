#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tableqa/errors.hpp"
#include "tableqa/strutil.hpp"

namespace tableqa {

enum class CellKind { Text, Number, Percent, Ratio };

// One table cell. `raw` is always the verbatim source string; the typed view
// is derived from it and never replaces it.
struct CellValue {
    std::string raw;
    CellKind kind = CellKind::Text;
    std::optional<double> numeric;                          // Number / Percent magnitude
    std::optional<std::pair<long long, long long>> ratio;   // Ratio numerator/denominator
};

enum class Category { Weather, Sports, Financial, Others };
enum class AnswerShape { Scalar, ListOrdered, ListUnordered };
enum class SynthOrigin { StatTemplate, LookupTemplate, LlmGenerated };

inline std::string category_name(Category c) {
    switch (c) {
        case Category::Weather: return "weather";
        case Category::Sports: return "sports";
        case Category::Financial: return "financial";
        default: return "others";
    }
}

inline Category category_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "weather") return Category::Weather;
    if (n == "sports") return Category::Sports;
    if (n == "financial") return Category::Financial;
    if (n == "others") return Category::Others;
    throw Error("unknown category: " + name);
}

inline std::string shape_name(AnswerShape s) {
    switch (s) {
        case AnswerShape::ListOrdered: return "list_ordered";
        case AnswerShape::ListUnordered: return "list_unordered";
        default: return "scalar";
    }
}

inline AnswerShape shape_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "scalar") return AnswerShape::Scalar;
    if (n == "list_ordered") return AnswerShape::ListOrdered;
    if (n == "list_unordered") return AnswerShape::ListUnordered;
    throw Error("unknown answer shape: " + name);
}

inline std::string origin_name(SynthOrigin o) {
    switch (o) {
        case SynthOrigin::StatTemplate: return "stat_template";
        case SynthOrigin::LookupTemplate: return "lookup_template";
        default: return "llm_generated";
    }
}

inline SynthOrigin origin_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "stat_template") return SynthOrigin::StatTemplate;
    if (n == "lookup_template") return SynthOrigin::LookupTemplate;
    if (n == "llm_generated") return SynthOrigin::LlmGenerated;
    throw Error("unknown synth origin: " + name);
}

struct Table {
    std::optional<std::string> title;
    std::vector<std::string> header;
    std::vector<std::vector<CellValue>> rows;
    Category category = Category::Others;
};

struct QAPair {
    std::string question;
    std::string gold;
    AnswerShape shape = AnswerShape::Scalar;
};

struct DatasetRecord {
    std::string id;
    Table table;
    std::string passage;  // OCR text near the table, possibly empty
    std::vector<QAPair> qa;
};

// A synthetic (table, question, answer) triple used as an in-context example.
// `id` is assigned by pool construction / loading, not serialized.
struct SynthExample {
    std::string id;
    Table table;
    std::string question;
    std::string answer;
    Category category = Category::Others;
    SynthOrigin origin = SynthOrigin::LookupTemplate;
};

namespace detail {

// Integer part with comma separators: first group 1-3 digits, middle groups
// 2-3 (covers both western and lakh grouping), last group exactly 3.
inline bool valid_comma_groups(const std::vector<std::string>& groups) {
    if (groups.size() < 2) return false;
    for (const auto& g : groups) {
        if (g.empty()) return false;
        for (char c : g)
            if (!is_digit(c)) return false;
    }
    if (groups.front().empty() || groups.front().size() > 3) return false;
    if (groups.back().size() != 3) return false;
    for (std::size_t i = 1; i + 1 < groups.size(); ++i)
        if (groups[i].size() != 2 && groups[i].size() != 3) return false;
    return true;
}

// Parses a locale-fixed decimal (comma thousands, period decimal point).
// Returns the value with separators stripped, or nullopt if `s` is not a
// plain decimal.
inline std::optional<double> parse_decimal(std::string_view sv) {
    std::string s = trim(sv);
    if (s.empty()) return std::nullopt;
    std::string sign;
    if (s[0] == '+' || s[0] == '-') {
        if (s[0] == '-') sign = "-";
        s.erase(0, 1);
    }
    if (s.empty()) return std::nullopt;

    std::string int_part = s, frac_part;
    if (auto dot = s.find('.'); dot != std::string::npos) {
        int_part = s.substr(0, dot);
        frac_part = s.substr(dot + 1);
        if (frac_part.empty() || s.find('.', dot + 1) != std::string::npos) return std::nullopt;
        for (char c : frac_part)
            if (!is_digit(c)) return std::nullopt;
    }
    if (int_part.empty() && frac_part.empty()) return std::nullopt;

    std::string digits;
    if (int_part.find(',') != std::string::npos) {
        auto groups = split(int_part, ',');
        if (!valid_comma_groups(groups)) return std::nullopt;
        for (const auto& g : groups) digits += g;
    } else {
        for (char c : int_part)
            if (!is_digit(c)) return std::nullopt;
        digits = int_part;
    }
    if (digits.empty() && frac_part.empty()) return std::nullopt;

    const std::string cleaned = sign + (digits.empty() ? "0" : digits) +
                                (frac_part.empty() ? "" : "." + frac_part);
    double value = 0.0;
    const char* begin = cleaned.data();
    const char* end = begin + cleaned.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

// Leading currency glyphs stripped before numeric parsing.
inline std::string strip_currency(std::string s) {
    static const char* glyphs[] = {"₹" /* ₹ */, "$", "€" /* € */, "£" /* £ */};
    bool stripped = true;
    while (stripped) {
        stripped = false;
        s = trim(s);
        for (const char* g : glyphs) {
            const std::string_view gv(g);
            if (s.size() >= gv.size() && std::string_view(s).substr(0, gv.size()) == gv) {
                s.erase(0, gv.size());
                stripped = true;
            }
        }
    }
    return trim(s);
}

inline std::optional<std::pair<long long, long long>> parse_ratio(std::string_view sv) {
    const std::string s = trim(sv);
    auto slash = s.find('/');
    if (slash == std::string::npos || s.find('/', slash + 1) != std::string::npos)
        return std::nullopt;
    auto parse_int = [](std::string part) -> std::optional<long long> {
        part = trim(part);
        if (part.empty()) return std::nullopt;
        std::size_t i = (part[0] == '+' || part[0] == '-') ? 1 : 0;
        if (i == part.size()) return std::nullopt;
        for (std::size_t j = i; j < part.size(); ++j)
            if (!is_digit(part[j])) return std::nullopt;
        long long v = 0;
        auto [ptr, ec] = std::from_chars(part.data() + (part[0] == '+' ? 1 : 0),
                                         part.data() + part.size(), v);
        if (ec != std::errc() || ptr != part.data() + part.size()) return std::nullopt;
        return v;
    };
    auto a = parse_int(s.substr(0, slash));
    auto b = parse_int(s.substr(slash + 1));
    if (!a || !b) return std::nullopt;
    return std::make_pair(*a, *b);
}

}  // namespace detail

// Total, deterministic cell classifier. Anything that is not a number,
// percent, or integer ratio stays Text; the raw string is preserved verbatim.
inline CellValue parse_cell(const std::string& raw) {
    CellValue cell;
    cell.raw = raw;
    const std::string s = trim(raw);
    if (s.empty()) return cell;

    if (auto r = detail::parse_ratio(s)) {
        cell.kind = CellKind::Ratio;
        cell.ratio = *r;
        return cell;
    }
    if (s.back() == '%') {
        if (auto v = detail::parse_decimal(detail::strip_currency(s.substr(0, s.size() - 1)))) {
            cell.kind = CellKind::Percent;
            cell.numeric = *v;
            return cell;
        }
    }
    if (auto v = detail::parse_decimal(detail::strip_currency(s))) {
        cell.kind = CellKind::Number;
        cell.numeric = *v;
        return cell;
    }
    return cell;
}

// Shortest fixed-notation string that parses back to the same double.
// 2250 -> "2250", 91.64 -> "91.64"; never scientific notation.
inline std::string render_number(double value) {
    char buf[400];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
    if (ec != std::errc()) return std::to_string(value);
    return std::string(buf, ptr);
}

// Round half away from zero to two decimals.
inline double round_half_up2(double value) {
    const double scaled = value * 100.0;
    const double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
    return rounded / 100.0;
}

inline std::size_t column_index(const Table& table, const std::string& column) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == column) return i;
    throw UnknownColumn(column);
}

// Numeric magnitudes of Number/Percent cells in row order; Text/Ratio skipped.
inline std::vector<double> column_numbers(const Table& table, const std::string& column) {
    const std::size_t idx = column_index(table, column);
    std::vector<double> out;
    for (const auto& row : table.rows)
        if (row[idx].numeric) out.push_back(*row[idx].numeric);
    return out;
}

enum class StatOp { Min, Max, Mean };

inline std::string stat_op_name(StatOp op) {
    switch (op) {
        case StatOp::Min: return "minimum";
        case StatOp::Max: return "maximum";
        default: return "mean";
    }
}

// Pre-rounding statistic over a column's numeric cells. Min/Max take the
// first occurrence in row order on ties.
inline double stat_value(const Table& table, const std::string& column, StatOp op) {
    const auto values = column_numbers(table, column);
    if (values.empty()) throw NoNumericData(column);
    switch (op) {
        case StatOp::Min: {
            double best = values[0];
            for (double v : values)
                if (v < best) best = v;
            return best;
        }
        case StatOp::Max: {
            double best = values[0];
            for (double v : values)
                if (v > best) best = v;
            return best;
        }
        default: {
            double sum = 0.0;
            for (double v : values) sum += v;
            return sum / static_cast<double>(values.size());
        }
    }
}

// Gold-answer rendering shared by the synthetic generator and the mock
// backend: exact magnitude for Min/Max, two-decimal half-up rounding for Mean.
inline std::string stat_answer(const Table& table, const std::string& column, StatOp op) {
    const double value = stat_value(table, column, op);
    return render_number(op == StatOp::Mean ? round_half_up2(value) : value);
}

// Throws unless the table satisfies the structural invariants every consumer
// relies on: rectangular, non-empty headers, at least 1 row and 2 columns.
inline void validate_table(const Table& table) {
    if (table.header.size() < 2) throw EmptyTable("fewer than 2 columns");
    if (table.rows.empty()) throw EmptyTable("no body rows");
    for (const auto& name : table.header)
        if (trim(name).empty()) throw Error("header name empty after trimming");
    for (const auto& row : table.rows)
        if (row.size() != table.header.size())
            throw Error("row width " + std::to_string(row.size()) + " != header width " +
                        std::to_string(table.header.size()));
}

}  // namespace tableqa

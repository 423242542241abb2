#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableqa/errors.hpp"
#include "tableqa/model.hpp"
#include "tableqa/strutil.hpp"

namespace tableqa {

// Row-major cell grid as emitted by a form-recognition service, plus the
// page text captured near the table.
struct OcrTable {
    std::vector<std::vector<std::string>> cells;
    std::string page_text;
};

// First row becomes the header; short rows are padded with empty Text cells
// and overlong rows are cut at the header width. Category is left as Others
// until classify_category runs.
inline Table parse_ocr_table(const OcrTable& ocr) {
    if (ocr.cells.size() < 2) throw EmptyTable("fewer than 2 rows");
    Table table;
    table.header.reserve(ocr.cells[0].size());
    for (std::size_t i = 0; i < ocr.cells[0].size(); ++i) {
        std::string name = trim(ocr.cells[0][i]);
        if (name.empty()) name = "Column " + std::to_string(i + 1);  // OCR dropout
        table.header.push_back(std::move(name));
    }
    if (table.header.size() < 2) throw EmptyTable("fewer than 2 columns");

    const std::size_t width = table.header.size();
    for (std::size_t r = 1; r < ocr.cells.size(); ++r) {
        std::vector<CellValue> row;
        row.reserve(width);
        for (std::size_t c = 0; c < width; ++c)
            row.push_back(parse_cell(c < ocr.cells[r].size() ? ocr.cells[r][c] : ""));
        table.rows.push_back(std::move(row));
    }
    validate_table(table);
    return table;
}

// Per-category keyword lists for the classifier. The defaults are editable
// via a JSON config file ({"keywords": {"weather": [...], ...}}).
struct KeywordConfig {
    std::vector<std::string> weather;
    std::vector<std::string> sports;
    std::vector<std::string> financial;

    static KeywordConfig defaults() {
        KeywordConfig k;
        k.weather = {"temperature", "temp", "rain", "rainfall", "humidity", "min",
                     "max", "celsius", "°", "weather", "forecast", "monsoon"};
        k.sports = {"runs", "wicket", "average", "avg", "strike", "sr", "player",
                    "match", "innings", "score", "team", "medal", "tournament"};
        k.financial = {"price", "msp", "cost", "₹", "crore", "lakh", "%",
                       "profit", "revenue", "hike", "return", "stock", "market"};
        return k;
    }
};

namespace detail {

// Alphanumeric keywords match on word boundaries; symbol keywords (°, %, ₹)
// match as substrings.
inline std::size_t keyword_hits(const std::string& haystack, const std::string& keyword) {
    const std::string needle = to_lower(keyword);
    if (needle.empty()) return 0;
    bool word_like = true;
    for (char c : needle)
        if (!is_alnum(c) && c != ' ') word_like = false;
    std::size_t hits = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        if (word_like) {
            const bool left_ok = pos == 0 || !is_alnum(haystack[pos - 1]);
            const std::size_t end = pos + needle.size();
            const bool right_ok = end >= haystack.size() || !is_alnum(haystack[end]);
            if (!left_ok || !right_ok) continue;
        }
        ++hits;
    }
    return hits;
}

}  // namespace detail

// Keyword-score proxy for the table classifier. Pure function of its inputs;
// ties resolve in the fixed order Weather > Sports > Financial, and a zero
// score falls through to Others.
inline Category classify_category(const Table& table, const std::string& passage,
                                  const KeywordConfig& keywords = KeywordConfig::defaults()) {
    std::string haystack;
    for (const auto& name : table.header) {
        haystack += name;
        haystack += ' ';
    }
    if (table.title) {
        haystack += *table.title;
        haystack += ' ';
    }
    haystack += passage;
    haystack = to_lower(haystack);

    auto score = [&](const std::vector<std::string>& list) {
        std::size_t total = 0;
        for (const auto& kw : list) total += detail::keyword_hits(haystack, kw);
        return total;
    };

    const std::size_t weather = score(keywords.weather);
    const std::size_t sports = score(keywords.sports);
    const std::size_t financial = score(keywords.financial);

    Category best = Category::Others;
    std::size_t best_score = 0;
    if (weather > best_score) { best = Category::Weather; best_score = weather; }
    if (sports > best_score) { best = Category::Sports; best_score = sports; }
    if (financial > best_score) { best = Category::Financial; best_score = financial; }
    return best;
}

namespace detail {

inline nlohmann::json table_to_json(const Table& table) {
    nlohmann::json t;
    t["header"] = table.header;
    auto rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        auto r = nlohmann::json::array();
        for (const auto& cell : row) r.push_back(cell.raw);
        rows.push_back(std::move(r));
    }
    t["rows"] = std::move(rows);
    return t;
}

// Rebuilds a table from {header, rows}; cells are re-parsed from their raw
// strings, so files only ever store verbatim text.
inline Table table_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("header") || !j.contains("rows"))
        throw Error("table must be an object with header and rows");
    Table table;
    for (const auto& h : j.at("header")) {
        if (!h.is_string()) throw Error("header entries must be strings");
        table.header.push_back(h.get<std::string>());
    }
    for (const auto& row : j.at("rows")) {
        std::vector<CellValue> cells;
        for (const auto& c : row) {
            if (!c.is_string()) throw Error("cells must be strings");
            cells.push_back(parse_cell(c.get<std::string>()));
        }
        table.rows.push_back(std::move(cells));
    }
    validate_table(table);
    return table;
}

inline DatasetRecord record_from_json(const nlohmann::json& j, const KeywordConfig& keywords) {
    if (!j.is_object()) throw Error("record must be a JSON object");
    DatasetRecord rec;
    if (!j.contains("id") || !j.at("id").is_string()) throw Error("missing string field \"id\"");
    rec.id = j.at("id").get<std::string>();
    if (!j.contains("table")) throw Error("missing field \"table\"");
    rec.table = table_from_json(j.at("table"));
    if (j.contains("title") && !j.at("title").is_null())
        rec.table.title = j.at("title").get<std::string>();
    if (!j.contains("passage") || !j.at("passage").is_string())
        throw Error("missing string field \"passage\"");
    rec.passage = j.at("passage").get<std::string>();

    if (!j.contains("qa") || !j.at("qa").is_array() || j.at("qa").empty())
        throw Error("field \"qa\" must be a non-empty array");
    for (const auto& q : j.at("qa")) {
        QAPair pair;
        if (!q.contains("question") || !q.at("question").is_string())
            throw Error("qa entry missing string field \"question\"");
        if (!q.contains("gold") || !q.at("gold").is_string())
            throw Error("qa entry missing string field \"gold\"");
        pair.question = q.at("question").get<std::string>();
        pair.gold = q.at("gold").get<std::string>();
        if (trim(pair.question).empty() || trim(pair.gold).empty())
            throw Error("qa question and gold must be non-empty");
        if (q.contains("shape") && !q.at("shape").is_null())
            pair.shape = shape_from_name(q.at("shape").get<std::string>());
        rec.qa.push_back(std::move(pair));
    }

    // Null category means "classify on load".
    if (!j.contains("category") || j.at("category").is_null())
        rec.table.category = classify_category(rec.table, rec.passage, keywords);
    else
        rec.table.category = category_from_name(j.at("category").get<std::string>());
    return rec;
}

inline nlohmann::json record_to_json(const DatasetRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["category"] = category_name(rec.table.category);
    if (rec.table.title)
        j["title"] = *rec.table.title;
    else
        j["title"] = nullptr;
    j["passage"] = rec.passage;
    j["table"] = table_to_json(rec.table);
    auto qa = nlohmann::json::array();
    for (const auto& pair : rec.qa) {
        qa.push_back({{"question", pair.question},
                      {"gold", pair.gold},
                      {"shape", shape_name(pair.shape)}});
    }
    j["qa"] = std::move(qa);
    return j;
}

}  // namespace detail

// Reads a line-delimited dataset file. Blank lines are skipped; anything else
// that fails to parse reports its 1-based line number.
inline std::vector<DatasetRecord> read_dataset(
    const std::filesystem::path& path,
    const KeywordConfig& keywords = KeywordConfig::defaults()) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file: " + path.string());
    std::vector<DatasetRecord> records;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_number, e.what());
        }
        DatasetRecord rec;
        try {
            rec = detail::record_from_json(j, keywords);
        } catch (const Error& e) {
            throw MalformedRecord(line_number, e.what());
        }
        if (!seen.insert(rec.id).second) throw DuplicateId(rec.id);
        records.push_back(std::move(rec));
    }
    return records;
}

inline void write_dataset(const std::vector<DatasetRecord>& records,
                          const std::filesystem::path& path) {
    std::set<std::string> seen;
    for (const auto& rec : records) {
        if (!seen.insert(rec.id).second) throw DuplicateId(rec.id);
        validate_table(rec.table);
        if (rec.qa.empty()) throw Error("record " + rec.id + " has no qa pairs");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + path.string());
    for (const auto& rec : records) out << detail::record_to_json(rec).dump() << '\n';
}

}  // namespace tableqa

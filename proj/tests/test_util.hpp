#pragma once

// Helpers shared by the test binaries: table construction, temp files, and
// the seeded random-table generators behind the property tests.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tableqa/model.hpp"

namespace testutil {

inline tableqa::Table make_table(std::vector<std::string> header,
                                 std::vector<std::vector<std::string>> rows,
                                 tableqa::Category category = tableqa::Category::Others) {
    tableqa::Table t;
    t.header = std::move(header);
    t.category = category;
    for (auto& row : rows) {
        std::vector<tableqa::CellValue> cells;
        for (auto& raw : row) cells.push_back(tableqa::parse_cell(raw));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// Fresh directory under the system temp dir; caller owns cleanup (tests are
// allowed to leave it, the dir name is unique per call).
inline std::filesystem::path fresh_temp_dir(const std::string& prefix) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     (prefix + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string with_commas(long long value) {
    std::string digits = std::to_string(value < 0 ? -value : value);
    std::string out;
    int count = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (count && count % 3 == 0) out.insert(out.begin(), ',');
        out.insert(out.begin(), *it);
        ++count;
    }
    return (value < 0 ? "-" : "") + out;
}

// One random numeric cell in any of the surface forms the parser accepts.
inline std::string random_numeric_cell(std::mt19937_64& rng) {
    switch (rng() % 5) {
        case 0: return std::to_string(static_cast<long long>(rng() % 100000));
        case 1: return with_commas(static_cast<long long>(1000 + rng() % 9000000));
        case 2: {
            const long long whole = static_cast<long long>(rng() % 1000);
            const long long frac = static_cast<long long>(rng() % 100);
            return std::to_string(whole) + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
        }
        case 3: return std::to_string(static_cast<long long>(rng() % 200)) + "%";
        default: return "-" + std::to_string(static_cast<long long>(rng() % 500));
    }
}

// Key column of labels, remaining columns numeric with occasional text
// dropouts. Headers are distinct and quote-free so generated questions stay
// inside the oracle grammar.
inline tableqa::Table random_numeric_table(std::mt19937_64& rng) {
    static const char* kHeaderStems[] = {"Alpha", "Beta", "Gamma", "Delta",
                                         "Epsilon", "Zeta", "Eta", "Theta"};
    const std::size_t cols = 2 + rng() % 4;  // 2..5
    const std::size_t rows = 2 + rng() % 7;  // 2..8
    std::vector<std::string> header{"Key"};
    for (std::size_t c = 1; c < cols; ++c)
        header.push_back(std::string(kHeaderStems[(rng() % 8)]) + " " + std::to_string(c));
    std::vector<std::vector<std::string>> body;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<std::string> row{"Item " + std::to_string(r + 1)};
        for (std::size_t c = 1; c < cols; ++c) {
            if (rng() % 10 == 0)
                row.push_back("n/a");
            else
                row.push_back(random_numeric_cell(rng));
        }
        body.push_back(std::move(row));
    }
    const auto cats = {tableqa::Category::Weather, tableqa::Category::Sports,
                       tableqa::Category::Financial, tableqa::Category::Others};
    auto cat = *(cats.begin() + rng() % 4);
    return make_table(std::move(header), std::move(body), cat);
}

// Random record with gnarly strings mixed in so serialization round-trips
// get exercised against quotes, backslashes, unicode, and newlines.
inline tableqa::DatasetRecord random_record(std::mt19937_64& rng, std::size_t index) {
    static const char* kPassages[] = {
        "",
        "Prices quoted in ₹ per kg.",
        "He said \"watch the spread\" yesterday.",
        "Line one.\nLine two with back\\slash.",
        "Temperatures in °C as recorded at 8am.",
    };
    tableqa::DatasetRecord rec;
    rec.id = "rec-" + std::to_string(index);
    rec.table = random_numeric_table(rng);
    if (rng() % 3 == 0) rec.table.title = "Title \"" + std::to_string(rng() % 100) + "\"";
    rec.passage = kPassages[rng() % 5];
    const std::size_t n = 1 + rng() % 3;
    for (std::size_t i = 0; i < n; ++i) {
        tableqa::QAPair qa;
        qa.question = "Question " + std::to_string(i) + " about item " +
                      std::to_string(rng() % 10) + "?";
        qa.gold = rng() % 2 ? "Answer, with a comma" : std::to_string(rng() % 1000);
        qa.shape = static_cast<tableqa::AnswerShape>(rng() % 3);
        rec.qa.push_back(std::move(qa));
    }
    return rec;
}

}  // namespace testutil

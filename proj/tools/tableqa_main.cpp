// tableqa — command-line front end for the table-QA prompting toolkit.
//
// Subcommands: ingest (OCR JSON -> dataset), synth (dataset -> example pool),
// prompt (print exact prompt bytes), eval (run an evaluation, write a
// report), ask (one-off question against a record).
//
// Exit codes: 0 success, 2 usage error, 3 operational failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tableqa/http_backend.hpp"
#include "tableqa/tableqa.hpp"

namespace {

using namespace tableqa;

struct Flags {
    std::string config_file;
    std::string backend;
    std::string endpoint;
    std::string model;
    std::size_t k = 0;
    std::string policy;
    std::size_t budget = 0;
    std::string cache_dir;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "json";

    // subcommand arguments
    std::vector<std::string> inputs;
    std::string dataset;
    std::string record_id;
    std::string question;
    std::size_t question_index = 0;
    std::string mode = "zero-shot";
    std::string pool_file;
    std::size_t per_table = 5;
    std::size_t total = 0;
    std::size_t qa_per_table = 2;
};

PromptMode mode_from_flag(const std::string& mode) {
    const std::string m = to_lower(trim(mode));
    if (m == "zero-shot" || m == "zero" || m == "zero_shot") return PromptMode::ZeroShot;
    if (m == "few-shot" || m == "few" || m == "few_shot") return PromptMode::FewShot;
    throw UsageError("unknown mode: " + mode + " (expected zero-shot or few-shot)");
}

// Layering: defaults -> environment -> config file -> explicit flags.
RunConfig assemble_config(const CLI::App& app, const Flags& flags) {
    RunConfig config;
    apply_env(config);
    if (app.count("--config")) apply_config_file(config, flags.config_file);
    if (app.count("--backend")) config.backend = backend_from_name(flags.backend);
    if (app.count("--endpoint")) config.endpoint = flags.endpoint;
    if (app.count("--model")) config.model = flags.model;
    if (app.count("--k")) config.k = flags.k;
    if (app.count("--policy")) config.policy = policy_from_name(flags.policy);
    if (app.count("--budget")) config.budget = flags.budget;
    if (app.count("--cache-dir")) config.cache_dir = flags.cache_dir;
    if (app.count("--seed")) config.seed = flags.seed;
    return config;
}

std::unique_ptr<CompletionBackend> make_backend(const RunConfig& config) {
    std::unique_ptr<CompletionBackend> inner;
    if (config.backend == BackendKind::Mock) {
        inner = std::make_unique<MockBackend>();
    } else {
        LiveConfig live;
        live.endpoint = config.endpoint;
        live.model = config.model;
        if (const char* key = std::getenv(kApiKeyEnv)) live.api_key = key;
        inner = std::make_unique<LiveBackend>(std::move(live));
    }
    if (config.cache_dir.empty() || config.cache_dir == "none") return inner;
    return std::make_unique<CachedBackend>(config.cache_dir, std::move(inner));
}

const DatasetRecord& find_record(const std::vector<DatasetRecord>& records,
                                 const std::string& id) {
    for (const auto& r : records)
        if (r.id == id) return r;
    throw UsageError("no record with id \"" + id + "\" in dataset");
}

OcrTable ocr_from_json(const nlohmann::json& j) {
    OcrTable ocr;
    const nlohmann::json* cells = nullptr;
    if (j.is_array()) cells = &j;
    else if (j.is_object() && j.contains("cells")) cells = &j.at("cells");
    else throw Error("OCR input must be an array of arrays or an object with \"cells\"");
    for (const auto& row : *cells) {
        std::vector<std::string> r;
        for (const auto& cell : row) {
            if (cell.is_string()) r.push_back(cell.get<std::string>());
            else r.push_back(cell.dump());
        }
        ocr.cells.push_back(std::move(r));
    }
    if (j.is_object() && j.contains("page_text")) ocr.page_text = j.at("page_text").get<std::string>();
    return ocr;
}

int cmd_ingest(const RunConfig& config, const Flags& flags) {
    if (flags.inputs.empty()) throw UsageError("ingest needs at least one OCR JSON file");
    std::vector<DatasetRecord> records;
    for (const auto& input : flags.inputs) {
        std::ifstream in(input);
        if (!in) throw Error("cannot open OCR file: " + input);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error("OCR file " + input + " is not valid JSON: " + e.what());
        }
        DatasetRecord rec;
        const OcrTable ocr = ocr_from_json(j);
        rec.table = parse_ocr_table(ocr);
        rec.passage = ocr.page_text;
        rec.id = j.is_object() && j.contains("id") ? j.at("id").get<std::string>()
                                                   : std::filesystem::path(input).stem().string();
        if (j.is_object() && j.contains("title") && !j.at("title").is_null())
            rec.table.title = j.at("title").get<std::string>();
        rec.table.category = classify_category(rec.table, rec.passage, config.keywords);

        if (j.is_object() && j.contains("qa") && j.at("qa").is_array() && !j.at("qa").empty()) {
            for (const auto& q : j.at("qa")) {
                QAPair pair;
                pair.question = q.at("question").get<std::string>();
                pair.gold = q.at("gold").get<std::string>();
                if (q.contains("shape")) pair.shape = shape_from_name(q.at("shape").get<std::string>());
                rec.qa.push_back(std::move(pair));
            }
        } else {
            // No gold answers in the OCR output: generate template questions
            // so the record carries usable ground truth.
            std::vector<SynthExample> generated;
            tableqa::detail::emit_for_record(rec, flags.qa_per_table, config.seed, generated);
            for (const auto& ex : generated)
                rec.qa.push_back(QAPair{ex.question, ex.answer, AnswerShape::Scalar});
            if (rec.qa.empty()) throw Error("could not generate any questions for " + rec.id);
        }
        records.push_back(std::move(rec));
    }
    write_dataset(records, flags.out.empty() ? "dataset.jsonl" : flags.out);
    std::cerr << "wrote " << records.size() << " records\n";
    return 0;
}

int cmd_synth(const RunConfig& config, const Flags& flags, const CLI::App& sub) {
    const auto records = read_dataset(flags.dataset, config.keywords);
    if (records.empty()) throw Error("dataset is empty: " + flags.dataset);
    const auto pool = sub.count("--total")
                          ? build_pool_total(records, flags.total, config.seed)
                          : build_pool(records, flags.per_table, config.seed);
    write_pool(pool, flags.out.empty() ? "pool.jsonl" : flags.out);
    std::cerr << "wrote " << pool.size() << " examples\n";
    return 0;
}

Prompt build_prompt_for(const RunConfig& config, const Flags& flags,
                        const DatasetRecord& record, const std::string& question) {
    const PromptMode mode = mode_from_flag(flags.mode);
    if (mode == PromptMode::ZeroShot)
        return fit_budget(build_zero_shot(record, question), config.budget);
    if (flags.pool_file.empty()) throw UsageError("few-shot mode needs --pool");
    const auto pool = read_pool(flags.pool_file);
    const auto examples = select_examples(pool, record.table.category, config.k, record.id);
    return fit_budget(build_few_shot(record, question, examples), config.budget);
}

int cmd_prompt(const RunConfig& config, const Flags& flags) {
    const auto records = read_dataset(flags.dataset, config.keywords);
    const auto& record = find_record(records, flags.record_id);
    if (flags.question_index >= record.qa.size())
        throw UsageError("question index " + std::to_string(flags.question_index) +
                         " out of range (record has " + std::to_string(record.qa.size()) +
                         " questions)");
    const Prompt p =
        build_prompt_for(config, flags, record, record.qa[flags.question_index].question);
    // Exact prompt bytes, no trailing newline.
    std::fwrite(p.text.data(), 1, p.text.size(), stdout);
    return 0;
}

int cmd_ask(const RunConfig& config, const Flags& flags) {
    const auto records = read_dataset(flags.dataset, config.keywords);
    const auto& record = find_record(records, flags.record_id);
    if (trim(flags.question).empty()) throw UsageError("ask needs a non-empty --question");
    const Prompt p = build_prompt_for(config, flags, record, flags.question);
    auto backend = make_backend(config);
    CompletionRequest req;
    req.prompt = p.text;
    req.max_tokens = config.max_tokens;
    req.temperature = config.temperature;
    req.stop = config.stop;
    std::cout << trim(backend->complete(req).text) << "\n";
    return 0;
}

int cmd_eval(const RunConfig& config, const Flags& flags) {
    const auto records = read_dataset(flags.dataset, config.keywords);
    std::vector<SynthExample> pool;
    if (!flags.pool_file.empty()) pool = read_pool(flags.pool_file);

    auto backend = make_backend(config);
    std::vector<Verdict> verdicts;
    std::vector<PromptMode> modes;
    if (to_lower(flags.mode) == "both") {
        modes = {PromptMode::ZeroShot, PromptMode::FewShot};
    } else {
        modes = {mode_from_flag(flags.mode)};
    }
    for (PromptMode mode : modes) {
        const auto opts = config.eval_options(mode);
        const auto batch = evaluate_dataset(
            records, opts, mode == PromptMode::FewShot ? &pool : nullptr, *backend);
        verdicts.insert(verdicts.end(), batch.begin(), batch.end());
    }
    const EvalReport report = build_report(std::move(verdicts), config.to_json());

    const std::string out_path = flags.out.empty() ? "report.json" : flags.out;
    const std::string rendered =
        render_report(report, report_format_from_name(flags.format), config.include_reference_row);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + out_path);
    out << rendered;
    out.close();

    std::cout << render_report(report, ReportFormat::MarkdownTable,
                               config.include_reference_row);
    if (auto* cached = dynamic_cast<CachedBackend*>(backend.get())) {
        std::cerr << "backend calls: " << cached->calls() << " (cache hits: " << cached->hits()
                  << ", misses: " << cached->misses() << ")\n";
    } else {
        std::cerr << "backend calls: " << backend->calls() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Table question answering over LLM completion endpoints"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    app.add_option("--config", flags.config_file, "JSON config file");
    app.add_option("--backend", flags.backend, "Completion backend: mock or live");
    app.add_option("--endpoint", flags.endpoint, "Completions endpoint URL (live backend)");
    app.add_option("--model", flags.model, "Model name sent to the endpoint");
    app.add_option("--k", flags.k, "Few-shot examples per prompt (default 3)");
    app.add_option("--policy", flags.policy, "Judging policy: strict, containment, lenient");
    app.add_option("--budget", flags.budget, "Prompt budget in characters (default 8192)");
    app.add_option("--cache-dir", flags.cache_dir,
                   "Completion cache directory (default .tableqa-cache; \"none\" disables)");
    app.add_option("--seed", flags.seed, "Seed for all randomized choices (default 0)");
    app.add_option("--out", flags.out, "Output file");
    app.add_option("--format", flags.format, "Report format: json, csv, markdown");

    auto* ingest = app.add_subcommand("ingest", "Convert OCR table JSON into a dataset file");
    ingest->add_option("inputs", flags.inputs, "OCR JSON files")->required();
    ingest->add_option("--qa-per-table", flags.qa_per_table,
                       "Template questions per record when the input has no qa (default 2)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic example pool from a dataset");
    synth->add_option("dataset", flags.dataset, "Dataset file")->required();
    synth->add_option("--per-table", flags.per_table, "Examples per table (default 5)");
    synth->add_option("--total", flags.total, "Total pool size, spread across tables")
        ->excludes("--per-table");

    auto* prompt = app.add_subcommand("prompt", "Print the exact prompt bytes for a question");
    prompt->add_option("dataset", flags.dataset, "Dataset file")->required();
    prompt->add_option("--record", flags.record_id, "Record id")->required();
    prompt->add_option("--question-index", flags.question_index, "Question index (default 0)");
    prompt->add_option("--mode", flags.mode, "zero-shot or few-shot");
    prompt->add_option("--pool", flags.pool_file, "Example pool file (few-shot)");

    auto* eval = app.add_subcommand("eval", "Evaluate a dataset and write a report");
    eval->add_option("dataset", flags.dataset, "Dataset file")->required();
    eval->add_option("--mode", flags.mode, "zero-shot, few-shot, or both");
    eval->add_option("--pool", flags.pool_file, "Example pool file (few-shot)");

    auto* ask = app.add_subcommand("ask", "Ask a free-text question against one record");
    ask->add_option("dataset", flags.dataset, "Dataset file")->required();
    ask->add_option("--record", flags.record_id, "Record id")->required();
    ask->add_option("--question", flags.question, "Question text")->required();
    ask->add_option("--mode", flags.mode, "zero-shot or few-shot");
    ask->add_option("--pool", flags.pool_file, "Example pool file (few-shot)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const RunConfig config = assemble_config(app, flags);
        if (ingest->parsed()) return cmd_ingest(config, flags);
        if (synth->parsed()) return cmd_synth(config, flags, *synth);
        if (prompt->parsed()) return cmd_prompt(config, flags);
        if (eval->parsed()) return cmd_eval(config, flags);
        if (ask->parsed()) return cmd_ask(config, flags);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

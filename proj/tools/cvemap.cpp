#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvemap/annotate.hpp"
#include "cvemap/annotate_server.hpp"
#include "cvemap/config.hpp"
#include "cvemap/corpus.hpp"
#include "cvemap/embedding_store.hpp"
#include "cvemap/error.hpp"
#include "cvemap/eval.hpp"
#include "cvemap/ingest.hpp"
#include "cvemap/nvd_fetch.hpp"
#include "cvemap/plot.hpp"
#include "cvemap/preprocess.hpp"
#include "cvemap/rank.hpp"
#include "cvemap/scorer_client.hpp"

namespace {

using namespace cvemap;
using nlohmann::json;

void write_output(const std::string& path, const std::string& contents) {
    if (path.empty() || path == "-") {
        std::cout << contents;
        std::cout.flush();
        return;
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) {
        throw DataError("cannot write " + path);
    }
    std::fwrite(contents.data(), 1, contents.size(), f);
    std::fclose(f);
}

/// Loaded shared inputs. Members are referenced by TextPipeline, so this must outlive it.
struct Resources {
    std::unique_ptr<corpus::Catalog> catalog_storage;
    const corpus::Catalog* catalog = &corpus::Catalog::builtin();
    preprocess::Gazetteer gazetteer = preprocess::Gazetteer::builtin();
    preprocess::StopwordList stopwords = preprocess::StopwordList::builtin();

    explicit Resources(const config::RunConfig& cfg) {
        if (!cfg.catalog.empty()) {
            catalog_storage = std::make_unique<corpus::Catalog>(corpus::Catalog::load(cfg.catalog));
            catalog = catalog_storage.get();
        }
        if (!cfg.gazetteer.empty()) {
            gazetteer = preprocess::Gazetteer::load(cfg.gazetteer);
        }
        if (!cfg.stopwords.empty()) {
            stopwords = preprocess::StopwordList::load(cfg.stopwords);
        }
    }

    [[nodiscard]] rank::TextPipeline pipeline(bool cleanup) const { return {cleanup, &gazetteer, &stopwords}; }
};

std::vector<corpus::CveRecord> require_records(const config::RunConfig& cfg) {
    config::require_paths(cfg, {"records"});
    return ingest::load_records(cfg.records);
}

std::map<std::string, corpus::CveRecord> index_records(std::vector<corpus::CveRecord> records) {
    std::map<std::string, corpus::CveRecord> out;
    for (auto& r : records) {
        auto id = r.cve_id;
        out.emplace(std::move(id), std::move(r));
    }
    return out;
}

std::vector<rank::RankedList> rank_records(const config::RunConfig& cfg, const Resources& res,
                                           std::span<const corpus::CveRecord> records, bool cleanup) {
    const auto pipeline = res.pipeline(cleanup);
    std::vector<rank::RankedList> out(records.size());
    if (cfg.ranker == "external") {
        if (cfg.scorer_url.empty()) {
            throw UsageError("the external ranker needs --scorer-url");
        }
        rank::HttpScorer scorer(cfg.scorer_url);
        return rank::external_rank_all(records, *res.catalog, scorer, pipeline, cfg.fan_out);
    }
    std::optional<rank::Bm25Ranker> bm25;
    std::optional<rank::EmbeddingStore> store;
    if (cfg.ranker == "bm25") {
        bm25.emplace(*res.catalog, cfg.bm25, res.stopwords);
    } else if (cfg.ranker == "cosine") {
        config::require_paths(cfg, {"embeddings"});
        store = rank::EmbeddingStore::load(cfg.embeddings);
    } else {
        throw UsageError("unknown ranker '" + cfg.ranker + "'");
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            try {
                out[i] = bm25 ? bm25->rank(records[i], pipeline)
                              : rank::cosine_sentence_rank(records[i], *res.catalog, *store, cfg.aggregation, pipeline);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                return;
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        for (unsigned t = 1; t < cfg.jobs; ++t) {
            threads.emplace_back(worker);
        }
        worker();
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

eval::EvalReport run_eval(const config::RunConfig& cfg, const Resources& res, std::span<const corpus::DatasetRow> gold,
                          const std::map<std::string, corpus::CveRecord>& records, bool cleanup,
                          bool first_of_chain) {
    std::vector<corpus::CveRecord> queries;
    for (const auto& row : gold) {
        if (row.assignment.is_causal() && !first_of_chain) {
            continue;
        }
        auto it = records.find(row.cve_id);
        if (it == records.end()) {
            throw DataError("no CVE text for " + row.cve_id + " in " + cfg.records.string());
        }
        queries.push_back(it->second);
    }
    auto ranked = rank_records(cfg, res, queries, cleanup);
    std::map<std::string, rank::RankedList> rankings;
    for (auto& r : ranked) {
        auto id = r.cve_id;
        rankings.emplace(std::move(id), std::move(r));
    }
    eval::EvaluateOptions options;
    options.ks = cfg.ks;
    options.first_of_chain = first_of_chain;
    options.jobs = cfg.jobs;
    const auto name = cfg.ranker + (cleanup ? " +preproc" : " -preproc");
    return eval::evaluate(name, rankings, gold, options);
}

std::string stats_text(const corpus::DatasetStats& stats, const corpus::Catalog& catalog) {
    std::string out;
    out += "total   " + std::to_string(stats.total) + "\n";
    out += "single  " + std::to_string(stats.single_count) + "\n";
    out += "causal  " + std::to_string(stats.causal_count) + "\n\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%4s  %-8s  %6s  %s\n", "rank", "cwe_id", "count", "name");
    out += line;
    for (int rank = 1; rank <= corpus::kCatalogSize; ++rank) {
        const auto& e = catalog.by_rank(rank);
        std::snprintf(line, sizeof(line), "%4d  %-8s  %6zu  %s\n", rank, e.cwe_id.c_str(),
                      stats.per_label_counts[static_cast<std::size_t>(rank - 1)], e.name.c_str());
        out += line;
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Map CVE records to the CWE Top 25 as a ranking task"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cvemap 0.1.0");

    std::string config_path;
    std::optional<unsigned> jobs;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--jobs", jobs, "Upper bound on worker threads")->check(CLI::Range(1u, 256u));

    // Flags shared by several subcommands. Unset ones leave the config value alone.
    std::map<std::string, std::string> overrides;
    auto path_flag = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides[key] = v; },
                                              help);
    };
    auto value_flag = path_flag;

    auto* ingest_cmd = app.add_subcommand("ingest", "Parse a cvelist directory and keep accepted records");
    std::string ingest_out;
    path_flag(ingest_cmd, "--feed-dir", "paths.feed_dir", "cvelist checkout");
    value_flag(ingest_cmd, "--first-year", "ingest.first_year", "First CVE year kept");
    value_flag(ingest_cmd, "--last-year", "ingest.last_year", "Last CVE year kept");
    ingest_cmd->add_option("-o,--out", ingest_out, "records JSONL (default stdout)");

    auto* narrow_cmd = app.add_subcommand("narrow", "Rank records by TF.IDF similarity to the catalog");
    std::string narrow_out;
    bool narrow_threshold_only = false;
    path_flag(narrow_cmd, "--records", "paths.records", "records JSONL");
    value_flag(narrow_cmd, "--top-n", "ingest.top_n", "Keep this many candidates");
    value_flag(narrow_cmd, "--min-score", "ingest.min_score", "Drop candidates below this score");
    narrow_cmd->add_flag("--threshold-only", narrow_threshold_only, "Apply --min-score without truncation");
    narrow_cmd->add_option("-o,--out", narrow_out, "candidates CSV (default stdout)");

    auto* scrape_cmd = app.add_subcommand("scrape", "Fetch NVD detail pages into the snapshot store");
    std::string scrape_fixtures;
    std::string scrape_base_url = "https://nvd.nist.gov";
    std::string scrape_out;
    std::vector<std::string> scrape_ids;
    bool scrape_refetch = false;
    bool scrape_replay = false;
    path_flag(scrape_cmd, "--records", "paths.records", "records JSONL whose ids are scraped");
    path_flag(scrape_cmd, "--snapshot-dir", "paths.snapshot_dir", "Snapshot store directory");
    value_flag(scrape_cmd, "--rps", "ingest.requests_per_second", "Requests per second");
    scrape_cmd->add_option("--cve", scrape_ids, "Scrape these ids instead of the records");
    scrape_cmd->add_option("--fixture-dir", scrape_fixtures, "Serve pages from {dir}/{cve_id}.html");
    scrape_cmd->add_option("--base-url", scrape_base_url, "NVD base URL");
    scrape_cmd->add_flag("--refetch", scrape_refetch, "Fetch again even when a snapshot exists");
    scrape_cmd->add_flag("--replay", scrape_replay, "Re-parse stored snapshots without fetching");
    scrape_cmd->add_option("-o,--out", scrape_out, "Write records with NVD labels merged in");

    auto* preprocess_cmd = app.add_subcommand("preprocess", "Show cleanup, tokens and sentences");
    std::string preprocess_text;
    std::string preprocess_out;
    path_flag(preprocess_cmd, "--records", "paths.records", "records JSONL");
    path_flag(preprocess_cmd, "--gazetteer", "paths.gazetteer", "Gazetteer file");
    path_flag(preprocess_cmd, "--stopwords", "paths.stopwords", "Stopword file");
    preprocess_cmd->add_option("--text", preprocess_text, "Process this text instead of records");
    preprocess_cmd->add_option("-o,--out", preprocess_out, "JSONL output (default stdout)");

    auto* rank_cmd = app.add_subcommand("rank", "Rank the 25 catalog entries for CVE records");
    std::vector<std::string> rank_ids;
    std::string rank_out;
    bool rank_no_preproc = false;
    path_flag(rank_cmd, "--records", "paths.records", "records JSONL");
    path_flag(rank_cmd, "--embeddings", "paths.embeddings", "Embedding store JSONL");
    path_flag(rank_cmd, "--catalog", "paths.catalog", "Catalog JSON");
    value_flag(rank_cmd, "--ranker", "rank.ranker", "bm25, cosine or external");
    value_flag(rank_cmd, "--k1", "rank.k1", "BM25 k1");
    value_flag(rank_cmd, "--b", "rank.b", "BM25 b");
    value_flag(rank_cmd, "--aggregation", "rank.aggregation", "max or mean");
    value_flag(rank_cmd, "--scorer-url", "rank.scorer_url", "Scorer base URL");
    value_flag(rank_cmd, "--fan-out", "rank.fan_out", "Concurrent scorer requests");
    rank_cmd->add_option("--cve", rank_ids, "Only rank these ids");
    rank_cmd->add_flag("--no-preproc", rank_no_preproc, "Skip cleanup");
    rank_cmd->add_option("-o,--out", rank_out, "RankedList JSONL (default stdout)");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a ranker against a labelled dataset");
    bool eval_preproc = false;
    bool eval_no_preproc = false;
    bool eval_ablation = false;
    bool eval_test_only = false;
    bool eval_first_of_chain = false;
    std::string eval_json;
    std::string eval_plot_dir;
    path_flag(eval_cmd, "--dataset", "paths.dataset", "dataset CSV");
    path_flag(eval_cmd, "--records", "paths.records", "records JSONL with the CVE texts");
    path_flag(eval_cmd, "--embeddings", "paths.embeddings", "Embedding store JSONL");
    value_flag(eval_cmd, "--ranker", "rank.ranker", "bm25, cosine or external");
    value_flag(eval_cmd, "--k1", "rank.k1", "BM25 k1");
    value_flag(eval_cmd, "--b", "rank.b", "BM25 b");
    value_flag(eval_cmd, "--aggregation", "rank.aggregation", "max or mean");
    value_flag(eval_cmd, "--scorer-url", "rank.scorer_url", "Scorer base URL");
    value_flag(eval_cmd, "--ks", "eval.ks", "Cutoffs, e.g. 1,2,3,5");
    value_flag(eval_cmd, "--seed", "eval.seed", "Split seed");
    eval_cmd->add_flag("--preproc", eval_preproc, "Clean CVE text first (default)");
    eval_cmd->add_flag("--no-preproc", eval_no_preproc, "Rank raw CVE text");
    eval_cmd->add_flag("--ablation", eval_ablation, "Run with and without cleanup");
    eval_cmd->add_flag("--test-split", eval_test_only, "Evaluate on the 20% stratified test split only");
    eval_cmd->add_flag("--first-of-chain", eval_first_of_chain, "Score causal rows by their first label");
    eval_cmd->add_option("--json", eval_json, "Write the report(s) as JSON");
    eval_cmd->add_option("--plot-dir", eval_plot_dir, "Write SVG bar charts per metric");

    auto* split_cmd = app.add_subcommand("split", "Stratified train/test split of single-label rows");
    std::string split_out_dir;
    path_flag(split_cmd, "--dataset", "paths.dataset", "dataset CSV");
    value_flag(split_cmd, "--seed", "eval.seed", "Random seed");
    value_flag(split_cmd, "--train-fraction", "eval.train_fraction", "Share of rows in train");
    split_cmd->add_option("--out-dir", split_out_dir, "Directory for train.csv and test.csv")->required();

    auto* export_cmd = app.add_subcommand("export-train", "Training pairs with sampled negatives");
    std::string export_out;
    bool export_no_preproc = false;
    path_flag(export_cmd, "--dataset", "paths.dataset", "dataset CSV");
    path_flag(export_cmd, "--records", "paths.records", "records JSONL with the CVE texts");
    value_flag(export_cmd, "--negatives", "eval.negatives", "Negatives per positive");
    value_flag(export_cmd, "--seed", "eval.seed", "Random seed");
    export_cmd->add_flag("--no-preproc", export_no_preproc, "Use raw CVE text as the query");
    export_cmd->add_option("-o,--out", export_out, "JSONL output (default stdout)");

    auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics");
    std::string stats_path;
    bool stats_json = false;
    stats_cmd->add_option("dataset", stats_path, "dataset CSV or JSONL")->required();
    stats_cmd->add_flag("--json", stats_json, "Print JSON");

    auto* serve_cmd = app.add_subcommand("serve", "Run the annotation API");
    std::string serve_assist = "bm25";
    path_flag(serve_cmd, "--records", "paths.records", "records JSONL forming the annotation pool");
    path_flag(serve_cmd, "--journal", "paths.journal", "Decision journal JSONL");
    path_flag(serve_cmd, "--feedback-log", "paths.feedback_log", "Feedback log JSONL");
    path_flag(serve_cmd, "--static-dir", "paths.static_dir", "Frontend assets");
    value_flag(serve_cmd, "--host", "serve.host", "Bind address");
    value_flag(serve_cmd, "--port", "serve.port", "Bind port");
    value_flag(serve_cmd, "--annotators", "serve.annotators", "Three annotator ids, e.g. A,B,C");
    serve_cmd->add_option("--assist", serve_assist, "Ranking shown to annotators: bm25 or none")
        ->check(CLI::IsMember({"bm25", "none"}));

    auto* score_cmd = app.add_subcommand("score-generated", "Macro F1 of generated weakness names");
    std::string score_predictions;
    bool score_json = false;
    path_flag(score_cmd, "--dataset", "paths.dataset", "gold dataset CSV");
    score_cmd->add_option("--predictions", score_predictions, "{cve_id, label} JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    score_cmd->add_flag("--json", score_json, "Print JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
    }

    config::RunConfig cfg;
    if (!config_path.empty()) {
        cfg = config::load(config_path);
    }
    cfg = config::apply(overrides, cfg);
    if (jobs) {
        cfg.jobs = *jobs;
    }
    cfg.bm25.validate();
    Resources res(cfg);

    if (*ingest_cmd) {
        config::require_paths(cfg, {"feed_dir"});
        auto parsed = ingest::parse_feed(cfg.feed_dir, {cfg.first_year, cfg.last_year});
        for (const auto& s : parsed.skipped) {
            std::cerr << "skipped " << s.source.string() << ": " << s.reason << "\n";
        }
        auto all = ingest::records_of(parsed.records);
        auto accepted = ingest::filter_accepted(all);
        std::cerr << "parsed " << all.size() << ", accepted " << accepted.size() << ", skipped "
                  << parsed.skipped.size() << "\n";
        write_output(ingest_out, ingest::records_to_jsonl(accepted));
    } else if (*narrow_cmd) {
        auto records = require_records(cfg);
        ingest::NarrowOptions options;
        if (!narrow_threshold_only) {
            options.top_n = static_cast<std::size_t>(std::max(0, cfg.top_n));
        }
        if (cfg.min_score > 0.0) {
            options.min_score = cfg.min_score;
        }
        auto result = ingest::narrow_candidates(records, *res.catalog, options, res.stopwords);
        for (const auto& [id, reason] : result.dropped) {
            std::cerr << "dropped " << id << ": " << reason << "\n";
        }
        write_output(narrow_out, ingest::candidates_to_csv(result.candidates));
    } else if (*scrape_cmd) {
        config::require_paths(cfg, {"snapshot_dir"});
        std::vector<corpus::CveRecord> records;
        if (scrape_ids.empty()) {
            records = require_records(cfg);
            for (const auto& r : records) {
                scrape_ids.push_back(r.cve_id);
            }
        }
        ingest::SnapshotStore store(cfg.snapshot_dir);
        std::size_t failures = 0;
        if (scrape_replay) {
            for (const auto& id : scrape_ids) {
                if (!store.replay(id)) {
                    std::cerr << "no snapshot for " << id << "\n";
                    ++failures;
                }
            }
        } else {
            std::unique_ptr<ingest::PageFetcher> fetcher;
            if (!scrape_fixtures.empty()) {
                fetcher = std::make_unique<ingest::FixtureFetcher>(scrape_fixtures);
            } else {
                fetcher = std::make_unique<ingest::HttpFetcher>(scrape_base_url, cfg.requests_per_second);
            }
            auto outcomes = ingest::scrape_all(scrape_ids, *fetcher, store, {}, cfg.jobs, scrape_refetch);
            for (const auto& o : outcomes) {
                if (!o.ok) {
                    std::cerr << "failed " << o.cve_id << ": " << o.error << "\n";
                    ++failures;
                }
            }
        }
        if (!scrape_out.empty()) {
            for (auto& r : records) {
                if (auto snapshot = store.replay(r.cve_id)) {
                    r.nvd_labels = {snapshot->parsed_labels.begin(), snapshot->parsed_labels.end()};
                }
            }
            write_output(scrape_out, ingest::records_to_jsonl(records));
        }
        std::cerr << "scraped " << scrape_ids.size() - failures << " of " << scrape_ids.size() << "\n";
        if (failures > 0) {
            return static_cast<int>(ErrorKind::upstream);
        }
    } else if (*preprocess_cmd) {
        auto describe = [&](const std::string& id, const std::string& text) {
            auto report = preprocess::cleanup(text, res.gazetteer);
            json removed = json::array();
            for (const auto& span : report.removed) {
                removed.push_back({{"begin", span.begin},
                                   {"end", span.end},
                                   {"category", preprocess::to_string(span.category)},
                                   {"text", span.text}});
            }
            json obj = {{"input", report.input},
                        {"output", report.output},
                        {"removed", removed},
                        {"tokens", preprocess::tokenize(report.output, res.stopwords)},
                        {"sentences", preprocess::segment_sentences(report.output)}};
            if (!id.empty()) {
                obj["cve_id"] = id;
            }
            return obj.dump() + "\n";
        };
        std::string out;
        if (!preprocess_text.empty()) {
            out = describe("", preprocess_text);
        } else {
            for (const auto& r : require_records(cfg)) {
                out += describe(r.cve_id, r.text());
            }
        }
        write_output(preprocess_out, out);
    } else if (*rank_cmd) {
        auto records = require_records(cfg);
        if (!rank_ids.empty()) {
            std::vector<corpus::CveRecord> chosen;
            auto indexed = index_records(records);
            for (const auto& id : rank_ids) {
                auto it = indexed.find(id);
                if (it == indexed.end()) {
                    throw DataError("no record for " + id);
                }
                chosen.push_back(it->second);
            }
            records = std::move(chosen);
        }
        std::string out;
        for (const auto& r : rank_records(cfg, res, records, cfg.preprocess && !rank_no_preproc)) {
            out += r.to_json() + "\n";
        }
        write_output(rank_out, out);
    } else if (*eval_cmd) {
        if (eval_preproc && eval_no_preproc) {
            throw UsageError("--preproc and --no-preproc are exclusive");
        }
        config::require_paths(cfg, {"dataset"});
        auto rows = corpus::load_dataset(cfg.dataset);
        auto records = index_records(require_records(cfg));
        std::vector<corpus::DatasetRow> gold = rows;
        if (eval_test_only) {
            gold = eval::stratified_split(corpus::single_label_rows(rows), {cfg.train_fraction, cfg.seed}).test;
        }
        std::vector<eval::EvalReport> reports;
        if (eval_ablation) {
            reports.push_back(run_eval(cfg, res, gold, records, false, eval_first_of_chain));
            reports.push_back(run_eval(cfg, res, gold, records, true, eval_first_of_chain));
        } else {
            const bool cleanup = eval_no_preproc ? false : (eval_preproc || cfg.preprocess);
            reports.push_back(run_eval(cfg, res, gold, records, cleanup, eval_first_of_chain));
        }
        std::cout << eval::format_table(reports);
        if (reports.size() == 2) {
            char line[64];
            std::snprintf(line, sizeof(line), "MRR delta (+preproc - -preproc): %+.4f\n",
                          reports[1].mrr - reports[0].mrr);
            std::cout << line;
        }
        if (!eval_json.empty()) {
            json arr = json::array();
            for (const auto& r : reports) {
                arr.push_back(json::parse(r.to_json()));
            }
            write_output(eval_json, (reports.size() == 1 ? arr[0] : arr).dump(2) + "\n");
        }
        if (!eval_plot_dir.empty()) {
            for (const auto& p : plot::write_metric_charts(reports, eval_plot_dir)) {
                std::cerr << "wrote " << p.string() << "\n";
            }
        }
    } else if (*split_cmd) {
        config::require_paths(cfg, {"dataset"});
        auto rows = corpus::single_label_rows(corpus::load_dataset(cfg.dataset));
        auto result = eval::stratified_split(rows, {cfg.train_fraction, cfg.seed});
        for (const auto& w : result.warnings) {
            std::cerr << "warning: " << w << "\n";
        }
        std::filesystem::create_directories(split_out_dir);
        corpus::save_dataset(result.train, std::filesystem::path(split_out_dir) / "train.csv");
        corpus::save_dataset(result.test, std::filesystem::path(split_out_dir) / "test.csv");
        std::cout << "train " << result.train.size() << "\ntest  " << result.test.size() << "\n";
    } else if (*export_cmd) {
        config::require_paths(cfg, {"dataset"});
        auto rows = corpus::single_label_rows(corpus::load_dataset(cfg.dataset));
        auto records = index_records(require_records(cfg));
        eval::ExportOptions options{cfg.negatives, cfg.seed};
        auto pairs = eval::export_training_pairs(rows, records, *res.catalog, options,
                                                 res.pipeline(!export_no_preproc));
        std::cerr << "pairs " << pairs.size() << "\n";
        write_output(export_out, eval::training_pairs_to_jsonl(pairs));
    } else if (*stats_cmd) {
        std::vector<corpus::DatasetRow> rows = corpus::load_dataset(stats_path);
        auto stats = corpus::dataset_stats(rows);
        if (stats_json) {
            json per_label = json::object();
            for (int rank = 1; rank <= corpus::kCatalogSize; ++rank) {
                per_label[res.catalog->by_rank(rank).cwe_id] = stats.per_label_counts[static_cast<std::size_t>(rank - 1)];
            }
            std::cout << json{{"total", stats.total},
                              {"single", stats.single_count},
                              {"causal", stats.causal_count},
                              {"per_label", per_label}}
                             .dump(2)
                      << "\n";
        } else {
            std::cout << stats_text(stats, *res.catalog);
        }
    } else if (*serve_cmd) {
        auto records = require_records(cfg);
        annotate::WorkflowOptions options;
        options.journal = cfg.journal;
        options.feedback_log = cfg.feedback_log;
        std::shared_ptr<rank::Bm25Ranker> ranker;
        if (serve_assist == "bm25") {
            ranker = std::make_shared<rank::Bm25Ranker>(*res.catalog, cfg.bm25, res.stopwords);
            auto pipeline = res.pipeline(cfg.preprocess);
            options.ranker = [ranker, pipeline](const corpus::CveRecord& r) { return ranker->rank(r, pipeline); };
        }
        annotate::Workflow workflow(records, cfg.annotators, *res.catalog, options);
        annotate::AnnotationServer server(workflow, {cfg.static_dir});
        std::cerr << "serving " << records.size() << " tasks on http://" << cfg.host << ":" << cfg.port << "\n";
        server.run(cfg.host, cfg.port);
    } else if (*score_cmd) {
        config::require_paths(cfg, {"dataset"});
        auto rows = corpus::load_dataset(cfg.dataset);
        std::ifstream in(score_predictions);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto report = eval::macro_f1(eval::parse_predictions_jsonl(text), rows, *res.catalog);
        if (score_json) {
            std::cout << report.to_json() << "\n";
        } else {
            for (const auto& c : report.classes) {
                char line[512];
                std::snprintf(line, sizeof(line), "%-6s %5.2f  %s\n", c.in_catalog ? "" : "new", c.f1,
                              c.label.c_str());
                std::cout << line;
            }
            char line[64];
            std::snprintf(line, sizeof(line), "macro avg F1 %.4f over %zu classes\n", report.macro_f1,
                          report.classes.size());
            std::cout << line;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cvemap::Error& e) {
        static constexpr const char* kNames[] = {"", "usage", "data", "upstream"};
        const int code = static_cast<int>(e.kind());
        std::cerr << nlohmann::json{{"error", kNames[code]}, {"message", e.what()}}.dump() << "\n";
        return code;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << nlohmann::json{{"error", "data"}, {"message", e.what()}}.dump() << "\n";
        return static_cast<int>(cvemap::ErrorKind::data);
    }
}

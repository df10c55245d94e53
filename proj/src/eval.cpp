#include "cvemap/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <thread>

#include <json.hpp>

#include "cvemap/error.hpp"
#include "file_io.hpp"

namespace cvemap::eval {

using nlohmann::json;

namespace {

void check_k(int k) {
    if (k < 1) {
        throw UsageError("cutoff k must be >= 1, got " + std::to_string(k));
    }
}

std::string fixed4(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.4f", v);
    return buffer;
}

}  // namespace

double reciprocal_rank(const rank::RankedList& ranked, int truth) {
    return 1.0 / ranked.position_of(truth);
}

double average_precision_at_k(const rank::RankedList& ranked, int truth, int k) {
    check_k(k);
    const int position = ranked.position_of(truth);
    return position <= k ? 1.0 / position : 0.0;
}

double ndcg_at_k(const rank::RankedList& ranked, int truth, int k) {
    check_k(k);
    const int position = ranked.position_of(truth);
    return position <= k ? 1.0 / std::log2(position + 1.0) : 0.0;
}

std::string EvalReport::to_json() const {
    json map_json = json::object();
    json ndcg_json = json::object();
    for (const auto& [k, v] : map_at) {
        map_json[std::to_string(k)] = v;
    }
    for (const auto& [k, v] : ndcg_at) {
        ndcg_json[std::to_string(k)] = v;
    }
    json obj = {{"model", model}, {"mrr", mrr}, {"map_at", map_json}, {"ndcg_at", ndcg_json},
                {"n_queries", n_queries}};
    return obj.dump(2);
}

EvalReport EvalReport::from_json(std::string_view text) {
    try {
        auto obj = json::parse(text);
        EvalReport report;
        report.model = obj.at("model").get<std::string>();
        report.mrr = obj.at("mrr").get<double>();
        for (const auto& [k, v] : obj.at("map_at").items()) {
            report.map_at[std::stoi(k)] = v.get<double>();
        }
        for (const auto& [k, v] : obj.at("ndcg_at").items()) {
            report.ndcg_at[std::stoi(k)] = v.get<double>();
        }
        report.n_queries = obj.value("n_queries", std::size_t{0});
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed eval report: ") + e.what());
    }
}

std::vector<std::string> check_invariants(const EvalReport& report, double tolerance) {
    std::vector<std::string> problems;
    auto fail = [&](std::string what) { problems.push_back(report.model + ": " + std::move(what)); };
    auto in_unit = [&](const std::string& name, double v) {
        if (!(v >= -tolerance && v <= 1.0 + tolerance)) {
            fail(name + " outside [0, 1]");
        }
    };
    in_unit("MRR", report.mrr);
    if (report.map_at.count(1) && report.ndcg_at.count(1) &&
        std::abs(report.map_at.at(1) - report.ndcg_at.at(1)) > tolerance) {
        fail("MAP@1 != NDCG@1");
    }
    for (const auto& [k, map] : report.map_at) {
        in_unit("MAP@" + std::to_string(k), map);
        if (report.mrr + tolerance < map) {
            fail("MRR < MAP@" + std::to_string(k));
        }
        auto ndcg = report.ndcg_at.find(k);
        if (ndcg != report.ndcg_at.end() && ndcg->second + tolerance < map) {
            fail("NDCG@" + std::to_string(k) + " < MAP@" + std::to_string(k));
        }
    }
    auto monotone = [&](const std::map<int, double>& values, const std::string& name) {
        const double* prev = nullptr;
        int prev_k = 0;
        for (const auto& [k, v] : values) {
            if (prev != nullptr && v + tolerance < *prev) {
                fail(name + "@" + std::to_string(k) + " < " + name + "@" + std::to_string(prev_k));
            }
            prev = &v;
            prev_k = k;
        }
    };
    monotone(report.map_at, "MAP");
    monotone(report.ndcg_at, "NDCG");
    for (const auto& [k, v] : report.ndcg_at) {
        in_unit("NDCG@" + std::to_string(k), v);
    }
    return problems;
}

std::string format_table(std::span<const EvalReport> reports) {
    std::set<int> ks;
    for (const auto& r : reports) {
        for (const auto& [k, v] : r.map_at) {
            ks.insert(k);
        }
        for (const auto& [k, v] : r.ndcg_at) {
            ks.insert(k);
        }
    }
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"model", "n", "MRR"};
    for (int k : ks) {
        header.push_back("MAP@" + std::to_string(k));
    }
    for (int k : ks) {
        header.push_back("NDCG@" + std::to_string(k));
    }
    rows.push_back(header);
    for (const auto& r : reports) {
        std::vector<std::string> row = {r.model, std::to_string(r.n_queries), fixed4(r.mrr)};
        for (int k : ks) {
            auto it = r.map_at.find(k);
            row.push_back(it == r.map_at.end() ? "-" : fixed4(it->second));
        }
        for (int k : ks) {
            auto it = r.ndcg_at.find(k);
            row.push_back(it == r.ndcg_at.end() ? "-" : fixed4(it->second));
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::string out;
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == 0) {
                line += row[c] + std::string(widths[c] - row[c].size(), ' ');
            } else {
                line += "  " + std::string(widths[c] - row[c].size(), ' ') + row[c];
            }
        }
        out += line + "\n";
    }
    return out;
}

EvalReport evaluate(std::string model, const std::map<std::string, rank::RankedList>& rankings,
                    std::span<const corpus::DatasetRow> gold, const EvaluateOptions& options) {
    for (int k : options.ks) {
        check_k(k);
    }
    struct Query {
        const rank::RankedList* ranking;
        int truth;
    };
    std::vector<Query> queries;
    for (const auto& row : gold) {
        if (row.assignment.is_causal() && !options.first_of_chain) {
            continue;
        }
        auto it = rankings.find(row.cve_id);
        if (it == rankings.end()) {
            throw DataError("no ranking for gold row " + row.cve_id);
        }
        queries.push_back({&it->second, row.assignment.first()});
    }

    const std::size_t width = 1 + 2 * options.ks.size();
    std::vector<double> values(queries.size() * width);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) {
            const auto& q = queries[i];
            double* out = &values[i * width];
            out[0] = reciprocal_rank(*q.ranking, q.truth);
            for (std::size_t j = 0; j < options.ks.size(); ++j) {
                out[1 + j] = average_precision_at_k(*q.ranking, q.truth, options.ks[j]);
                out[1 + options.ks.size() + j] = ndcg_at_k(*q.ranking, q.truth, options.ks[j]);
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        for (unsigned t = 1; t < std::max(1u, options.jobs); ++t) {
            threads.emplace_back(worker);
        }
        worker();
    }

    std::vector<double> sums(width, 0.0);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t c = 0; c < width; ++c) {
            sums[c] += values[i * width + c];
        }
    }
    EvalReport report;
    report.model = std::move(model);
    report.n_queries = queries.size();
    const double n = queries.empty() ? 1.0 : static_cast<double>(queries.size());
    report.mrr = sums[0] / n;
    for (std::size_t j = 0; j < options.ks.size(); ++j) {
        report.map_at[options.ks[j]] = sums[1 + j] / n;
        report.ndcg_at[options.ks[j]] = sums[1 + options.ks.size() + j] / n;
    }
    return report;
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
    if (bound == 0) {
        throw UsageError("empty range");
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x < limit) {
            return x % bound;
        }
    }
}

namespace {

bool row_less(const corpus::DatasetRow& a, const corpus::DatasetRow& b) {
    return corpus::cve_id_less(a.cve_id, b.cve_id);
}

}  // namespace

SplitResult stratified_split(std::span<const corpus::DatasetRow> rows, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw UsageError("train fraction must be in (0, 1)");
    }
    std::array<std::vector<corpus::DatasetRow>, corpus::kCatalogSize> classes;
    for (const auto& row : rows) {
        if (!row.assignment.is_single()) {
            throw DataError("stratified split takes single-label rows only, got " + row.cve_id + "," +
                            row.assignment.str());
        }
        classes[static_cast<std::size_t>(row.assignment.first() - 1)].push_back(row);
    }
    SplitResult result;
    SeededRng rng(spec.seed);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        auto& members = classes[c];
        if (members.empty()) {
            continue;
        }
        std::sort(members.begin(), members.end(), row_less);
        if (members.size() < 2) {
            result.warnings.push_back("label " + std::to_string(c + 1) + " has " + std::to_string(members.size()) +
                                      " row; kept in train");
            result.train.insert(result.train.end(), members.begin(), members.end());
            continue;
        }
        rng.shuffle(members);
        const double n = static_cast<double>(members.size());
        auto n_test = static_cast<std::size_t>(std::llround(n * (1.0 - spec.train_fraction)));
        n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
        result.test.insert(result.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        result.train.insert(result.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    std::sort(result.train.begin(), result.train.end(), row_less);
    std::sort(result.test.begin(), result.test.end(), row_less);
    return result;
}

std::vector<TrainingPair> export_training_pairs(std::span<const corpus::DatasetRow> rows,
                                                const std::map<std::string, corpus::CveRecord>& records,
                                                const corpus::Catalog& catalog, const ExportOptions& options,
                                                const rank::TextPipeline& pipeline) {
    if (options.negatives_per_positive < 1 || options.negatives_per_positive > corpus::kCatalogSize - 1) {
        throw UsageError("negatives per positive must be in 1..24");
    }
    std::vector<corpus::DatasetRow> ordered(rows.begin(), rows.end());
    std::sort(ordered.begin(), ordered.end(), row_less);

    SeededRng rng(options.seed);
    std::vector<TrainingPair> pairs;
    pairs.reserve(ordered.size() * static_cast<std::size_t>(1 + options.negatives_per_positive));
    for (const auto& row : ordered) {
        if (!row.assignment.is_single()) {
            throw DataError("training export takes single-label rows only, got " + row.cve_id);
        }
        auto record = records.find(row.cve_id);
        if (record == records.end()) {
            throw DataError("no CVE text for " + row.cve_id);
        }
        const auto query = pipeline.query_text(record->second);
        const int positive = row.assignment.first();
        auto pair_for = [&](int rank, int relevance) {
            const auto& doc = catalog.collated(rank);
            return TrainingPair{row.cve_id, doc.cwe_id, query, doc.text, relevance};
        };
        pairs.push_back(pair_for(positive, 1));

        std::vector<int> pool;
        for (int r = 1; r <= corpus::kCatalogSize; ++r) {
            if (r != positive) {
                pool.push_back(r);
            }
        }
        // Partial Fisher-Yates: the first n slots end up a uniform sample without replacement.
        for (int i = 0; i < options.negatives_per_positive; ++i) {
            const auto j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            pairs.push_back(pair_for(pool[static_cast<std::size_t>(i)], 0));
        }
    }
    return pairs;
}

std::string training_pairs_to_jsonl(std::span<const TrainingPair> pairs) {
    std::string out;
    for (const auto& p : pairs) {
        json obj = {{"cve_id", p.cve_id},
                    {"cwe_id", p.cwe_id},
                    {"query", p.query},
                    {"document", p.document},
                    {"relevance", p.relevance}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::string MacroF1Report::to_json() const {
    json arr = json::array();
    for (const auto& c : classes) {
        arr.push_back({{"label", c.label},
                       {"in_catalog", c.in_catalog},
                       {"support", c.support},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1}});
    }
    json obj = {{"classes", arr}, {"macro_f1", macro_f1}};
    return obj.dump(2);
}

std::string normalize_label_text(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c == '\'' || c == '"') {
            continue;
        }
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

MacroF1Report macro_f1(const std::map<std::string, std::string>& predictions,
                       std::span<const corpus::DatasetRow> gold, const corpus::Catalog& catalog) {
    std::map<std::string, int> name_to_rank;
    for (const auto& e : catalog.entries()) {
        name_to_rank[normalize_label_text(e.name)] = e.rank;
    }
    // Catalog classes are keyed "#<rank>", novel strings by their normalized text.
    auto key_of_rank = [](int rank) { return "#" + std::to_string(100 + rank); };
    struct Counts {
        std::size_t tp = 0, fp = 0, fn = 0, support = 0;
        std::string label;
        bool in_catalog = false;
    };
    std::map<std::string, Counts> counts;
    auto touch = [&](const std::string& key, const std::string& label, bool in_catalog) -> Counts& {
        auto& c = counts[key];
        if (c.label.empty()) {
            c.label = label;
            c.in_catalog = in_catalog;
        }
        return c;
    };
    for (const auto& row : gold) {
        if (!row.assignment.is_single()) {
            continue;
        }
        const int truth = row.assignment.first();
        auto& gold_class = touch(key_of_rank(truth), catalog.by_rank(truth).name, true);
        ++gold_class.support;
        auto pred = predictions.find(row.cve_id);
        if (pred == predictions.end()) {
            ++gold_class.fn;
            continue;
        }
        const auto text = normalize_label_text(pred->second);
        auto known = name_to_rank.find(text);
        Counts* predicted = known != name_to_rank.end()
                                ? &touch(key_of_rank(known->second), catalog.by_rank(known->second).name, true)
                                : &touch(text, text, false);
        if (predicted == &gold_class) {
            ++gold_class.tp;
        } else {
            ++predicted->fp;
            ++gold_class.fn;
        }
    }
    MacroF1Report report;
    double sum = 0.0;
    for (const auto& [key, c] : counts) {
        ClassF1 f;
        f.label = c.label;
        f.in_catalog = c.in_catalog;
        f.support = c.support;
        f.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
        f.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        f.f1 = f.precision + f.recall == 0.0 ? 0.0 : 2.0 * f.precision * f.recall / (f.precision + f.recall);
        sum += f.f1;
        report.classes.push_back(std::move(f));
    }
    report.macro_f1 = report.classes.empty() ? 0.0 : sum / static_cast<double>(report.classes.size());
    return report;
}

std::map<std::string, std::string> parse_predictions_jsonl(std::string_view text) {
    std::map<std::string, std::string> out;
    auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto obj = json::parse(lines[i]);
            auto id = obj.at("cve_id").get<std::string>();
            if (!out.emplace(id, obj.at("label").get<std::string>()).second) {
                throw DataError("prediction line " + std::to_string(i + 1) + ": duplicate " + id);
            }
        } catch (const json::exception& e) {
            throw DataError("prediction line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace cvemap::eval

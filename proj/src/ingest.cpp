#include "cvemap/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "cvemap/error.hpp"
#include "file_io.hpp"

namespace cvemap::ingest {

using nlohmann::json;

namespace {

std::string pick_english(const json& list, const char* value_key) {
    if (!list.is_array()) {
        return {};
    }
    std::string fallback;
    for (const auto& item : list) {
        if (!item.is_object() || !item.contains(value_key) || !item[value_key].is_string()) {
            continue;
        }
        auto lang = item.value("lang", std::string());
        auto value = item[value_key].get<std::string>();
        if (lang == "eng" || lang == "en" || lang.rfind("en-", 0) == 0) {
            return value;
        }
        if (fallback.empty()) {
            fallback = value;
        }
    }
    return fallback;
}

// cvelist JSON 4.0: CVE_data_meta / description.description_data
std::optional<FeedRecord> parse_v4(const json& doc, std::string& reason) {
    const auto& meta = doc.at("CVE_data_meta");
    FeedRecord out;
    out.record.cve_id = meta.at("ID").get<std::string>();
    out.record.state = corpus::record_state_from_string(meta.value("STATE", std::string()));
    out.record.title = meta.value("TITLE", std::string());
    out.assigner = meta.value("ASSIGNER", std::string());
    if (doc.contains("description")) {
        out.record.description = pick_english(doc["description"].value("description_data", json::array()), "value");
    }
    if (doc.contains("references")) {
        for (const auto& ref : doc["references"].value("reference_data", json::array())) {
            if (ref.contains("url") && ref["url"].is_string()) {
                out.reference_urls.push_back(ref["url"].get<std::string>());
            }
        }
    }
    (void)reason;
    return out;
}

// CVE JSON 5.x: cveMetadata / containers.cna
std::optional<FeedRecord> parse_v5(const json& doc, std::string& reason) {
    const auto& meta = doc.at("cveMetadata");
    FeedRecord out;
    out.record.cve_id = meta.at("cveId").get<std::string>();
    out.record.state = corpus::record_state_from_string(meta.value("state", std::string()));
    out.assigner = meta.value("assignerShortName", std::string());
    if (doc.contains("containers") && doc["containers"].contains("cna")) {
        const auto& cna = doc["containers"]["cna"];
        out.record.title = cna.value("title", std::string());
        out.record.description = pick_english(cna.value("descriptions", json::array()), "value");
        if (out.record.description.empty()) {
            out.record.description = pick_english(cna.value("rejectedReasons", json::array()), "value");
        }
        for (const auto& ref : cna.value("references", json::array())) {
            if (ref.contains("url") && ref["url"].is_string()) {
                out.reference_urls.push_back(ref["url"].get<std::string>());
            }
        }
    }
    (void)reason;
    return out;
}

}  // namespace

std::optional<FeedRecord> parse_feed_document(std::string_view json_text, std::string& reason) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        reason = std::string("invalid JSON: ") + e.what();
        return std::nullopt;
    }
    std::optional<FeedRecord> parsed;
    try {
        if (doc.is_object() && doc.contains("CVE_data_meta")) {
            parsed = parse_v4(doc, reason);
        } else if (doc.is_object() && doc.contains("cveMetadata")) {
            parsed = parse_v5(doc, reason);
        } else {
            reason = "schema violation: not a CVE record document";
            return std::nullopt;
        }
    } catch (const json::exception& e) {
        reason = std::string("schema violation: ") + e.what();
        return std::nullopt;
    }
    if (!corpus::CveId::parse(parsed->record.cve_id)) {
        reason = "schema violation: malformed id '" + parsed->record.cve_id + "'";
        return std::nullopt;
    }
    parsed->record.description = std::string(detail::trim(parsed->record.description));
    parsed->record.title = std::string(detail::trim(parsed->record.title));
    if (parsed->record.description.empty()) {
        reason = "missing description";
        return std::nullopt;
    }
    return parsed;
}

FeedParseResult parse_feed(const std::filesystem::path& dir, const FeedOptions& options) {
    FeedParseResult result;
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("feed directory does not exist: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (auto it = std::filesystem::recursive_directory_iterator(
             dir, std::filesystem::directory_options::skip_permission_denied, ec);
         it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) {
            result.skipped.push_back({it->path(), "unreadable: " + ec.message()});
            ec.clear();
            continue;
        }
        if (it->is_regular_file() && it->path().extension() == ".json") {
            // The file name carries the id, so out-of-window years are skipped unread.
            auto id = corpus::CveId::parse(it->path().stem().string());
            if (id && (id->year < options.first_year || id->year > options.last_year)) {
                continue;
            }
            files.push_back(it->path());
        }
    }
    std::sort(files.begin(), files.end());

    std::unordered_set<std::string> seen;
    for (const auto& file : files) {
        std::string text;
        try {
            text = detail::read_file(file);
        } catch (const DataError& e) {
            result.skipped.push_back({file, std::string("unreadable: ") + e.what()});
            continue;
        }
        std::string reason;
        auto record = parse_feed_document(text, reason);
        if (!record) {
            result.skipped.push_back({file, reason});
            continue;
        }
        auto id = corpus::CveId::parse(record->record.cve_id);
        if (id->year < options.first_year || id->year > options.last_year) {
            continue;
        }
        if (!seen.insert(record->record.cve_id).second) {
            result.skipped.push_back({file, "duplicate id " + record->record.cve_id});
            continue;
        }
        record->source = file;
        result.records.push_back(std::move(*record));
    }
    std::sort(result.records.begin(), result.records.end(), [](const FeedRecord& a, const FeedRecord& b) {
        return corpus::cve_id_less(a.record.cve_id, b.record.cve_id);
    });
    return result;
}

std::vector<corpus::CveRecord> filter_accepted(std::span<const corpus::CveRecord> records) {
    std::vector<corpus::CveRecord> out;
    for (const auto& r : records) {
        if (r.state == corpus::RecordState::accepted) {
            out.push_back(r);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const corpus::CveRecord& a, const corpus::CveRecord& b) {
        return corpus::cve_id_less(a.cve_id, b.cve_id);
    });
    return out;
}

std::vector<corpus::CveRecord> records_of(std::span<const FeedRecord> feed) {
    std::vector<corpus::CveRecord> out;
    out.reserve(feed.size());
    for (const auto& f : feed) {
        out.push_back(f.record);
    }
    return out;
}

std::string records_to_jsonl(std::span<const corpus::CveRecord> records) {
    std::string out;
    for (const auto& r : records) {
        json obj = {{"cve_id", r.cve_id},
                    {"title", r.title},
                    {"description", r.description},
                    {"state", std::string(corpus::to_string(r.state))},
                    {"nvd_labels", std::vector<std::string>(r.nvd_labels.begin(), r.nvd_labels.end())}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::vector<corpus::CveRecord> parse_records_jsonl(std::string_view text) {
    std::vector<corpus::CveRecord> out;
    auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto obj = json::parse(lines[i]);
            corpus::CveRecord r;
            r.cve_id = obj.at("cve_id").get<std::string>();
            r.title = obj.value("title", std::string());
            r.description = obj.value("description", std::string());
            r.state = corpus::record_state_from_string(obj.value("state", std::string("accepted")));
            for (const auto& label : obj.value("nvd_labels", json::array())) {
                r.nvd_labels.insert(label.get<std::string>());
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw DataError("records line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

std::vector<corpus::CveRecord> load_records(const std::filesystem::path& path) {
    return parse_records_jsonl(detail::read_file(path));
}

TfIdfModel::TfIdfModel(const corpus::Catalog& catalog, const preprocess::StopwordList& stopwords) {
    std::vector<std::vector<std::string>> doc_tokens;
    std::map<std::string, int> df;
    for (const auto& entry : catalog.entries()) {
        auto tokens = preprocess::tokenize(catalog.collated(entry.rank).text, stopwords);
        std::set<std::string> unique(tokens.begin(), tokens.end());
        for (const auto& t : unique) {
            ++df[t];
        }
        doc_tokens.push_back(std::move(tokens));
    }
    document_frequency_.assign(df.begin(), df.end());
    for (const auto& tokens : doc_tokens) {
        documents_.push_back(weigh(tokens));
    }
}

double TfIdfModel::idf(const std::string& term) const {
    auto it = std::lower_bound(document_frequency_.begin(), document_frequency_.end(), term,
                               [](const auto& entry, const std::string& t) { return entry.first < t; });
    const int df = (it != document_frequency_.end() && it->first == term) ? it->second : 0;
    return std::log(static_cast<double>(corpus::kCatalogSize) / (1.0 + df)) + 1.0;
}

TfIdfModel::SparseVector TfIdfModel::weigh(std::span<const std::string> tokens) const {
    std::map<std::string, int> tf;
    for (const auto& t : tokens) {
        ++tf[t];
    }
    SparseVector v;
    double sum_sq = 0.0;
    for (const auto& [term, count] : tf) {
        const double w = count * idf(term);
        v.weights.emplace_back(term, w);
        sum_sq += w * w;
    }
    v.norm = std::sqrt(sum_sq);
    return v;
}

std::array<double, corpus::kCatalogSize> TfIdfModel::similarities(std::span<const std::string> tokens) const {
    std::array<double, corpus::kCatalogSize> out{};
    const auto query = weigh(tokens);
    if (query.norm == 0.0) {
        return out;
    }
    for (std::size_t d = 0; d < documents_.size(); ++d) {
        const auto& doc = documents_[d];
        if (doc.norm == 0.0) {
            continue;
        }
        double dot = 0.0;
        auto qi = query.weights.begin();
        auto di = doc.weights.begin();
        while (qi != query.weights.end() && di != doc.weights.end()) {
            if (qi->first < di->first) {
                ++qi;
            } else if (di->first < qi->first) {
                ++di;
            } else {
                dot += qi->second * di->second;
                ++qi;
                ++di;
            }
        }
        out[d] = dot / (query.norm * doc.norm);
    }
    return out;
}

NarrowResult narrow_candidates(std::span<const corpus::CveRecord> records, const corpus::Catalog& catalog,
                               const NarrowOptions& options, const preprocess::StopwordList& stopwords) {
    const TfIdfModel model(catalog, stopwords);
    NarrowResult result;
    for (const auto& record : records) {
        auto tokens = preprocess::tokenize(record.text(), stopwords);
        if (tokens.empty()) {
            result.dropped.emplace_back(record.cve_id, "empty vocabulary after cleanup");
            continue;
        }
        auto sims = model.similarities(tokens);
        std::size_t best = 0;
        for (std::size_t i = 1; i < sims.size(); ++i) {
            if (sims[i] > sims[best]) {
                best = i;
            }
        }
        if (options.min_score && !(sims[best] >= *options.min_score)) {
            continue;
        }
        result.candidates.push_back({record.cve_id, static_cast<int>(best) + 1, sims[best]});
    }
    std::sort(result.candidates.begin(), result.candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return corpus::cve_id_less(a.cve_id, b.cve_id);
    });
    if (options.top_n && result.candidates.size() > *options.top_n) {
        result.candidates.resize(*options.top_n);
    }
    return result;
}

std::string candidates_to_csv(std::span<const Candidate> candidates) {
    std::string out = "cve_id,best_rank,score\n";
    char buffer[64];
    for (const auto& c : candidates) {
        std::snprintf(buffer, sizeof(buffer), "%.6f", c.score);
        out += c.cve_id;
        out += ',';
        out += std::to_string(c.best_rank);
        out += ',';
        out += buffer;
        out += '\n';
    }
    return out;
}

}  // namespace cvemap::ingest

#include "cvemap/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "cvemap/error.hpp"

namespace cvemap::rank {

using nlohmann::json;

RankedList RankedList::from_scores(std::string cve_id, std::span<const double> scores) {
    if (scores.size() != corpus::kCatalogSize) {
        throw DataError("expected 25 scores, got " + std::to_string(scores.size()));
    }
    RankedList list;
    list.cve_id = std::move(cve_id);
    list.entries.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw DataError("non-finite score for rank " + std::to_string(i + 1) + " of " + list.cve_id);
        }
        list.entries.push_back({static_cast<int>(i) + 1, scores[i]});
    }
    std::stable_sort(list.entries.begin(), list.entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
    return list;
}

int RankedList::position_of(int rank) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].rank == rank) {
            return static_cast<int>(i) + 1;
        }
    }
    throw DataError("rank " + std::to_string(rank) + " missing from ranking of " + cve_id);
}

double RankedList::score_of(int rank) const {
    return entries[static_cast<std::size_t>(position_of(rank) - 1)].score;
}

void RankedList::validate() const {
    if (entries.size() != corpus::kCatalogSize) {
        throw DataError("ranking of " + cve_id + " has " + std::to_string(entries.size()) + " entries");
    }
    std::set<int> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.rank < 1 || e.rank > corpus::kCatalogSize || !seen.insert(e.rank).second) {
            throw DataError("ranking of " + cve_id + " has an invalid or repeated rank");
        }
        if (!std::isfinite(e.score)) {
            throw DataError("ranking of " + cve_id + " has a non-finite score");
        }
        if (i > 0) {
            const auto& prev = entries[i - 1];
            if (prev.score < e.score || (prev.score == e.score && prev.rank > e.rank)) {
                throw DataError("ranking of " + cve_id + " is not sorted");
            }
        }
    }
}

std::string RankedList::to_json() const {
    json entries_json = json::array();
    for (const auto& e : entries) {
        entries_json.push_back({{"rank", e.rank}, {"score", e.score}});
    }
    json obj = {{"cve_id", cve_id}, {"fallback", fallback}, {"entries", entries_json}};
    return obj.dump();
}

RankedList RankedList::from_json(std::string_view text) {
    try {
        auto obj = json::parse(text);
        RankedList list;
        list.cve_id = obj.at("cve_id").get<std::string>();
        list.fallback = obj.value("fallback", false);
        for (const auto& e : obj.at("entries")) {
            list.entries.push_back({e.at("rank").get<int>(), e.at("score").get<double>()});
        }
        list.validate();
        return list;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed ranking: ") + e.what());
    }
}

std::string TextPipeline::query_text(const corpus::CveRecord& record) const {
    auto text = record.text();
    if (!cleanup) {
        return text;
    }
    return preprocess::cleanup(text, *gazetteer).output;
}

std::vector<std::string> TextPipeline::query_tokens(const corpus::CveRecord& record) const {
    return preprocess::tokenize(query_text(record), *stopwords);
}

std::vector<std::string> TextPipeline::query_sentences(const corpus::CveRecord& record) const {
    return preprocess::segment_sentences(query_text(record));
}

void Bm25Params::validate() const {
    if (!(k1 > 0.0) || !std::isfinite(k1)) {
        throw UsageError("bm25 k1 must be > 0");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw UsageError("bm25 b must be in [0, 1]");
    }
}

Bm25Ranker::Bm25Ranker(const corpus::Catalog& catalog, Bm25Params params, const preprocess::StopwordList& stopwords)
    : params_(params) {
    params_.validate();
    double total_length = 0.0;
    for (const auto& entry : catalog.entries()) {
        Document doc;
        auto tokens = preprocess::tokenize(catalog.collated(entry.rank).text, stopwords);
        for (const auto& t : tokens) {
            ++doc.term_frequency[t];
        }
        doc.length = static_cast<double>(tokens.size());
        total_length += doc.length;
        for (const auto& [term, tf] : doc.term_frequency) {
            ++document_frequency_[term];
        }
        documents_.push_back(std::move(doc));
    }
    average_length_ = total_length / static_cast<double>(documents_.size());
}

double Bm25Ranker::idf(const std::string& term) const {
    auto it = document_frequency_.find(term);
    const double df = it == document_frequency_.end() ? 0.0 : it->second;
    const double n = static_cast<double>(documents_.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

RankedList Bm25Ranker::rank_tokens(std::string cve_id, std::span<const std::string> query) const {
    std::array<double, corpus::kCatalogSize> scores{};
    for (std::size_t d = 0; d < documents_.size(); ++d) {
        const auto& doc = documents_[d];
        const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc.length / average_length_);
        double score = 0.0;
        for (const auto& term : query) {
            auto it = doc.term_frequency.find(term);
            if (it == doc.term_frequency.end()) {
                continue;
            }
            const double tf = it->second;
            score += idf(term) * (tf * (params_.k1 + 1.0)) / (tf + norm);
        }
        scores[d] = score;
    }
    auto list = RankedList::from_scores(std::move(cve_id), scores);
    list.fallback = std::all_of(scores.begin(), scores.end(), [](double s) { return s == 0.0; });
    return list;
}

RankedList Bm25Ranker::rank(const corpus::CveRecord& record, const TextPipeline& pipeline) const {
    return rank_tokens(record.cve_id, pipeline.query_tokens(record));
}

RankedList bm25_rank(const corpus::CveRecord& record, const corpus::Catalog& catalog, const Bm25Params& params,
                     const TextPipeline& pipeline) {
    return Bm25Ranker(catalog, params, *pipeline.stopwords).rank(record, pipeline);
}

}  // namespace cvemap::rank

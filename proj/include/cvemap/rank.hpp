#pragma once

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cvemap/corpus.hpp"
#include "cvemap/preprocess.hpp"

namespace cvemap::rank {

struct RankedEntry {
    int rank = 0;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

/// All 25 catalog ranks ordered by descending score; equal scores keep ascending rank.
struct RankedList {
    std::string cve_id;
    std::vector<RankedEntry> entries;
    /// Set when the ranker had nothing to score and the order is the rank fallback.
    bool fallback = false;

    /// Scores are indexed by rank - 1. Throws DataError on a non-finite score.
    static RankedList from_scores(std::string cve_id, std::span<const double> scores);

    /// 1-based position of `rank` in the list.
    [[nodiscard]] int position_of(int rank) const;
    [[nodiscard]] double score_of(int rank) const;
    [[nodiscard]] int top() const { return entries.front().rank; }
    /// Throws DataError unless the list has 25 unique ranks, is sorted and finite.
    void validate() const;
    [[nodiscard]] std::string to_json() const;
    static RankedList from_json(std::string_view text);

    bool operator==(const RankedList&) const = default;
};

/// How a CVE record turns into ranker input.
struct TextPipeline {
    bool cleanup = true;
    const preprocess::Gazetteer* gazetteer = &preprocess::Gazetteer::builtin();
    const preprocess::StopwordList* stopwords = &preprocess::StopwordList::builtin();

    [[nodiscard]] std::string query_text(const corpus::CveRecord& record) const;
    [[nodiscard]] std::vector<std::string> query_tokens(const corpus::CveRecord& record) const;
    /// Cleanup runs before segmentation.
    [[nodiscard]] std::vector<std::string> query_sentences(const corpus::CveRecord& record) const;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    void validate() const;
};

/// Okapi BM25 with the 25 collated catalog texts as the document collection.
class Bm25Ranker {
  public:
    Bm25Ranker(const corpus::Catalog& catalog, Bm25Params params = {},
               const preprocess::StopwordList& stopwords = preprocess::StopwordList::builtin());

    /// Sums over query tokens with multiplicity. When nothing matches (or the query is
    /// empty) every score is zero and the list is the flagged rank-order fallback.
    [[nodiscard]] RankedList rank_tokens(std::string cve_id, std::span<const std::string> query) const;
    [[nodiscard]] RankedList rank(const corpus::CveRecord& record, const TextPipeline& pipeline = {}) const;

    /// ln(1 + (N - df + 0.5) / (df + 0.5))
    [[nodiscard]] double idf(const std::string& term) const;
    [[nodiscard]] double average_length() const noexcept { return average_length_; }
    [[nodiscard]] const Bm25Params& params() const noexcept { return params_; }

  private:
    struct Document {
        std::unordered_map<std::string, int> term_frequency;
        double length = 0.0;
    };

    Bm25Params params_;
    std::vector<Document> documents_;
    std::unordered_map<std::string, int> document_frequency_;
    double average_length_ = 0.0;
};

RankedList bm25_rank(const corpus::CveRecord& record, const corpus::Catalog& catalog, const Bm25Params& params = {},
                     const TextPipeline& pipeline = {});

}  // namespace cvemap::rank

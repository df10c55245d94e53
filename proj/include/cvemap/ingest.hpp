#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvemap/corpus.hpp"
#include "cvemap/preprocess.hpp"

namespace cvemap::ingest {

/// One parsed cvelist document. Metadata is kept for provenance and otherwise unused.
struct FeedRecord {
    corpus::CveRecord record;
    std::filesystem::path source;
    std::string assigner;
    std::vector<std::string> reference_urls;
};

struct SkippedDocument {
    std::filesystem::path source;
    std::string reason;
};

struct FeedParseResult {
    std::vector<FeedRecord> records;
    std::vector<SkippedDocument> skipped;
};

struct FeedOptions {
    int first_year = 2020;
    int last_year = 2021;
};

/// Parses a single cvelist document (JSON 4.0 or 5.x record format). Returns nullopt and
/// fills `reason` when the document is not usable.
std::optional<FeedRecord> parse_feed_document(std::string_view json_text, std::string& reason);

/// Walks `dir` recursively for *.json documents in the cvelist layout. Records outside the
/// year window are ignored; unreadable or malformed documents and documents without a
/// description are reported in `skipped`. Output is sorted by CVE id.
FeedParseResult parse_feed(const std::filesystem::path& dir, const FeedOptions& options = {});

/// Keeps only accepted records, ordered by CVE id.
std::vector<corpus::CveRecord> filter_accepted(std::span<const corpus::CveRecord> records);
std::vector<corpus::CveRecord> records_of(std::span<const FeedRecord> feed);

/// records.jsonl: {cve_id, title, description, state, nvd_labels}
std::string records_to_jsonl(std::span<const corpus::CveRecord> records);
std::vector<corpus::CveRecord> parse_records_jsonl(std::string_view text);
std::vector<corpus::CveRecord> load_records(const std::filesystem::path& path);

/// Raw term frequency times ln(25 / (1 + df)) + 1, cosine normalized, with document
/// frequencies taken over the 25 collated catalog texts.
class TfIdfModel {
  public:
    TfIdfModel(const corpus::Catalog& catalog, const preprocess::StopwordList& stopwords);

    [[nodiscard]] double idf(const std::string& term) const;
    /// Cosine similarity of the token bag against each catalog document, by rank - 1.
    [[nodiscard]] std::array<double, corpus::kCatalogSize> similarities(
        std::span<const std::string> tokens) const;

  private:
    struct SparseVector {
        std::vector<std::pair<std::string, double>> weights;  // sorted by term
        double norm = 0.0;
    };

    [[nodiscard]] SparseVector weigh(std::span<const std::string> tokens) const;

    std::vector<std::pair<std::string, int>> document_frequency_;  // sorted by term
    std::vector<SparseVector> documents_;
};

struct Candidate {
    std::string cve_id;
    int best_rank = 0;
    double score = 0.0;
};

struct NarrowOptions {
    std::optional<std::size_t> top_n;
    std::optional<double> min_score;
};

struct NarrowResult {
    std::vector<Candidate> candidates;
    std::vector<std::pair<std::string, std::string>> dropped;  // (cve_id, reason)
};

/// Scores each record by its best TF.IDF cosine against the catalog and returns them by
/// descending score (ties by CVE id), thresholded by min_score and then truncated to top_n.
NarrowResult narrow_candidates(std::span<const corpus::CveRecord> records, const corpus::Catalog& catalog,
                               const NarrowOptions& options,
                               const preprocess::StopwordList& stopwords = preprocess::StopwordList::builtin());

/// `cve_id,best_rank,score`
std::string candidates_to_csv(std::span<const Candidate> candidates);

}  // namespace cvemap::ingest

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvemap/corpus.hpp"
#include "cvemap/rank.hpp"

namespace cvemap::rank {

/// Sentence vectors keyed by ("cve:{id}" | "cwe:{id}", sentence index), all of one dimension.
class EmbeddingStore {
  public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::size_t dim);

    /// Rejects dimension mismatches and non-finite components.
    void add(std::string key, std::size_t sentence, std::vector<double> vector);

    [[nodiscard]] const std::vector<double>* find(const std::string& key, std::size_t sentence) const;
    /// Throws DataError naming (key, sentence) when the vector is absent.
    [[nodiscard]] const std::vector<double>& at(const std::string& key, std::size_t sentence) const;
    [[nodiscard]] std::size_t sentence_count(const std::string& key) const;
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return vectors_.size(); }

    /// One {"key", "sent", "dim", "vec"} object per line.
    static EmbeddingStore parse_jsonl(std::string_view text);
    static EmbeddingStore load(const std::filesystem::path& path);
    [[nodiscard]] std::string to_jsonl() const;

    static std::string cve_key(std::string_view cve_id) { return "cve:" + std::string(cve_id); }
    static std::string cwe_key(std::string_view cwe_id) { return "cwe:" + std::string(cwe_id); }

  private:
    std::size_t dim_ = 0;
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> vectors_;
};

/// Zero when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

enum class Aggregation { max, mean };

Aggregation aggregation_from_string(std::string_view text);
std::string_view to_string(Aggregation aggregation);

/// Scores every catalog entry by aggregating sentence-pair cosines between the CVE's
/// `cve_sentences` vectors and each CWE's vectors. `cwe_sentences` is indexed by rank - 1.
RankedList cosine_sentence_rank(const std::string& cve_id, std::size_t cve_sentences,
                                std::span<const std::size_t> cwe_sentences, const corpus::Catalog& catalog,
                                const EmbeddingStore& store, Aggregation aggregation = Aggregation::max);

/// Sentence counts come from segmenting the cleaned CVE text and the collated CWE texts.
RankedList cosine_sentence_rank(const corpus::CveRecord& record, const corpus::Catalog& catalog,
                                const EmbeddingStore& store, Aggregation aggregation = Aggregation::max,
                                const TextPipeline& pipeline = {});

}  // namespace cvemap::rank

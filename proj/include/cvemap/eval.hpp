#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvemap/corpus.hpp"
#include "cvemap/rank.hpp"

namespace cvemap::eval {

inline const std::vector<int> kDefaultKs = {1, 2, 3, 5};

/// Single relevant label: 1 / position of `truth` in the ranking.
double reciprocal_rank(const rank::RankedList& ranked, int truth);
/// Truncated average precision, which for one relevant label is 1/position within the cutoff.
double average_precision_at_k(const rank::RankedList& ranked, int truth, int k);
/// Binary gain, log2 discount, ideal DCG of 1.
double ndcg_at_k(const rank::RankedList& ranked, int truth, int k);

struct EvalReport {
    std::string model;
    double mrr = 0.0;
    std::map<int, double> map_at;
    std::map<int, double> ndcg_at;
    std::size_t n_queries = 0;

    [[nodiscard]] std::string to_json() const;
    static EvalReport from_json(std::string_view text);
};

/// Descriptions of violated report invariants; empty when the report is consistent.
/// `tolerance` absorbs rounding in published figures.
std::vector<std::string> check_invariants(const EvalReport& report, double tolerance = 1e-12);

/// Plain-text table with one row per report: model, MRR, MAP@k..., NDCG@k...
std::string format_table(std::span<const EvalReport> reports);

struct EvaluateOptions {
    std::vector<int> ks = kDefaultKs;
    /// Score causal rows against the first element of their chain instead of skipping them.
    bool first_of_chain = false;
    unsigned jobs = 1;
};

/// Means of the per-query metrics over the gold rows. A gold row without a ranking is a DataError.
EvalReport evaluate(std::string model, const std::map<std::string, rank::RankedList>& rankings,
                    std::span<const corpus::DatasetRow> gold, const EvaluateOptions& options = {});

/// mt19937_64 with bounded draws by rejection, so sequences do not depend on the
/// standard library's distribution implementations.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
};

struct SplitResult {
    std::vector<corpus::DatasetRow> train;
    std::vector<corpus::DatasetRow> test;
    std::vector<std::string> warnings;
};

/// Per-label shuffle and cut. Classes with fewer than two rows go to train with a warning.
/// Both partitions are ordered by CVE id.
SplitResult stratified_split(std::span<const corpus::DatasetRow> rows, const SplitSpec& spec = {});

struct TrainingPair {
    std::string cve_id;
    std::string cwe_id;
    std::string query;
    std::string document;
    int relevance = 0;

    bool operator==(const TrainingPair&) const = default;
};

struct ExportOptions {
    int negatives_per_positive = 1;
    std::uint64_t seed = 42;
};

/// One positive and n negatives per single-label row, rows visited in CVE id order.
/// `records` supplies the query text; a row without a record is a DataError.
std::vector<TrainingPair> export_training_pairs(std::span<const corpus::DatasetRow> rows,
                                                const std::map<std::string, corpus::CveRecord>& records,
                                                const corpus::Catalog& catalog, const ExportOptions& options = {},
                                                const rank::TextPipeline& pipeline = {});

std::string training_pairs_to_jsonl(std::span<const TrainingPair> pairs);

struct ClassF1 {
    std::string label;
    bool in_catalog = false;
    std::size_t support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MacroF1Report {
    std::vector<ClassF1> classes;
    double macro_f1 = 0.0;

    [[nodiscard]] std::string to_json() const;
};

/// Lowercase, ASCII quotes dropped, whitespace collapsed.
std::string normalize_label_text(std::string_view text);

/// Scores generated weakness names against the gold single labels. Generated strings that
/// match no catalog name become classes of their own.
MacroF1Report macro_f1(const std::map<std::string, std::string>& predictions,
                       std::span<const corpus::DatasetRow> gold, const corpus::Catalog& catalog);

/// {cve_id, label} lines.
std::map<std::string, std::string> parse_predictions_jsonl(std::string_view text);

}  // namespace cvemap::eval

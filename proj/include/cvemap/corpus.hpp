#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvemap::corpus {

inline constexpr int kCatalogSize = 25;

/// Rank to CWE id mapping of the 2022 Top 25 list.
inline constexpr std::array<std::string_view, kCatalogSize> kTop25Ids2022 = {
    "CWE-787", "CWE-79",  "CWE-89",  "CWE-20",  "CWE-125", "CWE-78",  "CWE-416",
    "CWE-22",  "CWE-352", "CWE-434", "CWE-476", "CWE-502", "CWE-190", "CWE-287",
    "CWE-798", "CWE-862", "CWE-77",  "CWE-306", "CWE-119", "CWE-276", "CWE-918",
    "CWE-362", "CWE-400", "CWE-611", "CWE-94",
};

struct CweEntry {
    int rank = 0;
    std::string cwe_id;
    std::string name;
    std::string description;
    std::string extended_description;
    double cvss_score = 0.0;
};

/// Name, description and extended description joined into one document.
struct CollatedCweText {
    std::string cwe_id;
    std::string text;
    std::vector<std::string> sentences;
};

CollatedCweText collate(const CweEntry& entry);

/// The 25 weaknesses of one yearly list. Immutable after construction.
class Catalog {
  public:
    /// Validates count, rank uniqueness and (for version "2022") the official rank order.
    Catalog(std::string version, std::vector<CweEntry> entries);

    static Catalog load(const std::filesystem::path& path);
    static Catalog from_json_text(std::string_view json_text, std::string version);
    /// The 2022 list shipped in data/cwe_catalog_2022.json.
    static const Catalog& builtin();

    [[nodiscard]] const std::string& version() const noexcept { return version_; }
    [[nodiscard]] std::span<const CweEntry> entries() const noexcept { return entries_; }
    [[nodiscard]] const CweEntry& by_rank(int rank) const;
    [[nodiscard]] std::optional<int> rank_of(std::string_view cwe_id) const;
    [[nodiscard]] const CollatedCweText& collated(int rank) const;
    [[nodiscard]] std::string to_json_text() const;

  private:
    std::string version_;
    std::vector<CweEntry> entries_;
    std::vector<CollatedCweText> collated_;
};

struct CveId {
    int year = 0;
    std::uint64_t number = 0;

    /// Accepts CVE-YYYY-NNNN with four or more digits in the suffix.
    static std::optional<CveId> parse(std::string_view text);
    [[nodiscard]] std::string str() const;

    auto operator<=>(const CveId&) const = default;
};

/// Orders CVE ids by (year, number); falls back to string order for malformed ids.
bool cve_id_less(std::string_view a, std::string_view b);

enum class RecordState { accepted, rejected, reserved, other };

std::string_view to_string(RecordState state);
RecordState record_state_from_string(std::string_view text);

struct CveRecord {
    std::string cve_id;
    std::string title;
    std::string description;
    RecordState state = RecordState::other;
    std::set<std::string> nvd_labels;

    /// Description followed by the title, the text every ranker consumes.
    [[nodiscard]] std::string text() const;
};

/// A single label (one element) or a causal chain where each element leads to the next.
class LabelAssignment {
  public:
    LabelAssignment() = default;
    explicit LabelAssignment(std::vector<int> chain);

    static LabelAssignment parse(std::string_view text);

    [[nodiscard]] const std::vector<int>& chain() const noexcept { return chain_; }
    [[nodiscard]] bool is_single() const noexcept { return chain_.size() == 1; }
    [[nodiscard]] bool is_causal() const noexcept { return chain_.size() > 1; }
    [[nodiscard]] int first() const { return chain_.front(); }
    [[nodiscard]] std::string str() const;
    [[nodiscard]] std::vector<std::string> cwe_ids(const Catalog& catalog) const;

    bool operator==(const LabelAssignment&) const = default;

  private:
    std::vector<int> chain_;
};

inline LabelAssignment parse_label(std::string_view text) { return LabelAssignment::parse(text); }
inline std::string format_label(const LabelAssignment& assignment) { return assignment.str(); }

struct DatasetRow {
    std::string cve_id;
    LabelAssignment assignment;

    bool operator==(const DatasetRow&) const = default;
};

/// `cve_id,labels` CSV. Duplicate ids and malformed labels are data errors.
std::vector<DatasetRow> load_dataset(const std::filesystem::path& path);
std::vector<DatasetRow> parse_dataset_csv(std::string_view text);
void save_dataset(std::span<const DatasetRow> rows, const std::filesystem::path& path);
std::string dataset_to_csv(std::span<const DatasetRow> rows);

/// JSONL mirror, one {"cve_id", "labels"} object per line. Repeated ids are allowed here
/// and stand for several unrelated labels on the same record.
std::vector<DatasetRow> parse_dataset_jsonl(std::string_view text);
std::string dataset_to_jsonl(std::span<const DatasetRow> rows);

struct DatasetStats {
    std::size_t total = 0;
    std::size_t single_count = 0;
    std::size_t causal_count = 0;
    /// Indexed by rank - 1, single-label rows only.
    std::array<std::size_t, kCatalogSize> per_label_counts{};
};

DatasetStats dataset_stats(std::span<const DatasetRow> rows);

std::vector<DatasetRow> single_label_rows(std::span<const DatasetRow> rows);

}  // namespace cvemap::corpus

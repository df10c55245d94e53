#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cvemap::preprocess {

enum class Category { gazetteer, url, email, domain, cve_id, version, filepath };

std::string_view to_string(Category category);

/// A removed region in input coordinates, [begin, end).
struct RemovedSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    Category category = Category::gazetteer;
    std::string text;
};

struct CleanupReport {
    std::string input;
    std::string output;
    std::vector<RemovedSpan> removed;
};

/// Case-insensitive product and vendor phrases.
class Gazetteer {
  public:
    Gazetteer() = default;
    explicit Gazetteer(std::vector<std::string> phrases);

    /// One phrase per line, '#' starts a comment line.
    static Gazetteer parse(std::string_view text);
    static Gazetteer load(const std::filesystem::path& path);
    /// The list shipped in data/gazetteer.txt.
    static const Gazetteer& builtin();

    /// Lowercased, whitespace-normalized, longest first.
    [[nodiscard]] const std::vector<std::string>& phrases() const noexcept { return phrases_; }
    [[nodiscard]] bool empty() const noexcept { return phrases_.empty(); }

  private:
    std::vector<std::string> phrases_;
};

class StopwordList {
  public:
    StopwordList() = default;
    explicit StopwordList(std::vector<std::string> words);

    static StopwordList parse(std::string_view text);
    static StopwordList load(const std::filesystem::path& path);
    /// The list shipped in data/stopwords.txt.
    static const StopwordList& builtin();

    [[nodiscard]] bool contains(std::string_view word) const;
    [[nodiscard]] std::size_t size() const noexcept { return words_.size(); }

  private:
    std::unordered_set<std::string> words_;
};

/// Removes gazetteer phrases and URL/email/domain/CVE id/version/path matches, then
/// collapses whitespace. Repeats until nothing matches, so cleanup is idempotent.
CleanupReport cleanup(std::string_view text, const Gazetteer& gazetteer);

/// Lowercase, split on anything that is not an ASCII letter or digit, drop stopwords.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 sequences are never split.
std::vector<std::string> tokenize(std::string_view text, const StopwordList& stopwords);

/// Rule-based splitter: a break follows '.', '!' or '?' (plus closing quotes or
/// brackets) when whitespace and an uppercase letter come next and the preceding word
/// is not a known abbreviation. Blank lines also break. Sentences are trimmed.
std::vector<std::string> segment_sentences(std::string_view text);

std::string normalize_whitespace(std::string_view text);

}  // namespace cvemap::preprocess

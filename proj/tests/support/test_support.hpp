#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cvemap/corpus.hpp"

namespace cvemap::testing {

inline std::filesystem::path fixture_dir() { return CVEMAP_FIXTURE_DIR; }

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("cvemap-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::vector<std::string> split_jsonl(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            out.push_back(line);
        }
    }
    return out;
}

// Single-label counts per rank of the published dataset breakdown.
inline constexpr std::array<std::size_t, corpus::kCatalogSize> kPublishedSingleCounts = {
    261, 626, 301, 173, 100, 47, 35, 137, 92, 78, 56, 51, 39, 404, 92, 387, 147, 0, 148, 78, 86, 47, 122, 41, 57,
};
inline constexpr std::size_t kPublishedTotal = 4012;
inline constexpr std::size_t kPublishedSingle = 3605;
inline constexpr std::size_t kPublishedCausal = 407;

/// A synthetic dataset with the published label breakdown: singles per rank in the published
/// counts plus 407 causal chains. Ids are interleaved across labels so no class is contiguous.
inline std::vector<corpus::DatasetRow> synthetic_published_shape() {
    std::vector<corpus::DatasetRow> rows;
    std::array<std::size_t, corpus::kCatalogSize> left = kPublishedSingleCounts;
    std::size_t number = 10000;
    bool any = true;
    while (any) {
        any = false;
        for (int r = 1; r <= corpus::kCatalogSize; ++r) {
            if (left[r - 1] > 0) {
                --left[r - 1];
                any = true;
                rows.push_back({"CVE-2021-" + std::to_string(number++), corpus::LabelAssignment({r})});
            }
        }
    }
    for (std::size_t i = 0; i < kPublishedCausal; ++i) {
        const int a = static_cast<int>(i % 25) + 1;
        const int b = static_cast<int>((i * 7 + 3) % 25) + 1;
        std::vector<int> chain{a, b == a ? (a % 25) + 1 : b};
        if (i % 10 == 0) {
            chain.push_back(chain.front());
        }
        rows.push_back({"CVE-2020-" + std::to_string(20000 + i), corpus::LabelAssignment(chain)});
    }
    return rows;
}

/// Minimal accepted records for every row, text derived from the row id.
inline std::map<std::string, corpus::CveRecord> synthetic_records(const std::vector<corpus::DatasetRow>& rows) {
    std::map<std::string, corpus::CveRecord> out;
    for (const auto& row : rows) {
        corpus::CveRecord r;
        r.cve_id = row.cve_id;
        r.description = "Synthetic record " + row.cve_id + " describing a memory safety issue in a parser.";
        r.state = corpus::RecordState::accepted;
        out.emplace(r.cve_id, r);
    }
    return out;
}

}  // namespace cvemap::testing

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvemap::ingest {

/// A fetched NVD detail page. Never modified after it is stored.
struct NvdPageSnapshot {
    std::string cve_id;
    std::string fetched_at;  // ISO-8601 UTC
    std::string body;
    std::vector<std::string> parsed_labels;
    /// Set when the weakness enumeration section could not be found.
    bool flagged = false;
};

/// Source of raw detail pages. Implementations throw UpstreamError on failure; the
/// retryable flag tells scrape_nvd whether to back off and try again.
class PageFetcher {
  public:
    virtual ~PageFetcher() = default;
    virtual std::string fetch(const std::string& cve_id) = 0;
};

/// Serves `{dir}/{cve_id}.html`; a missing file is a non-retryable failure.
class FixtureFetcher : public PageFetcher {
  public:
    explicit FixtureFetcher(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::string fetch(const std::string& cve_id) override;

  private:
    std::filesystem::path dir_;
};

/// Blocks callers so that at most `per_second` acquisitions happen per second.
class RateLimiter {
  public:
    explicit RateLimiter(double per_second);
    void acquire();

  private:
    std::mutex mutex_;
    std::chrono::steady_clock::duration interval_;
    std::chrono::steady_clock::time_point next_;
};

/// Live fetcher for `{base_url}/vuln/detail/{cve_id}`.
class HttpFetcher : public PageFetcher {
  public:
    explicit HttpFetcher(std::string base_url = "https://nvd.nist.gov", double requests_per_second = 1.0,
                         std::chrono::seconds timeout = std::chrono::seconds(30));
    std::string fetch(const std::string& cve_id) override;

  private:
    std::string base_url_;
    RateLimiter limiter_;
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
    /// Replaceable so tests do not sleep.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Every distinct CWE-N id inside the page's weakness enumeration table, in page order.
/// `found_section` is false when the table is missing.
std::vector<std::string> parse_nvd_labels(std::string_view html, bool& found_section);

std::string utc_now_iso8601();

/// Fetches one page with retry and parses its labels. A page without a weakness section
/// yields an empty, flagged snapshot rather than an error.
NvdPageSnapshot scrape_nvd(const std::string& cve_id, PageFetcher& fetcher, const RetryPolicy& retry = {},
                           const std::function<std::string()>& clock = utc_now_iso8601);

/// `{cve_id}.html` + `{cve_id}.labels.json` pairs. Storing over an existing snapshot moves
/// the old pair into `history/` first, so earlier snapshots are never rewritten.
class SnapshotStore {
  public:
    explicit SnapshotStore(std::filesystem::path dir);

    void put(const NvdPageSnapshot& snapshot);
    [[nodiscard]] std::optional<NvdPageSnapshot> get(const std::string& cve_id) const;
    [[nodiscard]] bool contains(const std::string& cve_id) const;
    /// Rebuilds the snapshot from the stored page, re-running the parser.
    [[nodiscard]] std::optional<NvdPageSnapshot> replay(const std::string& cve_id) const;
    [[nodiscard]] std::vector<std::string> ids() const;
    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

  private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

struct ScrapeOutcome {
    std::string cve_id;
    bool ok = false;
    bool from_store = false;
    std::string error;
};

/// Scrapes every id not already in the store, `jobs` at a time. Failures are reported per id.
std::vector<ScrapeOutcome> scrape_all(std::span<const std::string> cve_ids, PageFetcher& fetcher,
                                      SnapshotStore& store, const RetryPolicy& retry = {}, unsigned jobs = 1,
                                      bool refetch = false);

}  // namespace cvemap::ingest

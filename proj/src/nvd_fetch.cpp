#include "cvemap/nvd_fetch.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cvemap/corpus.hpp"
#include "cvemap/error.hpp"
#include "file_io.hpp"

namespace cvemap::ingest {

using nlohmann::json;

std::string FixtureFetcher::fetch(const std::string& cve_id) {
    auto path = dir_ / (cve_id + ".html");
    if (!std::filesystem::exists(path)) {
        throw UpstreamError("no fixture page for " + cve_id, false);
    }
    return detail::read_file(path);
}

RateLimiter::RateLimiter(double per_second) {
    if (!(per_second > 0.0)) {
        throw UsageError("rate limit must be positive");
    }
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / per_second));
    next_ = std::chrono::steady_clock::now();
}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

HttpFetcher::HttpFetcher(std::string base_url, double requests_per_second, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), limiter_(requests_per_second), timeout_(timeout) {}

std::string HttpFetcher::fetch(const std::string& cve_id) {
    limiter_.acquire();
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_follow_location(true);
    auto response = client.Get("/vuln/detail/" + cve_id);
    if (!response) {
        throw UpstreamError("fetch " + cve_id + " failed: " + httplib::to_string(response.error()), true);
    }
    if (response->status == 404) {
        throw UpstreamError("fetch " + cve_id + ": HTTP 404", false);
    }
    if (response->status != 200) {
        throw UpstreamError("fetch " + cve_id + ": HTTP " + std::to_string(response->status), true);
    }
    return response->body;
}

std::vector<std::string> parse_nvd_labels(std::string_view html, bool& found_section) {
    found_section = false;
    std::vector<std::string> labels;
    auto start = html.find("vuln-CWEs-table");
    if (start == std::string_view::npos) {
        // Older page layout: the table follows a "Weakness Enumeration" heading.
        start = html.find("Weakness Enumeration");
    }
    if (start == std::string_view::npos) {
        return labels;
    }
    auto end = html.find("</table>", start);
    if (end == std::string_view::npos) {
        return labels;
    }
    found_section = true;
    const std::string section(html.substr(start, end - start));
    static const std::regex kCweId(R"(\bCWE-[0-9]+\b)");
    for (auto it = std::sregex_iterator(section.begin(), section.end(), kCweId); it != std::sregex_iterator(); ++it) {
        // "NVD-CWE-Other" and similar placeholders are not weakness ids.
        const auto pos = static_cast<std::size_t>(it->position());
        if (pos >= 4 && section.compare(pos - 4, 4, "NVD-") == 0) {
            continue;
        }
        auto id = it->str();
        if (std::find(labels.begin(), labels.end(), id) == labels.end()) {
            labels.push_back(std::move(id));
        }
    }
    return labels;
}

std::string utc_now_iso8601() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

NvdPageSnapshot scrape_nvd(const std::string& cve_id, PageFetcher& fetcher, const RetryPolicy& retry,
                           const std::function<std::string()>& clock) {
    if (!corpus::CveId::parse(cve_id)) {
        throw DataError("malformed CVE id '" + cve_id + "'");
    }
    auto backoff = retry.initial_backoff;
    const int attempts = std::max(1, retry.max_attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            NvdPageSnapshot snapshot;
            snapshot.cve_id = cve_id;
            snapshot.body = fetcher.fetch(cve_id);
            snapshot.fetched_at = clock();
            bool found = false;
            snapshot.parsed_labels = parse_nvd_labels(snapshot.body, found);
            snapshot.flagged = !found;
            return snapshot;
        } catch (const UpstreamError& e) {
            if (!e.retryable() || attempt >= attempts) {
                throw UpstreamError(e.what() + std::string(" (after ") + std::to_string(attempt) + " attempt" +
                                        (attempt == 1 ? "" : "s") + ")",
                                    false);
            }
        }
        if (retry.sleep) {
            retry.sleep(backoff);
        } else {
            std::this_thread::sleep_for(backoff);
        }
        backoff = std::min(retry.max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(
                                                  static_cast<double>(backoff.count()) * retry.multiplier)));
    }
}

SnapshotStore::SnapshotStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

namespace {

std::string labels_json(const NvdPageSnapshot& snapshot) {
    json obj = {{"cve_id", snapshot.cve_id},
                {"fetched_at", snapshot.fetched_at},
                {"labels", snapshot.parsed_labels},
                {"flagged", snapshot.flagged}};
    return obj.dump(2) + "\n";
}

std::string sanitize_timestamp(std::string stamp) {
    std::replace(stamp.begin(), stamp.end(), ':', '-');
    return stamp;
}

}  // namespace

void SnapshotStore::put(const NvdPageSnapshot& snapshot) {
    std::lock_guard lock(mutex_);
    const auto html = dir_ / (snapshot.cve_id + ".html");
    const auto labels = dir_ / (snapshot.cve_id + ".labels.json");
    if (std::filesystem::exists(html) || std::filesystem::exists(labels)) {
        auto history = dir_ / "history";
        std::filesystem::create_directories(history);
        std::string stamp = "unknown";
        if (std::filesystem::exists(labels)) {
            try {
                stamp = sanitize_timestamp(json::parse(detail::read_file(labels)).value("fetched_at", stamp));
            } catch (const json::exception&) {
            }
        }
        for (int n = 0;; ++n) {
            auto base = snapshot.cve_id + "." + stamp + (n == 0 ? "" : "." + std::to_string(n));
            if (!std::filesystem::exists(history / (base + ".html")) &&
                !std::filesystem::exists(history / (base + ".labels.json"))) {
                if (std::filesystem::exists(html)) {
                    std::filesystem::rename(html, history / (base + ".html"));
                }
                if (std::filesystem::exists(labels)) {
                    std::filesystem::rename(labels, history / (base + ".labels.json"));
                }
                break;
            }
        }
    }
    detail::write_file(html, snapshot.body);
    detail::write_file(labels, labels_json(snapshot));
}

std::optional<NvdPageSnapshot> SnapshotStore::get(const std::string& cve_id) const {
    std::lock_guard lock(mutex_);
    const auto html = dir_ / (cve_id + ".html");
    const auto labels = dir_ / (cve_id + ".labels.json");
    if (!std::filesystem::exists(html) || !std::filesystem::exists(labels)) {
        return std::nullopt;
    }
    NvdPageSnapshot snapshot;
    snapshot.cve_id = cve_id;
    snapshot.body = detail::read_file(html);
    try {
        auto obj = json::parse(detail::read_file(labels));
        snapshot.fetched_at = obj.at("fetched_at").get<std::string>();
        snapshot.parsed_labels = obj.at("labels").get<std::vector<std::string>>();
        snapshot.flagged = obj.value("flagged", false);
    } catch (const json::exception& e) {
        throw DataError("corrupt snapshot " + labels.string() + ": " + e.what());
    }
    return snapshot;
}

bool SnapshotStore::contains(const std::string& cve_id) const {
    std::lock_guard lock(mutex_);
    return std::filesystem::exists(dir_ / (cve_id + ".labels.json"));
}

std::optional<NvdPageSnapshot> SnapshotStore::replay(const std::string& cve_id) const {
    auto stored = get(cve_id);
    if (!stored) {
        return std::nullopt;
    }
    bool found = false;
    stored->parsed_labels = parse_nvd_labels(stored->body, found);
    stored->flagged = !found;
    return stored;
}

std::vector<std::string> SnapshotStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    constexpr std::string_view kSuffix = ".labels.json";
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > kSuffix.size() &&
            name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
            out.push_back(name.substr(0, name.size() - kSuffix.size()));
        }
    }
    std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
        return corpus::cve_id_less(a, b);
    });
    return out;
}

std::vector<ScrapeOutcome> scrape_all(std::span<const std::string> cve_ids, PageFetcher& fetcher,
                                      SnapshotStore& store, const RetryPolicy& retry, unsigned jobs, bool refetch) {
    std::vector<ScrapeOutcome> outcomes(cve_ids.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cve_ids.size(); i = next++) {
            auto& outcome = outcomes[i];
            outcome.cve_id = cve_ids[i];
            try {
                if (!refetch && store.contains(cve_ids[i])) {
                    outcome.ok = true;
                    outcome.from_store = true;
                    continue;
                }
                store.put(scrape_nvd(cve_ids[i], fetcher, retry));
                outcome.ok = true;
            } catch (const Error& e) {
                outcome.error = e.what();
            }
        }
    };
    jobs = std::max(1u, jobs);
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < jobs; ++t) {
        threads.emplace_back(worker);
    }
    worker();
    for (auto& t : threads) {
        t.join();
    }
    return outcomes;
}

}  // namespace cvemap::ingest

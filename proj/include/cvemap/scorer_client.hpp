#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "cvemap/corpus.hpp"
#include "cvemap/rank.hpp"

namespace cvemap::rank {

struct ScoreDocument {
    std::string id;
    std::string text;
};

struct ScoreRequest {
    std::string query;
    std::vector<ScoreDocument> documents;

    [[nodiscard]] std::string to_json() const;
    static ScoreRequest from_json(std::string_view text);
};

struct ScoreResult {
    std::string id;
    double score = 0.0;
};

/// Parses a /score_batch response body. Non-finite and non-numeric scores are DataErrors.
std::vector<ScoreResult> parse_score_response(std::string_view body);
std::string score_response_to_json(std::span<const ScoreResult> scores);

/// Anything that answers the scorer wire protocol.
class Scorer {
  public:
    virtual ~Scorer() = default;
    virtual std::vector<ScoreResult> score_batch(const ScoreRequest& request) = 0;
};

struct HttpScorerOptions {
    std::chrono::seconds timeout{30};
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// POSTs to {base_url}/score_batch. Non-200 responses and connection failures are retried
/// with doubling backoff, then surface as UpstreamError.
class HttpScorer : public Scorer {
  public:
    explicit HttpScorer(std::string base_url, HttpScorerOptions options = {});
    std::vector<ScoreResult> score_batch(const ScoreRequest& request) override;

  private:
    std::string base_url_;
    HttpScorerOptions options_;
};

/// Wraps another scorer and appends each {request, response} pair to a JSONL file.
class RecordingScorer : public Scorer {
  public:
    RecordingScorer(Scorer& inner, std::filesystem::path path);
    std::vector<ScoreResult> score_batch(const ScoreRequest& request) override;

  private:
    Scorer& inner_;
    std::filesystem::path path_;
    std::mutex mutex_;
};

/// Answers from a recorded JSONL file, keyed by the exact request. Unknown requests are
/// non-retryable UpstreamErrors.
class ReplayScorer : public Scorer {
  public:
    static ReplayScorer load(const std::filesystem::path& path);
    static ReplayScorer parse(std::string_view jsonl);
    std::vector<ScoreResult> score_batch(const ScoreRequest& request) override;
    [[nodiscard]] std::size_t size() const noexcept { return responses_.size(); }

  private:
    std::map<std::string, std::string> responses_;
};

/// Request for one CVE: the pipeline's query text against every collated catalog text,
/// document ids being the CWE ids in rank order.
ScoreRequest make_score_request(const corpus::CveRecord& record, const corpus::Catalog& catalog,
                                const TextPipeline& pipeline = {});

/// Validates that exactly the 25 catalog ids come back, once each, with finite scores.
RankedList assemble_ranking(const std::string& cve_id, const corpus::Catalog& catalog,
                            std::span<const ScoreResult> scores);

RankedList external_rank(const corpus::CveRecord& record, const corpus::Catalog& catalog, Scorer& scorer,
                         const TextPipeline& pipeline = {});

/// Ranks records with at most `fan_out` requests in flight. Stops issuing new requests
/// once `stop` is requested and then throws UpstreamError. Output order follows input.
std::vector<RankedList> external_rank_all(std::span<const corpus::CveRecord> records, const corpus::Catalog& catalog,
                                          Scorer& scorer, const TextPipeline& pipeline = {}, unsigned fan_out = 4,
                                          std::stop_token stop = {});

}  // namespace cvemap::rank

#include "cvemap/scorer_client.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cvemap/error.hpp"
#include "file_io.hpp"

namespace cvemap::rank {

using nlohmann::json;

namespace {

json request_json(const ScoreRequest& request) {
    json docs = json::array();
    for (const auto& d : request.documents) {
        docs.push_back({{"id", d.id}, {"text", d.text}});
    }
    return {{"query", request.query}, {"documents", docs}};
}

json response_json(std::span<const ScoreResult> scores) {
    json arr = json::array();
    for (const auto& s : scores) {
        arr.push_back({{"id", s.id}, {"score", s.score}});
    }
    return {{"scores", arr}};
}

std::vector<ScoreResult> scores_from_json(const json& obj) {
    std::vector<ScoreResult> out;
    for (const auto& s : obj.at("scores")) {
        const auto& score = s.at("score");
        if (!score.is_number()) {
            throw DataError("scorer returned a non-numeric score for " + s.at("id").dump());
        }
        ScoreResult r{s.at("id").get<std::string>(), score.get<double>()};
        if (!std::isfinite(r.score)) {
            throw DataError("scorer returned a non-finite score for " + r.id);
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::string ScoreRequest::to_json() const {
    return request_json(*this).dump();
}

ScoreRequest ScoreRequest::from_json(std::string_view text) {
    try {
        auto obj = json::parse(text);
        ScoreRequest request;
        request.query = obj.at("query").get<std::string>();
        for (const auto& d : obj.at("documents")) {
            request.documents.push_back({d.at("id").get<std::string>(), d.at("text").get<std::string>()});
        }
        return request;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed score request: ") + e.what());
    }
}

std::vector<ScoreResult> parse_score_response(std::string_view body) {
    try {
        return scores_from_json(json::parse(body));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed scorer response: ") + e.what());
    }
}

std::string score_response_to_json(std::span<const ScoreResult> scores) {
    return response_json(scores).dump();
}

HttpScorer::HttpScorer(std::string base_url, HttpScorerOptions options)
    : base_url_(std::move(base_url)), options_(std::move(options)) {}

std::vector<ScoreResult> HttpScorer::score_batch(const ScoreRequest& request) {
    const auto body = request.to_json();
    auto backoff = options_.initial_backoff;
    std::string last_error;
    const int attempts = std::max(1, options_.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(base_url_);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        auto response = client.Post("/score_batch", body, "application/json");
        if (!response) {
            last_error = "scorer unreachable: " + httplib::to_string(response.error());
        } else if (response->status != 200) {
            last_error = "scorer returned HTTP " + std::to_string(response->status);
        } else {
            return parse_score_response(response->body);
        }
        if (attempt < attempts) {
            if (options_.sleep) {
                options_.sleep(backoff);
            } else {
                std::this_thread::sleep_for(backoff);
            }
            backoff *= 2;
        }
    }
    throw UpstreamError(last_error + " after " + std::to_string(attempts) + " attempts", false);
}

RecordingScorer::RecordingScorer(Scorer& inner, std::filesystem::path path)
    : inner_(inner), path_(std::move(path)) {}

std::vector<ScoreResult> RecordingScorer::score_batch(const ScoreRequest& request) {
    auto scores = inner_.score_batch(request);
    json line = {{"request", request_json(request)}, {"response", response_json(scores)}};
    std::lock_guard lock(mutex_);
    detail::append_line(path_, line.dump());
    return scores;
}

ReplayScorer ReplayScorer::load(const std::filesystem::path& path) {
    return parse(detail::read_file(path));
}

ReplayScorer ReplayScorer::parse(std::string_view jsonl) {
    ReplayScorer replay;
    auto lines = detail::split_lines(jsonl);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto obj = json::parse(lines[i]);
            auto key = ScoreRequest::from_json(obj.at("request").dump()).to_json();
            replay.responses_[key] = obj.at("response").dump();
        } catch (const json::exception& e) {
            throw DataError("recording line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return replay;
}

std::vector<ScoreResult> ReplayScorer::score_batch(const ScoreRequest& request) {
    auto it = responses_.find(request.to_json());
    if (it == responses_.end()) {
        throw UpstreamError("no recorded response for this request", false);
    }
    return parse_score_response(it->second);
}

ScoreRequest make_score_request(const corpus::CveRecord& record, const corpus::Catalog& catalog,
                                const TextPipeline& pipeline) {
    ScoreRequest request;
    request.query = pipeline.query_text(record);
    for (int rank = 1; rank <= corpus::kCatalogSize; ++rank) {
        const auto& collated = catalog.collated(rank);
        request.documents.push_back({collated.cwe_id, collated.text});
    }
    return request;
}

RankedList assemble_ranking(const std::string& cve_id, const corpus::Catalog& catalog,
                            std::span<const ScoreResult> scores) {
    if (scores.size() != corpus::kCatalogSize) {
        throw DataError("scorer returned " + std::to_string(scores.size()) + " scores for " + cve_id +
                        ", expected 25");
    }
    std::array<double, corpus::kCatalogSize> by_rank{};
    std::set<int> seen;
    for (const auto& s : scores) {
        auto rank = catalog.rank_of(s.id);
        if (!rank) {
            throw DataError("scorer returned unknown document id '" + s.id + "'");
        }
        if (!seen.insert(*rank).second) {
            throw DataError("scorer returned document id '" + s.id + "' twice");
        }
        by_rank[static_cast<std::size_t>(*rank - 1)] = s.score;
    }
    return RankedList::from_scores(cve_id, by_rank);
}

RankedList external_rank(const corpus::CveRecord& record, const corpus::Catalog& catalog, Scorer& scorer,
                         const TextPipeline& pipeline) {
    auto scores = scorer.score_batch(make_score_request(record, catalog, pipeline));
    return assemble_ranking(record.cve_id, catalog, scores);
}

std::vector<RankedList> external_rank_all(std::span<const corpus::CveRecord> records, const corpus::Catalog& catalog,
                                          Scorer& scorer, const TextPipeline& pipeline, unsigned fan_out,
                                          std::stop_token stop) {
    std::vector<RankedList> out(records.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            if (failed || stop.stop_requested()) {
                return;
            }
            try {
                out[i] = external_rank(records[i], catalog, scorer, pipeline);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                failed = true;
                return;
            }
        }
    };
    fan_out = std::max(1u, fan_out);
    {
        std::vector<std::jthread> threads;
        for (unsigned t = 1; t < fan_out; ++t) {
            threads.emplace_back(worker);
        }
        worker();
    }
    if (error) {
        std::rethrow_exception(error);
    }
    if (stop.stop_requested()) {
        throw UpstreamError("external ranking cancelled", false);
    }
    return out;
}

}  // namespace cvemap::rank

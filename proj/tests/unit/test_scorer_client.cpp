#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cvemap/error.hpp"
#include "cvemap/ingest.hpp"
#include "cvemap/scorer_client.hpp"
#include "test_support.hpp"

using namespace cvemap;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

const corpus::Catalog& cat() { return corpus::Catalog::builtin(); }

std::vector<corpus::CveRecord> fixture_records() {
    return ingest::load_records(testing::fixture_dir() / "scorer" / "records.jsonl");
}

/// In-process stand-in for a scoring sidecar speaking the /score_batch protocol.
class MockScorer {
  public:
    enum class Mode { recorded, monotone, equal, short_list, non_numeric, flaky, slow };

    MockScorer() {
        for (const auto& line : testing::split_jsonl(testing::slurp(testing::fixture_dir() / "scorer" / "recorded.jsonl"))) {
            auto obj = json::parse(line);
            recorded_[rank::ScoreRequest::from_json(obj.at("request").dump()).to_json()] = obj.at("response").dump();
        }
        server_.Post("/score_batch", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockScorer() {
        server_.stop();
        thread_.join();
    }

    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    Mode mode = Mode::recorded;
    int failures_left = 0;
    std::atomic<int> requests{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};

  private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        ++requests;
        const int now = ++in_flight;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
        struct Leave {
            std::atomic<int>& n;
            ~Leave() { --n; }
        } leave{in_flight};

        if (req.get_header_value("Content-Type") != "application/json") {
            res.status = 415;
            return;
        }
        rank::ScoreRequest request;
        try {
            request = rank::ScoreRequest::from_json(req.body);
        } catch (const Error&) {
            res.status = 400;
            return;
        }
        if (request.documents.size() != 25) {
            res.status = 400;
            return;
        }
        json scores = json::array();
        switch (mode) {
            case Mode::recorded: {
                auto it = recorded_.find(request.to_json());
                if (it == recorded_.end()) {
                    res.status = 404;
                    return;
                }
                res.set_content(it->second, "application/json");
                return;
            }
            case Mode::flaky: {
                std::lock_guard lock(mutex_);
                if (failures_left > 0) {
                    --failures_left;
                    res.status = 503;
                    return;
                }
                [[fallthrough]];
            }
            case Mode::monotone:
                for (std::size_t i = 0; i < 25; ++i) {
                    scores.push_back({{"id", request.documents[i].id}, {"score", 26.0 - static_cast<double>(i + 1)}});
                }
                break;
            case Mode::slow:
                std::this_thread::sleep_for(30ms);
                [[fallthrough]];
            case Mode::equal:
                for (const auto& d : request.documents) {
                    scores.push_back({{"id", d.id}, {"score", 0.5}});
                }
                break;
            case Mode::short_list:
                for (std::size_t i = 0; i < 24; ++i) {
                    scores.push_back({{"id", request.documents[i].id}, {"score", 1.0}});
                }
                break;
            case Mode::non_numeric:
                for (const auto& d : request.documents) {
                    scores.push_back({{"id", d.id}, {"score", "NaN"}});
                }
                break;
        }
        res.set_content(json{{"scores", scores}}.dump(), "application/json");
    }

    std::map<std::string, std::string> recorded_;
    std::mutex mutex_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

rank::HttpScorerOptions fast_options() {
    rank::HttpScorerOptions o;
    o.timeout = std::chrono::seconds(5);
    o.sleep = [](std::chrono::milliseconds) {};
    return o;
}

}  // namespace

TEST_CASE("request wire format") {
    auto records = fixture_records();
    auto req = rank::make_score_request(records[0], cat());
    REQUIRE(req.documents.size() == 25);
    for (int r = 1; r <= 25; ++r) {
        CHECK(req.documents[r - 1].id == cat().by_rank(r).cwe_id);
        CHECK(req.documents[r - 1].text == cat().collated(r).text);
    }
    auto obj = json::parse(req.to_json());
    CHECK(obj.at("query").is_string());
    CHECK(obj.at("documents").size() == 25);
    CHECK(obj.at("documents")[0].at("id") == "CWE-787");
    CHECK(obj.at("documents")[0].contains("text"));
    CHECK(rank::ScoreRequest::from_json(req.to_json()).to_json() == req.to_json());
}

TEST_CASE("recorded requests still match what the client sends") {
    auto replay = rank::ReplayScorer::load(testing::fixture_dir() / "scorer" / "recorded.jsonl");
    CHECK(replay.size() == 3);
    const std::map<std::string, int> expected_top{{"CVE-2020-13821", 11}, {"CVE-2020-15158", 13}, {"CVE-2021-44042", 17}};
    for (const auto& r : fixture_records()) {
        auto list = rank::external_rank(r, cat(), replay);
        CHECK(list.top() == expected_top.at(r.cve_id));
        list.validate();
    }
}

TEST_CASE("http client against the mock replays the recording") {
    MockScorer mock;
    rank::HttpScorer http(mock.url(), fast_options());
    auto replay = rank::ReplayScorer::load(testing::fixture_dir() / "scorer" / "recorded.jsonl");
    for (const auto& r : fixture_records()) {
        auto live = rank::external_rank(r, cat(), http);
        auto again = rank::external_rank(r, cat(), http);
        auto recorded = rank::external_rank(r, cat(), replay);
        CHECK(live == recorded);
        CHECK(again == live);
        for (std::size_t i = 1; i < live.entries.size(); ++i) {
            CHECK(live.entries[i - 1].score >= live.entries[i].score);
        }
    }
}

TEST_CASE("monotone mock yields rank order") {
    MockScorer mock;
    mock.mode = MockScorer::Mode::monotone;
    rank::HttpScorer http(mock.url(), fast_options());
    auto list = rank::external_rank(fixture_records()[0], cat(), http);
    for (int i = 0; i < 25; ++i) {
        CHECK(list.entries[i].rank == i + 1);
        CHECK(list.entries[i].score == 25.0 - i);
    }
}

TEST_CASE("equal scores tie-break by rank") {
    MockScorer mock;
    mock.mode = MockScorer::Mode::equal;
    rank::HttpScorer http(mock.url(), fast_options());
    auto list = rank::external_rank(fixture_records()[1], cat(), http);
    for (int i = 0; i < 25; ++i) {
        CHECK(list.entries[i].rank == i + 1);
    }
}

TEST_CASE("malformed responses are data errors") {
    MockScorer mock;
    rank::HttpScorer http(mock.url(), fast_options());
    mock.mode = MockScorer::Mode::short_list;
    CHECK_THROWS_AS(rank::external_rank(fixture_records()[0], cat(), http), DataError);
    mock.mode = MockScorer::Mode::non_numeric;
    CHECK_THROWS_AS(rank::external_rank(fixture_records()[0], cat(), http), DataError);

    CHECK_THROWS_AS(rank::parse_score_response("{\"scores\":[{\"id\":\"CWE-79\",\"score\":1e999}]}"), DataError);
    CHECK_THROWS_AS(rank::parse_score_response("not json"), DataError);

    std::vector<rank::ScoreResult> dup;
    for (int r = 1; r <= 25; ++r) {
        dup.push_back({cat().by_rank(r == 25 ? 1 : r).cwe_id, 1.0});
    }
    CHECK_THROWS_AS(rank::assemble_ranking("CVE-2021-0001", cat(), dup), DataError);
    dup.back() = {"CWE-122", 1.0};
    CHECK_THROWS_AS(rank::assemble_ranking("CVE-2021-0001", cat(), dup), DataError);
}

TEST_CASE("non-200 answers are retried") {
    MockScorer mock;
    mock.mode = MockScorer::Mode::flaky;
    mock.failures_left = 2;
    std::vector<std::chrono::milliseconds> waits;
    auto options = fast_options();
    options.sleep = [&](std::chrono::milliseconds d) { waits.push_back(d); };
    rank::HttpScorer http(mock.url(), options);
    auto list = rank::external_rank(fixture_records()[0], cat(), http);
    CHECK(list.top() == 1);
    CHECK(mock.requests == 3);
    REQUIRE(waits.size() == 2);
    CHECK(waits[1] == 2 * waits[0]);

    mock.failures_left = 10;
    CHECK_THROWS_AS(rank::external_rank(fixture_records()[0], cat(), http), UpstreamError);
}

TEST_CASE("unreachable scorer is an upstream error") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    auto options = fast_options();
    options.timeout = std::chrono::seconds(1);
    rank::HttpScorer http("http://127.0.0.1:" + std::to_string(port), options);
    CHECK_THROWS_AS(rank::external_rank(fixture_records()[0], cat(), http), UpstreamError);
}

TEST_CASE("unknown request in a replay file") {
    auto replay = rank::ReplayScorer::load(testing::fixture_dir() / "scorer" / "recorded.jsonl");
    corpus::CveRecord r;
    r.cve_id = "CVE-2021-0009";
    r.description = "Never recorded.";
    try {
        (void)rank::external_rank(r, cat(), replay);
        FAIL("expected an error");
    } catch (const UpstreamError& e) {
        CHECK_FALSE(e.retryable());
    }
}

TEST_CASE("recording scorer output replays identically") {
    testing::TempDir dir;
    MockScorer mock;
    rank::HttpScorer http(mock.url(), fast_options());
    rank::RecordingScorer recorder(http, dir / "rec.jsonl");
    auto records = fixture_records();
    std::vector<rank::RankedList> live;
    for (const auto& r : records) {
        live.push_back(rank::external_rank(r, cat(), recorder));
    }
    auto replay = rank::ReplayScorer::load(dir / "rec.jsonl");
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(rank::external_rank(records[i], cat(), replay) == live[i]);
    }
}

TEST_CASE("fan-out keeps input order and bounds concurrency") {
    MockScorer mock;
    mock.mode = MockScorer::Mode::slow;
    rank::HttpScorer http(mock.url(), fast_options());
    std::vector<corpus::CveRecord> many;
    for (int i = 0; i < 12; ++i) {
        auto r = fixture_records()[static_cast<std::size_t>(i % 3)];
        r.cve_id = "CVE-2021-" + std::to_string(1000 + i);
        many.push_back(r);
    }
    auto lists = rank::external_rank_all(many, cat(), http, {}, 3);
    REQUIRE(lists.size() == many.size());
    for (std::size_t i = 0; i < many.size(); ++i) {
        CHECK(lists[i].cve_id == many[i].cve_id);
    }
    CHECK(mock.max_in_flight <= 3);
    CHECK(mock.max_in_flight >= 2);
}

TEST_CASE("cancellation stops issuing requests") {
    MockScorer mock;
    mock.mode = MockScorer::Mode::slow;
    rank::HttpScorer http(mock.url(), fast_options());
    std::vector<corpus::CveRecord> many;
    for (int i = 0; i < 200; ++i) {
        auto r = fixture_records()[0];
        r.cve_id = "CVE-2021-" + std::to_string(2000 + i);
        many.push_back(r);
    }
    std::stop_source stop;
    std::thread canceller([&] {
        std::this_thread::sleep_for(100ms);
        stop.request_stop();
    });
    CHECK_THROWS_AS(rank::external_rank_all(many, cat(), http, {}, 2, stop.get_token()), UpstreamError);
    canceller.join();
    CHECK(mock.requests < 200);
}

TEST_CASE("errors from workers propagate") {
    MockScorer mock;
    mock.mode = MockScorer::Mode::short_list;
    rank::HttpScorer http(mock.url(), fast_options());
    auto records = fixture_records();
    CHECK_THROWS_AS(rank::external_rank_all(records, cat(), http, {}, 2), DataError);
}

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cvemap/error.hpp"
#include "cvemap/eval.hpp"

using namespace cvemap;

namespace {

rank::RankedList ranking_with_order(const std::vector<int>& order) {
    std::vector<double> scores(25);
    for (std::size_t i = 0; i < order.size(); ++i) {
        scores[order[i] - 1] = static_cast<double>(25 - i);
    }
    return rank::RankedList::from_scores("CVE-2021-0001", scores);
}

rank::RankedList truth_at(int truth, int position) {
    std::vector<int> order;
    for (int r = 1; r <= 25; ++r) {
        if (r != truth) {
            order.push_back(r);
        }
    }
    order.insert(order.begin() + (position - 1), truth);
    return ranking_with_order(order);
}

struct OracleMetrics {
    double rr = 0, ap = 0, ndcg = 0;
};

// Walks every position of the list with the textbook definitions for a single relevant item.
OracleMetrics oracle(const std::vector<int>& order, int truth, int k) {
    OracleMetrics m;
    int hits = 0;
    double precision_sum = 0, dcg = 0;
    for (int i = 1; i <= static_cast<int>(order.size()); ++i) {
        const bool rel = order[i - 1] == truth;
        if (rel && m.rr == 0) {
            m.rr = 1.0 / i;
        }
        if (i <= k) {
            if (rel) {
                ++hits;
                precision_sum += static_cast<double>(hits) / i;
                dcg += 1.0 / std::log2(i + 1.0);
            }
        }
    }
    m.ap = precision_sum / 1.0;
    m.ndcg = dcg / (1.0 / std::log2(2.0));
    return m;
}

rank::RankedList random_ranking(std::mt19937_64& gen, std::vector<int>& order) {
    order.resize(25);
    std::iota(order.begin(), order.end(), 1);
    std::shuffle(order.begin(), order.end(), gen);
    return ranking_with_order(order);
}

}  // namespace

TEST_CASE("reciprocal rank examples") {
    CHECK(eval::reciprocal_rank(truth_at(3, 1), 3) == 1.0);
    CHECK(eval::reciprocal_rank(truth_at(3, 3), 3) == doctest::Approx(1.0 / 3));
    CHECK(eval::reciprocal_rank(truth_at(3, 25), 3) == doctest::Approx(0.04));
}

TEST_CASE("truncated average precision examples") {
    CHECK(eval::average_precision_at_k(truth_at(7, 1), 7, 1) == 1.0);
    CHECK(eval::average_precision_at_k(truth_at(7, 4), 7, 3) == 0.0);
    CHECK(eval::average_precision_at_k(truth_at(7, 3), 7, 5) == doctest::Approx(1.0 / 3));
    CHECK_THROWS_AS(eval::average_precision_at_k(truth_at(7, 3), 7, 0), UsageError);
}

TEST_CASE("ndcg examples") {
    for (int k : {1, 2, 3, 5, 25}) {
        CHECK(eval::ndcg_at_k(truth_at(2, 1), 2, k) == 1.0);
    }
    CHECK(eval::ndcg_at_k(truth_at(2, 3), 2, 5) == doctest::Approx(0.5));
    CHECK(eval::ndcg_at_k(truth_at(2, 2), 2, 1) == 0.0);
}

TEST_CASE("metrics equal the position-walking oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> truth_d(1, 25), k_d(1, 25);
    std::vector<int> order;
    for (int i = 0; i < 2000; ++i) {
        auto list = random_ranking(gen, order);
        const int truth = truth_d(gen), k = k_d(gen);
        auto want = oracle(order, truth, k);
        CHECK(std::abs(eval::reciprocal_rank(list, truth) - want.rr) <= 1e-12);
        CHECK(std::abs(eval::average_precision_at_k(list, truth, k) - want.ap) <= 1e-12);
        CHECK(std::abs(eval::ndcg_at_k(list, truth, k) - want.ndcg) <= 1e-12);
    }
}

TEST_CASE("metric identities hold on random corpora") {
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<int> truth_d(1, 25), n_d(1, 40);
    std::vector<int> order;
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::string, rank::RankedList> rankings;
        std::vector<corpus::DatasetRow> gold;
        const int n = n_d(gen);
        for (int q = 0; q < n; ++q) {
            auto list = random_ranking(gen, order);
            list.cve_id = "CVE-2021-" + std::to_string(1000 + q);
            rankings[list.cve_id] = list;
            gold.push_back({list.cve_id, corpus::LabelAssignment({truth_d(gen)})});
        }
        eval::EvaluateOptions opts;
        opts.ks = {1, 2, 3, 4, 5, 10};
        auto report = eval::evaluate("random", rankings, gold, opts);
        CHECK(report.n_queries == static_cast<std::size_t>(n));
        CHECK(eval::check_invariants(report).empty());
        CHECK(report.map_at[1] == report.ndcg_at[1]);
    }
}

TEST_CASE("two-query worked example") {
    std::map<std::string, rank::RankedList> rankings;
    rankings["CVE-2021-0001"] = truth_at(4, 1);
    rankings["CVE-2021-0001"].cve_id = "CVE-2021-0001";
    rankings["CVE-2021-0002"] = truth_at(9, 2);
    rankings["CVE-2021-0002"].cve_id = "CVE-2021-0002";
    std::vector<corpus::DatasetRow> gold{{"CVE-2021-0001", corpus::LabelAssignment({4})},
                                         {"CVE-2021-0002", corpus::LabelAssignment({9})}};
    auto report = eval::evaluate("worked", rankings, gold);
    CHECK(report.mrr == doctest::Approx(0.75));
    CHECK(report.map_at[1] == doctest::Approx(0.5));
    CHECK(report.ndcg_at[2] == doctest::Approx((1.0 + 1.0 / std::log2(3.0)) / 2));
    CHECK(report.ndcg_at[2] == doctest::Approx(0.8155).epsilon(1e-4));
    CHECK(report.n_queries == 2);
}

TEST_CASE("perfect rankings score one everywhere") {
    std::map<std::string, rank::RankedList> rankings;
    std::vector<corpus::DatasetRow> gold;
    for (int r = 1; r <= 25; ++r) {
        auto id = "CVE-2021-" + std::to_string(1000 + r);
        rankings[id] = truth_at(r, 1);
        gold.push_back({id, corpus::LabelAssignment({r})});
    }
    auto report = eval::evaluate("perfect", rankings, gold);
    CHECK(report.mrr == 1.0);
    for (auto& [k, v] : report.map_at) {
        CHECK(v == 1.0);
        CHECK(report.ndcg_at[k] == 1.0);
    }
}

TEST_CASE("causal rows are skipped unless scored by their first element") {
    std::map<std::string, rank::RankedList> rankings{{"CVE-2021-0001", truth_at(2, 1)},
                                                     {"CVE-2021-0002", truth_at(5, 4)}};
    std::vector<corpus::DatasetRow> gold{{"CVE-2021-0001", corpus::LabelAssignment({2})},
                                         {"CVE-2021-0002", corpus::LabelAssignment({5, 2})}};
    auto single = eval::evaluate("m", rankings, gold);
    CHECK(single.n_queries == 1);
    CHECK(single.mrr == 1.0);
    eval::EvaluateOptions opts;
    opts.first_of_chain = true;
    auto both = eval::evaluate("m", rankings, gold, opts);
    CHECK(both.n_queries == 2);
    CHECK(both.mrr == doctest::Approx((1.0 + 0.25) / 2));
}

TEST_CASE("missing rankings are data errors") {
    std::map<std::string, rank::RankedList> rankings;
    std::vector<corpus::DatasetRow> gold{{"CVE-2021-0001", corpus::LabelAssignment({2})}};
    CHECK_THROWS_AS(eval::evaluate("m", rankings, gold), DataError);
}

TEST_CASE("parallel evaluation is identical to serial") {
    std::mt19937_64 gen(5);
    std::vector<int> order;
    std::map<std::string, rank::RankedList> rankings;
    std::vector<corpus::DatasetRow> gold;
    for (int q = 0; q < 500; ++q) {
        auto list = random_ranking(gen, order);
        list.cve_id = "CVE-2021-" + std::to_string(1000 + q);
        rankings[list.cve_id] = list;
        gold.push_back({list.cve_id, corpus::LabelAssignment({order[static_cast<std::size_t>(q % 7)]})});
    }
    eval::EvaluateOptions serial, parallel;
    parallel.jobs = 4;
    auto a = eval::evaluate("m", rankings, gold, serial);
    auto b = eval::evaluate("m", rankings, gold, parallel);
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("report json round trip and table") {
    eval::EvalReport r{"bm25", 0.1514, {{1, 0.0166}, {2, 0.0333}}, {{1, 0.0166}, {2, 0.0376}}, 721};
    auto back = eval::EvalReport::from_json(r.to_json());
    CHECK(back.model == "bm25");
    CHECK(back.mrr == r.mrr);
    CHECK(back.map_at == r.map_at);
    CHECK(back.ndcg_at == r.ndcg_at);
    CHECK(back.n_queries == 721);
    auto table = eval::format_table(std::vector{r});
    CHECK(table.find("MAP@2") != std::string::npos);
    CHECK(table.find("0.1514") != std::string::npos);
}

TEST_CASE("published result rows satisfy the report invariants") {
    // Four-decimal figures, so the checker gets half a unit in the last place of slack.
    const double tol = 5e-5;
    auto row = [](std::string model, double mrr, std::array<double, 4> map, std::array<double, 4> ndcg) {
        eval::EvalReport r;
        r.model = std::move(model);
        r.mrr = mrr;
        const int ks[] = {1, 2, 3, 5};
        for (int i = 0; i < 4; ++i) {
            r.map_at[ks[i]] = map[i];
            r.ndcg_at[ks[i]] = ndcg[i];
        }
        r.n_queries = 721;
        return r;
    };
    const std::vector<eval::EvalReport> consistent{
        row("rankT5 fine-tuned", .8155, {.7115, .7829, .7996, .8104}, {.7115, .8016, .8266, .8464}),
        row("rankT5", .5570, {.4300, .4854, .5081, .5318}, {.4300, .4999, .5449, .5767}),
        row("RoBERTa fine-tuned", .2966, {.0693, .2212, .2433, .2593}, {.0693, .2610, .2957, .3226}),
        row("BERT fine-tuned", .3005, {.0610, .2240, .2416, .2602}, {.0610, .2667, .2930, .3267}),
        row("BM25", .1514, {.0166, .0333, .0573, .0860}, {.0166, .0376, .0737, .1259}),
    };
    for (const auto& r : consistent) {
        CAPTURE(r.model);
        CHECK(eval::check_invariants(r, tol).empty());
    }
    // The SBERT rows report MAP@1 != NDCG@1, which the checker must flag.
    auto sbert = row("SBERT fine-tuned", .9142, {.8500, .9057, .9117, .9132}, {.8446, .9217, .9307, .9334});
    CHECK_FALSE(eval::check_invariants(sbert, tol).empty());
}

TEST_CASE("checker flags each kind of violation") {
    eval::EvalReport r{"x", 0.5, {{1, 0.4}, {2, 0.45}}, {{1, 0.4}, {2, 0.5}}, 10};
    CHECK(eval::check_invariants(r).empty());
    auto worse = r;
    worse.map_at[2] = 0.6;
    CHECK_FALSE(eval::check_invariants(worse).empty());
    worse = r;
    worse.ndcg_at[2] = 0.3;
    CHECK_FALSE(eval::check_invariants(worse).empty());
    worse = r;
    worse.mrr = 0.3;
    CHECK_FALSE(eval::check_invariants(worse).empty());
}

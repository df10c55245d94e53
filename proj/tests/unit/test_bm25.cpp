#include <doctest.h>

#include <cmath>
#include <map>

#include "cvemap/error.hpp"
#include "cvemap/rank.hpp"

using namespace cvemap;

namespace {

corpus::Catalog toy_catalog() {
    std::vector<corpus::CweEntry> entries;
    for (int r = 1; r <= 25; ++r) {
        corpus::CweEntry e;
        e.rank = r;
        e.cwe_id = "CWE-" + std::to_string(9000 + r);
        e.name = "filler" + std::to_string(r) + " block" + std::to_string(r);
        entries.push_back(e);
    }
    entries[0].name = "buffer overflow write";
    entries[1].name = "sql injection query";
    return corpus::Catalog("toy", entries);
}

// Plain BM25 over tokenized documents, written out term by term.
std::vector<double> oracle_bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                                double k1 = 1.2, double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double avgdl = 0;
    for (const auto& d : docs) {
        avgdl += static_cast<double>(d.size());
    }
    avgdl /= n;
    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& term : query) {
        double df = 0;
        for (const auto& d : docs) {
            df += std::find(d.begin(), d.end(), term) != d.end() ? 1 : 0;
        }
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
            const double dl = static_cast<double>(docs[i].size());
            scores[i] += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
        }
    }
    return scores;
}

std::vector<std::vector<std::string>> catalog_tokens(const corpus::Catalog& cat) {
    std::vector<std::vector<std::string>> docs;
    for (int r = 1; r <= 25; ++r) {
        docs.push_back(preprocess::tokenize(cat.collated(r).text, preprocess::StopwordList::builtin()));
    }
    return docs;
}

}  // namespace

TEST_CASE("toy corpus puts the matching document strictly first") {
    auto cat = toy_catalog();
    rank::Bm25Ranker ranker(cat);
    std::vector<std::string> q{"sql", "injection"};
    auto list = ranker.rank_tokens("CVE-2021-0001", q);
    CHECK(list.top() == 2);
    CHECK(list.entries[0].score > list.entries[1].score);
    CHECK_FALSE(list.fallback);

    // Hand evaluation: both terms occur once in a 3-token document, df = 1, N = 25,
    // average length (3 + 3 + 23 * 2) / 25.
    const double idf = std::log(1.0 + (25 - 1 + 0.5) / 1.5);
    const double avgdl = 52.0 / 25.0;
    const double expected = 2 * idf * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 3 / avgdl));
    CHECK(list.score_of(2) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ranker.average_length() == doctest::Approx(avgdl));
}

TEST_CASE("scores match the written-out formula on the catalog") {
    const auto& cat = corpus::Catalog::builtin();
    rank::Bm25Ranker ranker(cat);
    const auto docs = catalog_tokens(cat);
    const std::vector<std::vector<std::string>> queries{
        {"sql", "injection", "login", "form"},
        {"use", "after", "free", "memory", "memory"},
        {"cross", "site", "request", "forgery", "token"},
        {"xml", "external", "entity"},
        {"integer", "overflow", "wraparound", "buffer"},
    };
    for (const auto& q : queries) {
        auto want = oracle_bm25(docs, q);
        auto got = ranker.rank_tokens("CVE-2021-0001", q);
        for (int r = 1; r <= 25; ++r) {
            CHECK(got.score_of(r) == doctest::Approx(want[r - 1]).epsilon(1e-12));
        }
        got.validate();
    }
}

TEST_CASE("non-default parameters follow the formula") {
    const auto& cat = corpus::Catalog::builtin();
    rank::Bm25Params p{2.0, 0.3};
    rank::Bm25Ranker ranker(cat, p);
    std::vector<std::string> q{"command", "injection", "shell"};
    auto want = oracle_bm25(catalog_tokens(cat), q, 2.0, 0.3);
    auto got = ranker.rank_tokens("CVE-2021-0001", q);
    for (int r = 1; r <= 25; ++r) {
        CHECK(got.score_of(r) == doctest::Approx(want[r - 1]).epsilon(1e-12));
    }
    CHECK_THROWS_AS((rank::Bm25Params{-1.0, 0.75}.validate()), UsageError);
    CHECK_THROWS_AS((rank::Bm25Params{1.2, 1.5}.validate()), UsageError);
}

TEST_CASE("duplicating the query doubles scores and keeps the order") {
    rank::Bm25Ranker ranker(corpus::Catalog::builtin());
    std::vector<std::string> q{"path", "traversal", "directory", "file"};
    auto twice = q;
    twice.insert(twice.end(), q.begin(), q.end());
    auto a = ranker.rank_tokens("CVE-2021-0001", q);
    auto b = ranker.rank_tokens("CVE-2021-0001", twice);
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(a.entries[i].rank == b.entries[i].rank);
        CHECK(b.entries[i].score == doctest::Approx(2 * a.entries[i].score).epsilon(1e-12));
    }
}

TEST_CASE("no overlap falls back to rank order") {
    rank::Bm25Ranker ranker(corpus::Catalog::builtin());
    std::vector<std::string> q{"zzqx", "wvvy"};
    auto list = ranker.rank_tokens("CVE-2021-0001", q);
    CHECK(list.fallback);
    for (int i = 0; i < 25; ++i) {
        CHECK(list.entries[i].rank == i + 1);
        CHECK(list.entries[i].score == 0.0);
    }
    CHECK(ranker.rank_tokens("CVE-2021-0001", std::vector<std::string>{}).fallback);
}

TEST_CASE("record ranking goes through the text pipeline") {
    corpus::CveRecord r;
    r.cve_id = "CVE-2021-0002";
    r.description = "SQL injection in the login form of WordPress plugin 1.2.3 allows attackers to run SQL commands.";
    auto with = rank::bm25_rank(r, corpus::Catalog::builtin());
    CHECK(with.top() == 3);

    rank::TextPipeline raw;
    raw.cleanup = false;
    auto without = rank::bm25_rank(r, corpus::Catalog::builtin(), {}, raw);
    CHECK(without.top() == 3);
    CHECK(raw.query_tokens(r).size() > rank::TextPipeline{}.query_tokens(r).size());
}

TEST_CASE("ranked list helpers") {
    std::vector<double> scores(25, 0.0);
    scores[4] = 3.0;
    scores[9] = 3.0;
    scores[0] = 1.0;
    auto list = rank::RankedList::from_scores("CVE-2021-0003", scores);
    CHECK(list.entries[0].rank == 5);
    CHECK(list.entries[1].rank == 10);
    CHECK(list.entries[2].rank == 1);
    CHECK(list.entries[3].rank == 2);
    CHECK(list.position_of(10) == 2);
    CHECK(rank::RankedList::from_json(list.to_json()) == list);

    scores[3] = std::nan("");
    CHECK_THROWS_AS(rank::RankedList::from_scores("CVE-2021-0003", scores), DataError);
    CHECK_THROWS_AS(rank::RankedList::from_scores("CVE-2021-0003", std::vector<double>(24, 0.0)), DataError);
}

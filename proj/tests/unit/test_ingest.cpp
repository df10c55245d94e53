#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "cvemap/ingest.hpp"
#include "test_support.hpp"

using namespace cvemap;

namespace {

corpus::CveRecord make(std::string id, std::string description, corpus::RecordState state) {
    corpus::CveRecord r;
    r.cve_id = std::move(id);
    r.description = std::move(description);
    r.state = state;
    return r;
}

// Dense term-document matrix over the 25 catalog texts, cosine of tf * (ln(25/(1+df)) + 1).
std::array<double, 25> oracle_tfidf(const std::vector<std::string>& query) {
    const auto& cat = corpus::Catalog::builtin();
    const auto& stop = preprocess::StopwordList::builtin();
    std::vector<std::map<std::string, double>> docs(25);
    std::set<std::string> vocab;
    for (int r = 1; r <= 25; ++r) {
        for (const auto& t : preprocess::tokenize(cat.collated(r).text, stop)) {
            docs[r - 1][t] += 1.0;
            vocab.insert(t);
        }
    }
    for (const auto& t : query) {
        vocab.insert(t);
    }
    std::vector<std::string> terms(vocab.begin(), vocab.end());
    auto idf = [&](const std::string& t) {
        int df = 0;
        for (const auto& d : docs) {
            df += d.count(t) ? 1 : 0;
        }
        return std::log(25.0 / (1.0 + df)) + 1.0;
    };
    std::vector<double> q(terms.size(), 0.0);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        q[i] = static_cast<double>(std::count(query.begin(), query.end(), terms[i])) * idf(terms[i]);
    }
    std::array<double, 25> out{};
    for (int d = 0; d < 25; ++d) {
        double dot = 0, nq = 0, nd = 0;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            auto it = docs[d].find(terms[i]);
            const double w = it == docs[d].end() ? 0.0 : it->second * idf(terms[i]);
            dot += q[i] * w;
            nq += q[i] * q[i];
            nd += w * w;
        }
        out[d] = (nq == 0 || nd == 0) ? 0.0 : dot / std::sqrt(nq * nd);
    }
    return out;
}

}  // namespace

TEST_CASE("feed directory parsing") {
    auto result = ingest::parse_feed(testing::fixture_dir() / "feed");
    std::map<std::string, corpus::CveRecord> by_id;
    for (const auto& f : result.records) {
        by_id[f.record.cve_id] = f.record;
    }
    REQUIRE(by_id.count("CVE-2020-13821"));
    CHECK(by_id["CVE-2020-13821"].description.find("Windows font library") != std::string::npos);
    CHECK(by_id["CVE-2020-13821"].state == corpus::RecordState::accepted);
    CHECK(by_id["CVE-2020-15158"].title.find("Integer underflow") == 0);
    CHECK(by_id["CVE-2021-44042"].description.find("An issue was discovered") == 0);
    CHECK(by_id["CVE-2020-13999"].state == corpus::RecordState::rejected);
    CHECK(by_id["CVE-2021-44224"].state == corpus::RecordState::rejected);
    CHECK_FALSE(by_id.count("CVE-2019-1001"));
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].source.filename() == "CVE-2021-44300.json");

    for (std::size_t i = 1; i < result.records.size(); ++i) {
        CHECK(corpus::cve_id_less(result.records[i - 1].record.cve_id, result.records[i].record.cve_id));
    }

    auto accepted = ingest::filter_accepted(ingest::records_of(result.records));
    CHECK(accepted.size() == 3);
    for (const auto& r : accepted) {
        CHECK(r.state == corpus::RecordState::accepted);
    }
}

TEST_CASE("empty feed directory") {
    testing::TempDir dir;
    auto result = ingest::parse_feed(dir.path());
    CHECK(result.records.empty());
    CHECK(result.skipped.empty());
}

TEST_CASE("accepted filter") {
    std::vector<corpus::CveRecord> mixed{
        make("CVE-2021-5", "a", corpus::RecordState::accepted), make("CVE-2021-4", "b", corpus::RecordState::rejected),
        make("CVE-2021-3", "c", corpus::RecordState::accepted), make("CVE-2021-2", "d", corpus::RecordState::rejected),
        make("CVE-2021-1", "e", corpus::RecordState::accepted)};
    auto once = ingest::filter_accepted(mixed);
    CHECK(once.size() == 3);
    CHECK(once.front().cve_id == "CVE-2021-1");
    auto twice = ingest::filter_accepted(once);
    REQUIRE(twice.size() == once.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(twice[i].cve_id == once[i].cve_id);
    }
    std::vector<corpus::CveRecord> rejected{make("CVE-2021-9", "x", corpus::RecordState::rejected)};
    CHECK(ingest::filter_accepted(rejected).empty());
}

TEST_CASE("records jsonl round trip") {
    auto r = make("CVE-2020-15158", "integer underflow", corpus::RecordState::accepted);
    r.title = "t";
    r.nvd_labels = {"CWE-191", "CWE-119"};
    auto back = ingest::parse_records_jsonl(ingest::records_to_jsonl(std::vector{r}));
    REQUIRE(back.size() == 1);
    CHECK(back[0].cve_id == r.cve_id);
    CHECK(back[0].title == "t");
    CHECK(back[0].nvd_labels == r.nvd_labels);
}

TEST_CASE("verbatim catalog text narrows to its own rank") {
    const auto& cat = corpus::Catalog::builtin();
    const auto& sqli = cat.by_rank(3);
    std::vector<corpus::CveRecord> records{
        make("CVE-2021-1", sqli.name + " " + sqli.description, corpus::RecordState::accepted),
        make("CVE-2021-2", "zzqx wwvy", corpus::RecordState::accepted)};
    auto result = ingest::narrow_candidates(records, cat, {});
    REQUIRE(result.candidates.size() == 2);
    CHECK(result.candidates[0].cve_id == "CVE-2021-1");
    CHECK(result.candidates[0].best_rank == 3);
    CHECK(result.candidates[1].score == 0.0);

    ingest::NarrowOptions strict;
    strict.min_score = 1e-9;
    auto filtered = ingest::narrow_candidates(records, cat, strict);
    REQUIRE(filtered.candidates.size() == 1);
    CHECK(filtered.candidates[0].cve_id == "CVE-2021-1");
}

TEST_CASE("narrowing order matches a dense tf-idf oracle") {
    const auto& stop = preprocess::StopwordList::builtin();
    std::vector<corpus::CveRecord> records{
        make("CVE-2021-11", "Cross-site scripting in the search field lets attackers inject script into pages.",
             corpus::RecordState::accepted),
        make("CVE-2021-12", "A use after free in the renderer allows memory corruption after the object is freed.",
             corpus::RecordState::accepted),
        make("CVE-2021-13", "Path traversal with ../ sequences lets users read files outside the directory.",
             corpus::RecordState::accepted),
        make("CVE-2021-14", "Hard-coded credentials in firmware give administrative access.",
             corpus::RecordState::accepted),
        make("CVE-2021-15", "An XML external entity reference in the parser discloses local files.",
             corpus::RecordState::accepted)};

    std::vector<std::pair<double, std::string>> oracle;
    std::map<std::string, int> oracle_best;
    for (const auto& r : records) {
        auto sims = oracle_tfidf(preprocess::tokenize(r.text(), stop));
        auto best = std::max_element(sims.begin(), sims.end()) - sims.begin();
        oracle.emplace_back(-sims[best], r.cve_id);
        oracle_best[r.cve_id] = static_cast<int>(best) + 1;

        ingest::TfIdfModel model(corpus::Catalog::builtin(), stop);
        auto got = model.similarities(preprocess::tokenize(r.text(), stop));
        for (int d = 0; d < 25; ++d) {
            CHECK(got[d] == doctest::Approx(sims[d]).epsilon(1e-12));
        }
    }
    std::sort(oracle.begin(), oracle.end());

    auto result = ingest::narrow_candidates(records, corpus::Catalog::builtin(), {});
    REQUIRE(result.candidates.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(result.candidates[i].cve_id == oracle[i].second);
        CHECK(result.candidates[i].score == doctest::Approx(-oracle[i].first).epsilon(1e-12));
        CHECK(result.candidates[i].best_rank == oracle_best[oracle[i].second]);
    }

    ingest::NarrowOptions top;
    top.top_n = 2;
    CHECK(ingest::narrow_candidates(records, corpus::Catalog::builtin(), top).candidates.size() == 2);
}

TEST_CASE("idf follows the smoothed formula") {
    ingest::TfIdfModel model(corpus::Catalog::builtin(), preprocess::StopwordList::builtin());
    CHECK(model.idf("qqqnotaterm") == doctest::Approx(std::log(25.0) + 1.0));
}

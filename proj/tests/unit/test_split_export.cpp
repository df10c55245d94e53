#include <doctest.h>

#include <cmath>
#include <set>

#include "cvemap/error.hpp"
#include "cvemap/eval.hpp"
#include "test_support.hpp"

using namespace cvemap;

namespace {

std::vector<corpus::DatasetRow> singles() { return corpus::single_label_rows(testing::synthetic_published_shape()); }

std::vector<corpus::DatasetRow> class_of(int rank, std::size_t n) {
    std::vector<corpus::DatasetRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        rows.push_back({"CVE-2022-" + std::to_string(30000 + i), corpus::LabelAssignment({rank})});
    }
    return rows;
}

}  // namespace

TEST_CASE("seeded rng draws stay in range and repeat") {
    eval::SeededRng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.below(7);
        CHECK(x < 7);
        CHECK(x == b.below(7));
    }
}

TEST_CASE("a class of ten splits eight to two") {
    auto split = eval::stratified_split(class_of(4, 10));
    CHECK(split.train.size() == 8);
    CHECK(split.test.size() == 2);
}

TEST_CASE("a class of 35 splits 28 to 7") {
    auto split = eval::stratified_split(class_of(7, 35));
    CHECK(split.train.size() == 28);
    CHECK(split.test.size() == 7);
}

TEST_CASE("singleton classes stay in train with a warning") {
    auto rows = class_of(4, 10);
    rows.push_back({"CVE-2022-40000", corpus::LabelAssignment({18})});
    auto split = eval::stratified_split(rows);
    CHECK(split.warnings.size() == 1);
    CHECK(std::any_of(split.train.begin(), split.train.end(),
                      [](const auto& r) { return r.cve_id == "CVE-2022-40000"; }));
}

TEST_CASE("causal rows are rejected by the split") {
    std::vector<corpus::DatasetRow> rows{{"CVE-2022-40000", corpus::LabelAssignment({2, 25})}};
    CHECK_THROWS_AS(eval::stratified_split(rows), DataError);
    CHECK_THROWS_AS(eval::stratified_split(class_of(1, 5), {1.0, 42}), UsageError);
}

TEST_CASE("split of the published shape is stratified and deterministic") {
    const auto rows = singles();
    auto a = eval::stratified_split(rows);
    auto b = eval::stratified_split(rows);
    CHECK(corpus::dataset_to_csv(a.train) == corpus::dataset_to_csv(b.train));
    CHECK(corpus::dataset_to_csv(a.test) == corpus::dataset_to_csv(b.test));
    CHECK(a.train.size() + a.test.size() == rows.size());

    auto test_stats = corpus::dataset_stats(a.test);
    for (int r = 1; r <= 25; ++r) {
        const double n = static_cast<double>(testing::kPublishedSingleCounts[r - 1]);
        CAPTURE(r);
        CHECK(std::abs(static_cast<double>(test_stats.per_label_counts[r - 1]) - 0.2 * n) <= 1.0);
    }
    CHECK(test_stats.per_label_counts[6] == 7);

    std::set<std::string> train_ids, test_ids;
    for (const auto& r : a.train) {
        train_ids.insert(r.cve_id);
    }
    for (const auto& r : a.test) {
        CHECK_FALSE(train_ids.count(r.cve_id));
        test_ids.insert(r.cve_id);
    }
    for (std::size_t i = 1; i < a.test.size(); ++i) {
        CHECK(corpus::cve_id_less(a.test[i - 1].cve_id, a.test[i].cve_id));
    }

    auto other = eval::stratified_split(rows, {0.8, 7});
    CHECK(corpus::dataset_to_csv(other.test) != corpus::dataset_to_csv(a.test));
}

TEST_CASE("split does not depend on input order") {
    auto rows = singles();
    auto a = eval::stratified_split(rows);
    std::reverse(rows.begin(), rows.end());
    auto b = eval::stratified_split(rows);
    CHECK(a.test == b.test);
}

TEST_CASE("export with two negatives") {
    std::vector<corpus::DatasetRow> rows{{"CVE-2022-30001", corpus::LabelAssignment({2})}};
    auto records = testing::synthetic_records(rows);
    eval::ExportOptions opts;
    opts.negatives_per_positive = 2;
    auto pairs = eval::export_training_pairs(rows, records, corpus::Catalog::builtin(), opts);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].relevance == 1);
    CHECK(pairs[0].cwe_id == "CWE-79");
    CHECK(pairs[0].document == corpus::Catalog::builtin().collated(2).text);
    CHECK(pairs[1].relevance == 0);
    CHECK(pairs[2].relevance == 0);
    CHECK(pairs[1].cwe_id != "CWE-79");
    CHECK(pairs[2].cwe_id != "CWE-79");
    CHECK(pairs[1].cwe_id != pairs[2].cwe_id);
}

TEST_CASE("export over the published shape") {
    const auto rows = singles();
    const auto records = testing::synthetic_records(rows);
    auto pairs = eval::export_training_pairs(rows, records, corpus::Catalog::builtin());
    CHECK(pairs.size() == 7210);
    std::map<std::string, std::string> positive;
    for (const auto& p : pairs) {
        if (p.relevance == 1) {
            CHECK(positive.emplace(p.cve_id, p.cwe_id).second);
        }
    }
    CHECK(positive.size() == 3605);
    for (const auto& p : pairs) {
        if (p.relevance == 0) {
            CHECK(p.cwe_id != positive.at(p.cve_id));
        }
    }
    auto again = eval::export_training_pairs(rows, records, corpus::Catalog::builtin());
    CHECK(eval::training_pairs_to_jsonl(pairs) == eval::training_pairs_to_jsonl(again));

    eval::ExportOptions other;
    other.seed = 43;
    CHECK(eval::training_pairs_to_jsonl(eval::export_training_pairs(rows, records, corpus::Catalog::builtin(), other)) !=
          eval::training_pairs_to_jsonl(pairs));
}

TEST_CASE("export needs a record for every row") {
    std::vector<corpus::DatasetRow> rows{{"CVE-2022-30001", corpus::LabelAssignment({2})}};
    std::map<std::string, corpus::CveRecord> none;
    CHECK_THROWS_AS(eval::export_training_pairs(rows, none, corpus::Catalog::builtin()), DataError);
    eval::ExportOptions bad;
    bad.negatives_per_positive = 25;
    CHECK_THROWS_AS(eval::export_training_pairs(rows, testing::synthetic_records(rows), corpus::Catalog::builtin(), bad),
                    UsageError);
}

TEST_CASE("negatives are spread over the catalog") {
    const auto rows = singles();
    auto pairs = eval::export_training_pairs(rows, testing::synthetic_records(rows), corpus::Catalog::builtin());
    std::map<std::string, std::size_t> counts;
    for (const auto& p : pairs) {
        if (p.relevance == 0) {
            ++counts[p.cwe_id];
        }
    }
    CHECK(counts.size() == 25);
}

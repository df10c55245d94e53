#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cvemap/embedding_store.hpp"
#include "cvemap/rank.hpp"

namespace cvemap::config {

/// Settings shared by the command line subcommands. A config file fills these in and
/// command line flags override them.
struct RunConfig {
    // [paths]
    std::filesystem::path feed_dir;
    std::filesystem::path snapshot_dir;
    std::filesystem::path catalog;
    std::filesystem::path dataset;
    std::filesystem::path records;
    std::filesystem::path gazetteer;
    std::filesystem::path stopwords;
    std::filesystem::path embeddings;
    std::filesystem::path journal;
    std::filesystem::path feedback_log;
    std::filesystem::path static_dir;

    // [rank]
    std::string ranker = "bm25";
    rank::Bm25Params bm25;
    rank::Aggregation aggregation = rank::Aggregation::max;
    std::string scorer_url;
    unsigned fan_out = 4;
    bool preprocess = true;

    // [eval]
    std::uint64_t seed = 42;
    std::vector<int> ks = {1, 2, 3, 5};
    double train_fraction = 0.8;
    int negatives = 1;

    // [ingest]
    int top_n = 3000;
    double min_score = 0.0;
    int first_year = 2020;
    int last_year = 2021;
    double requests_per_second = 1.0;

    // [serve]
    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> annotators = {"A", "B", "C"};

    unsigned jobs = 1;
};

/// Flattens `key = value` lines into "section.key" entries. Values may be quoted strings,
/// bare words, numbers, booleans or [a, b, c] lists; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Applies parsed entries on top of `base`. Unknown keys and bad values are UsageErrors.
/// Relative paths are resolved against `base_dir`.
RunConfig apply(const std::map<std::string, std::string>& entries, RunConfig base = {},
                const std::filesystem::path& base_dir = {});

RunConfig load(const std::filesystem::path& path, RunConfig base = {});

/// Splits a list value ("[1, 2]" or "1,2") into trimmed, unquoted items.
std::vector<std::string> split_list(std::string_view value);

/// Throws UsageError naming the first listed path that is unset or missing on disk.
void require_paths(const RunConfig& config, const std::vector<std::string>& names);

/// All keys the parser accepts, for documentation and error messages.
const std::vector<std::string>& known_keys();

}  // namespace cvemap::config

#include "cvemap/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>

#include "cvemap/error.hpp"
#include "file_io.hpp"

namespace cvemap::config {

namespace {

std::string unquote(std::string_view value) {
    value = detail::trim(value);
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
        return std::string(value.substr(1, value.size() - 2));
    }
    return std::string(value);
}

std::string strip_comment(std::string_view line) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote != 0) {
            if (c == quote) {
                quote = 0;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            return std::string(line.substr(0, i));
        }
    }
    return std::string(line);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw UsageError("config " + key + ": expected a number, got '" + value + "'");
}

long long to_integer(const std::string& key, const std::string& value) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw UsageError("config " + key + ": expected an integer, got '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "on" || value == "yes" || value == "1") {
        return true;
    }
    if (value == "false" || value == "off" || value == "no" || value == "0") {
        return false;
    }
    throw UsageError("config " + key + ": expected true or false, got '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value,
                                  const std::filesystem::path& base_dir)>;

Setter path_setter(std::filesystem::path RunConfig::*member) {
    return [member](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& base) {
        std::filesystem::path p(v);
        c.*member = (p.is_relative() && !base.empty()) ? base / p : p;
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"paths.feed_dir", path_setter(&RunConfig::feed_dir)},
        {"paths.snapshot_dir", path_setter(&RunConfig::snapshot_dir)},
        {"paths.catalog", path_setter(&RunConfig::catalog)},
        {"paths.dataset", path_setter(&RunConfig::dataset)},
        {"paths.records", path_setter(&RunConfig::records)},
        {"paths.gazetteer", path_setter(&RunConfig::gazetteer)},
        {"paths.stopwords", path_setter(&RunConfig::stopwords)},
        {"paths.embeddings", path_setter(&RunConfig::embeddings)},
        {"paths.journal", path_setter(&RunConfig::journal)},
        {"paths.feedback_log", path_setter(&RunConfig::feedback_log)},
        {"paths.static_dir", path_setter(&RunConfig::static_dir)},
        {"rank.ranker",
         [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
             if (v != "bm25" && v != "cosine" && v != "external") {
                 throw UsageError("config " + k + ": expected bm25, cosine or external");
             }
             c.ranker = v;
         }},
        {"rank.k1", [](RunConfig& c, const std::string& k, const std::string& v,
                       const std::filesystem::path&) { c.bm25.k1 = to_double(k, v); }},
        {"rank.b", [](RunConfig& c, const std::string& k, const std::string& v,
                      const std::filesystem::path&) { c.bm25.b = to_double(k, v); }},
        {"rank.aggregation", [](RunConfig& c, const std::string&, const std::string& v,
                                const std::filesystem::path&) { c.aggregation = rank::aggregation_from_string(v); }},
        {"rank.scorer_url", [](RunConfig& c, const std::string&, const std::string& v,
                               const std::filesystem::path&) { c.scorer_url = v; }},
        {"rank.fan_out",
         [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
             c.fan_out = static_cast<unsigned>(std::max(1LL, to_integer(k, v)));
         }},
        {"rank.preprocess", [](RunConfig& c, const std::string& k, const std::string& v,
                               const std::filesystem::path&) { c.preprocess = to_bool(k, v); }},
        {"eval.seed", [](RunConfig& c, const std::string& k, const std::string& v,
                         const std::filesystem::path&) { c.seed = static_cast<std::uint64_t>(to_integer(k, v)); }},
        {"eval.ks",
         [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
             c.ks.clear();
             for (const auto& item : split_list(v)) {
                 c.ks.push_back(static_cast<int>(to_integer(k, item)));
             }
         }},
        {"eval.train_fraction", [](RunConfig& c, const std::string& k, const std::string& v,
                                   const std::filesystem::path&) { c.train_fraction = to_double(k, v); }},
        {"eval.negatives", [](RunConfig& c, const std::string& k, const std::string& v,
                              const std::filesystem::path&) { c.negatives = static_cast<int>(to_integer(k, v)); }},
        {"ingest.top_n", [](RunConfig& c, const std::string& k, const std::string& v,
                            const std::filesystem::path&) { c.top_n = static_cast<int>(to_integer(k, v)); }},
        {"ingest.min_score", [](RunConfig& c, const std::string& k, const std::string& v,
                                const std::filesystem::path&) { c.min_score = to_double(k, v); }},
        {"ingest.first_year", [](RunConfig& c, const std::string& k, const std::string& v,
                                 const std::filesystem::path&) { c.first_year = static_cast<int>(to_integer(k, v)); }},
        {"ingest.last_year", [](RunConfig& c, const std::string& k, const std::string& v,
                                const std::filesystem::path&) { c.last_year = static_cast<int>(to_integer(k, v)); }},
        {"ingest.requests_per_second", [](RunConfig& c, const std::string& k, const std::string& v,
                                          const std::filesystem::path&) { c.requests_per_second = to_double(k, v); }},
        {"serve.host", [](RunConfig& c, const std::string&, const std::string& v,
                          const std::filesystem::path&) { c.host = v; }},
        {"serve.port", [](RunConfig& c, const std::string& k, const std::string& v,
                          const std::filesystem::path&) { c.port = static_cast<int>(to_integer(k, v)); }},
        {"serve.annotators", [](RunConfig& c, const std::string&, const std::string& v,
                                const std::filesystem::path&) { c.annotators = split_list(v); }},
        {"jobs",
         [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
             c.jobs = static_cast<unsigned>(std::max(1LL, to_integer(k, v)));
         }},
    };
    return table;
}

}  // namespace

std::vector<std::string> split_list(std::string_view value) {
    value = detail::trim(value);
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
        value = value.substr(1, value.size() - 2);
    }
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        auto comma = value.find(',', start);
        auto item = unquote(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) {
            out.push_back(std::move(item));
        }
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        auto raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        auto line_text = strip_comment(raw);
        auto line = detail::trim(line_text);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string_view::npos) {
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        auto key = std::string(detail::trim(line.substr(0, eq)));
        if (key.empty()) {
            throw UsageError("config line " + std::to_string(line_no) + ": empty key");
        }
        auto value = detail::trim(line.substr(eq + 1));
        auto full = section.empty() ? key : section + "." + key;
        out[full] = (value.size() >= 2 && value.front() == '[') ? std::string(value) : unquote(value);
    }
    return out;
}

RunConfig apply(const std::map<std::string, std::string>& entries, RunConfig base,
                const std::filesystem::path& base_dir) {
    const auto& table = setters();
    for (const auto& [key, value] : entries) {
        auto it = table.find(key);
        if (it == table.end()) {
            throw UsageError("unknown config key '" + key + "'");
        }
        it->second(base, key, value, base_dir);
    }
    return base;
}

RunConfig load(const std::filesystem::path& path, RunConfig base) {
    if (!std::filesystem::exists(path)) {
        throw UsageError("config file " + path.string() + " does not exist");
    }
    return apply(parse_key_values(detail::read_file(path)), std::move(base), path.parent_path());
}

void require_paths(const RunConfig& config, const std::vector<std::string>& names) {
    static const std::map<std::string, std::filesystem::path RunConfig::*> members = {
        {"feed_dir", &RunConfig::feed_dir},     {"snapshot_dir", &RunConfig::snapshot_dir},
        {"catalog", &RunConfig::catalog},       {"dataset", &RunConfig::dataset},
        {"records", &RunConfig::records},       {"gazetteer", &RunConfig::gazetteer},
        {"stopwords", &RunConfig::stopwords},   {"embeddings", &RunConfig::embeddings},
        {"journal", &RunConfig::journal},       {"feedback_log", &RunConfig::feedback_log},
        {"static_dir", &RunConfig::static_dir},
    };
    for (const auto& name : names) {
        auto it = members.find(name);
        if (it == members.end()) {
            throw UsageError("unknown path setting '" + name + "'");
        }
        const auto& p = config.*(it->second);
        if (p.empty()) {
            throw UsageError("paths." + name + " is not set");
        }
        if (!std::filesystem::exists(p)) {
            throw UsageError("paths." + name + " " + p.string() + " does not exist");
        }
    }
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, v] : setters()) {
            out.push_back(k);
        }
        return out;
    }();
    return keys;
}

}  // namespace cvemap::config

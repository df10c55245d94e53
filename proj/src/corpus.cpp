#include "cvemap/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "cvemap/defaults.hpp"
#include "cvemap/error.hpp"
#include "cvemap/preprocess.hpp"
#include "file_io.hpp"

namespace cvemap::corpus {

using nlohmann::json;

CollatedCweText collate(const CweEntry& entry) {
    CollatedCweText out;
    out.cwe_id = entry.cwe_id;
    out.text = entry.name;
    // The name has no terminal punctuation; end it so it stands as its own sentence.
    if (!out.text.empty() && out.text.back() != '.') {
        out.text += '.';
    }
    for (const auto* part : {&entry.description, &entry.extended_description}) {
        auto trimmed = detail::trim(*part);
        if (!trimmed.empty()) {
            out.text += ' ';
            out.text += trimmed;
        }
    }
    out.sentences = preprocess::segment_sentences(out.text);
    return out;
}

Catalog::Catalog(std::string version, std::vector<CweEntry> entries)
    : version_(std::move(version)), entries_(std::move(entries)) {
    if (entries_.size() != kCatalogSize) {
        throw DataError("catalog must have exactly 25 entries, got " + std::to_string(entries_.size()));
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const CweEntry& a, const CweEntry& b) { return a.rank < b.rank; });
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.rank != static_cast<int>(i) + 1) {
            throw DataError("catalog ranks must be exactly 1..25 (problem near rank " +
                            std::to_string(e.rank) + ")");
        }
        if (!ids.insert(e.cwe_id).second) {
            throw DataError("duplicate cwe_id in catalog: " + e.cwe_id);
        }
        if (e.name.empty()) {
            throw DataError("catalog entry " + e.cwe_id + " has an empty name");
        }
        if (!(e.cvss_score >= 0.0) || !std::isfinite(e.cvss_score)) {
            throw DataError("catalog entry " + e.cwe_id + " has an invalid score");
        }
        if (version_ == "2022" && e.cwe_id != kTop25Ids2022[i]) {
            throw DataError("rank " + std::to_string(e.rank) + " must be " + std::string(kTop25Ids2022[i]) +
                            " in the 2022 list, got " + e.cwe_id);
        }
    }
    collated_.reserve(entries_.size());
    for (const auto& e : entries_) {
        collated_.push_back(collate(e));
    }
}

Catalog Catalog::from_json_text(std::string_view json_text, std::string version) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("catalog is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw DataError("catalog must be a JSON array of 25 objects");
    }
    std::vector<CweEntry> entries;
    try {
        for (const auto& item : doc) {
            CweEntry e;
            e.rank = item.at("rank").get<int>();
            e.cwe_id = item.at("cwe_id").get<std::string>();
            e.name = item.at("name").get<std::string>();
            e.description = item.at("description").get<std::string>();
            e.extended_description = item.value("extended_description", std::string());
            e.cvss_score = item.at("cvss_score").get<double>();
            entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed catalog entry: ") + e.what());
    }
    return Catalog(std::move(version), std::move(entries));
}

Catalog Catalog::load(const std::filesystem::path& path) {
    // cwe_catalog_2022.json -> "2022"
    auto stem = path.stem().string();
    auto underscore = stem.rfind('_');
    std::string version = underscore == std::string::npos ? stem : stem.substr(underscore + 1);
    return from_json_text(detail::read_file(path), version);
}

const Catalog& Catalog::builtin() {
    static const Catalog kBuiltin = from_json_text(defaults::catalog_2022_json(), "2022");
    return kBuiltin;
}

const CweEntry& Catalog::by_rank(int rank) const {
    if (rank < 1 || rank > kCatalogSize) {
        throw DataError("rank out of range: " + std::to_string(rank));
    }
    return entries_[static_cast<std::size_t>(rank - 1)];
}

std::optional<int> Catalog::rank_of(std::string_view cwe_id) const {
    for (const auto& e : entries_) {
        if (e.cwe_id == cwe_id) {
            return e.rank;
        }
    }
    return std::nullopt;
}

const CollatedCweText& Catalog::collated(int rank) const {
    (void)by_rank(rank);
    return collated_[static_cast<std::size_t>(rank - 1)];
}

std::string Catalog::to_json_text() const {
    json doc = json::array();
    for (const auto& e : entries_) {
        doc.push_back({{"rank", e.rank},
                       {"cwe_id", e.cwe_id},
                       {"name", e.name},
                       {"description", e.description},
                       {"extended_description", e.extended_description},
                       {"cvss_score", e.cvss_score}});
    }
    return doc.dump(2);
}

std::optional<CveId> CveId::parse(std::string_view text) {
    constexpr std::string_view kPrefix = "CVE-";
    if (text.size() < kPrefix.size() + 4 + 1 + 4 || text.substr(0, 4) != kPrefix) {
        return std::nullopt;
    }
    auto rest = text.substr(4);
    if (rest.size() < 9 || rest[4] != '-') {
        return std::nullopt;
    }
    auto all_digits = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    auto year_part = rest.substr(0, 4);
    auto number_part = rest.substr(5);
    if (!all_digits(year_part) || !all_digits(number_part) || number_part.size() < 4 ||
        number_part.size() > 19) {
        return std::nullopt;
    }
    CveId id;
    std::from_chars(year_part.data(), year_part.data() + year_part.size(), id.year);
    std::from_chars(number_part.data(), number_part.data() + number_part.size(), id.number);
    return id;
}

std::string CveId::str() const {
    auto number_text = std::to_string(number);
    if (number_text.size() < 4) {
        number_text.insert(0, 4 - number_text.size(), '0');
    }
    return "CVE-" + std::to_string(year) + "-" + number_text;
}

bool cve_id_less(std::string_view a, std::string_view b) {
    auto pa = CveId::parse(a);
    auto pb = CveId::parse(b);
    if (pa && pb && *pa != *pb) {
        return *pa < *pb;
    }
    if (pa.has_value() != pb.has_value()) {
        return pa.has_value();
    }
    return a < b;
}

std::string_view to_string(RecordState state) {
    switch (state) {
        case RecordState::accepted: return "accepted";
        case RecordState::rejected: return "rejected";
        case RecordState::reserved: return "reserved";
        case RecordState::other: return "other";
    }
    return "other";
}

RecordState record_state_from_string(std::string_view text) {
    auto lowered = detail::to_lower_ascii(detail::trim(text));
    if (lowered == "accepted" || lowered == "public" || lowered == "published") {
        return RecordState::accepted;
    }
    if (lowered == "rejected" || lowered == "reject") {
        return RecordState::rejected;
    }
    if (lowered == "reserved") {
        return RecordState::reserved;
    }
    return RecordState::other;
}

std::string CveRecord::text() const {
    auto desc = detail::trim(description);
    auto head = detail::trim(title);
    if (head.empty()) {
        return std::string(desc);
    }
    if (desc.empty()) {
        return std::string(head);
    }
    std::string out(desc);
    const char last = out.back();
    out += (last == '.' || last == '!' || last == '?') ? " " : ". ";
    out += head;
    return out;
}

LabelAssignment::LabelAssignment(std::vector<int> chain) : chain_(std::move(chain)) {
    if (chain_.empty()) {
        throw DataError("label chain is empty");
    }
    for (std::size_t i = 0; i < chain_.size(); ++i) {
        if (chain_[i] < 1 || chain_[i] > kCatalogSize) {
            throw DataError("label out of range 1..25: " + std::to_string(chain_[i]));
        }
        if (i > 0 && chain_[i] == chain_[i - 1]) {
            throw DataError("label chain repeats " + std::to_string(chain_[i]) + " immediately");
        }
    }
}

LabelAssignment LabelAssignment::parse(std::string_view text) {
    auto trimmed = detail::trim(text);
    if (trimmed.empty()) {
        throw DataError("empty label");
    }
    std::vector<int> chain;
    std::size_t start = 0;
    while (true) {
        auto dash = trimmed.find('-', start);
        auto token = detail::trim(trimmed.substr(start, dash == std::string_view::npos ? dash : dash - start));
        if (token.empty()) {
            throw DataError("empty token in label '" + std::string(trimmed) + "'");
        }
        int value = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size()) {
            throw DataError("non-numeric token '" + std::string(token) + "' in label '" + std::string(trimmed) + "'");
        }
        chain.push_back(value);
        if (dash == std::string_view::npos) {
            break;
        }
        start = dash + 1;
    }
    return LabelAssignment(std::move(chain));
}

std::string LabelAssignment::str() const {
    std::string out;
    for (std::size_t i = 0; i < chain_.size(); ++i) {
        if (i > 0) {
            out += '-';
        }
        out += std::to_string(chain_[i]);
    }
    return out;
}

std::vector<std::string> LabelAssignment::cwe_ids(const Catalog& catalog) const {
    std::vector<std::string> out;
    out.reserve(chain_.size());
    for (int rank : chain_) {
        out.push_back(catalog.by_rank(rank).cwe_id);
    }
    return out;
}

namespace {

std::string_view unquote(std::string_view field) {
    field = detail::trim(field);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
        field = field.substr(1, field.size() - 2);
    }
    return field;
}

}  // namespace

std::vector<DatasetRow> parse_dataset_csv(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") {
        text.remove_prefix(3);
    }
    auto lines = detail::split_lines(text);
    std::vector<DatasetRow> rows;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = lines[i];
        auto comma = line.find(',');
        if (comma == std::string_view::npos) {
            throw DataError("line " + std::to_string(i + 1) + ": expected two columns");
        }
        auto id = unquote(line.substr(0, comma));
        auto labels = unquote(line.substr(comma + 1));
        if (i == 0 && id == "cve_id") {
            continue;
        }
        if (!CveId::parse(id)) {
            throw DataError("line " + std::to_string(i + 1) + ": malformed CVE id '" + std::string(id) + "'");
        }
        if (!seen.insert(std::string(id)).second) {
            throw DataError("duplicate cve_id " + std::string(id));
        }
        try {
            rows.push_back({std::string(id), LabelAssignment::parse(labels)});
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<DatasetRow> load_dataset(const std::filesystem::path& path) {
    auto text = detail::read_file(path);
    if (path.extension() == ".jsonl") {
        return parse_dataset_jsonl(text);
    }
    return parse_dataset_csv(text);
}

std::string dataset_to_csv(std::span<const DatasetRow> rows) {
    std::unordered_set<std::string> seen;
    std::string out = "cve_id,labels\n";
    for (const auto& row : rows) {
        if (!seen.insert(row.cve_id).second) {
            throw DataError("duplicate cve_id " + row.cve_id + " cannot be written as CSV");
        }
        out += row.cve_id;
        out += ',';
        out += row.assignment.str();
        out += '\n';
    }
    return out;
}

void save_dataset(std::span<const DatasetRow> rows, const std::filesystem::path& path) {
    if (path.extension() == ".jsonl") {
        detail::write_file(path, dataset_to_jsonl(rows));
    } else {
        detail::write_file(path, dataset_to_csv(rows));
    }
}

std::vector<DatasetRow> parse_dataset_jsonl(std::string_view text) {
    std::vector<DatasetRow> rows;
    auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto obj = json::parse(lines[i]);
            auto id = obj.at("cve_id").get<std::string>();
            if (!CveId::parse(id)) {
                throw DataError("malformed CVE id '" + id + "'");
            }
            const auto& labels = obj.at("labels");
            LabelAssignment assignment = labels.is_string()
                                             ? LabelAssignment::parse(labels.get<std::string>())
                                             : LabelAssignment(labels.get<std::vector<int>>());
            rows.push_back({std::move(id), std::move(assignment)});
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return rows;
}

std::string dataset_to_jsonl(std::span<const DatasetRow> rows) {
    std::string out;
    for (const auto& row : rows) {
        json obj = {{"cve_id", row.cve_id}, {"labels", row.assignment.str()}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

DatasetStats dataset_stats(std::span<const DatasetRow> rows) {
    DatasetStats stats;
    std::unordered_set<std::string> seen;
    for (const auto& row : rows) {
        if (!seen.insert(row.cve_id).second) {
            throw DataError("duplicate cve_id " + row.cve_id);
        }
        ++stats.total;
        if (row.assignment.is_single()) {
            ++stats.single_count;
            ++stats.per_label_counts[static_cast<std::size_t>(row.assignment.first() - 1)];
        } else {
            ++stats.causal_count;
        }
    }
    return stats;
}

std::vector<DatasetRow> single_label_rows(std::span<const DatasetRow> rows) {
    std::vector<DatasetRow> out;
    for (const auto& row : rows) {
        if (row.assignment.is_single()) {
            out.push_back(row);
        }
    }
    return out;
}

}  // namespace cvemap::corpus

#include "cvemap/embedding_store.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cvemap/error.hpp"
#include "file_io.hpp"

namespace cvemap::rank {

using nlohmann::json;

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) {
        throw DataError("embedding dimension must be positive");
    }
}

void EmbeddingStore::add(std::string key, std::size_t sentence, std::vector<double> vector) {
    if (vector.empty()) {
        throw DataError("empty vector for (" + key + ", " + std::to_string(sentence) + ")");
    }
    if (dim_ == 0) {
        dim_ = vector.size();
    }
    if (vector.size() != dim_) {
        throw DataError("dimension mismatch for (" + key + ", " + std::to_string(sentence) + "): expected " +
                        std::to_string(dim_) + ", got " + std::to_string(vector.size()));
    }
    if (!std::all_of(vector.begin(), vector.end(), [](double x) { return std::isfinite(x); })) {
        throw DataError("non-finite component in (" + key + ", " + std::to_string(sentence) + ")");
    }
    vectors_[{std::move(key), sentence}] = std::move(vector);
}

const std::vector<double>* EmbeddingStore::find(const std::string& key, std::size_t sentence) const {
    auto it = vectors_.find({key, sentence});
    return it == vectors_.end() ? nullptr : &it->second;
}

const std::vector<double>& EmbeddingStore::at(const std::string& key, std::size_t sentence) const {
    const auto* v = find(key, sentence);
    if (v == nullptr) {
        throw DataError("missing embedding for (" + key + ", " + std::to_string(sentence) + ")");
    }
    return *v;
}

std::size_t EmbeddingStore::sentence_count(const std::string& key) const {
    std::size_t count = 0;
    for (auto it = vectors_.lower_bound({key, 0}); it != vectors_.end() && it->first.first == key; ++it) {
        ++count;
    }
    return count;
}

EmbeddingStore EmbeddingStore::parse_jsonl(std::string_view text) {
    EmbeddingStore store;
    auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto obj = json::parse(lines[i]);
            auto key = obj.at("key").get<std::string>();
            auto sent = obj.at("sent").get<std::size_t>();
            auto dim = obj.at("dim").get<std::size_t>();
            std::vector<double> vec;
            for (const auto& x : obj.at("vec")) {
                if (!x.is_number()) {
                    throw DataError("non-numeric component");
                }
                vec.push_back(x.get<double>());
            }
            if (vec.size() != dim) {
                throw DataError("dim field " + std::to_string(dim) + " does not match vector length " +
                                std::to_string(vec.size()));
            }
            store.add(std::move(key), sent, std::move(vec));
        } catch (const json::exception& e) {
            throw DataError("embedding line " + std::to_string(i + 1) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("embedding line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return store;
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
    return parse_jsonl(detail::read_file(path));
}

std::string EmbeddingStore::to_jsonl() const {
    std::string out;
    for (const auto& [key, vec] : vectors_) {
        json obj = {{"key", key.first}, {"sent", key.second}, {"dim", vec.size()}, {"vec", vec}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("cosine of vectors with different dimensions");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

Aggregation aggregation_from_string(std::string_view text) {
    if (text == "max") {
        return Aggregation::max;
    }
    if (text == "mean") {
        return Aggregation::mean;
    }
    throw UsageError("unknown aggregation '" + std::string(text) + "' (expected max or mean)");
}

std::string_view to_string(Aggregation aggregation) {
    return aggregation == Aggregation::max ? "max" : "mean";
}

RankedList cosine_sentence_rank(const std::string& cve_id, std::size_t cve_sentences,
                                std::span<const std::size_t> cwe_sentences, const corpus::Catalog& catalog,
                                const EmbeddingStore& store, Aggregation aggregation) {
    if (cwe_sentences.size() != corpus::kCatalogSize) {
        throw DataError("expected sentence counts for 25 catalog entries");
    }
    const auto cve_key = EmbeddingStore::cve_key(cve_id);
    std::vector<const std::vector<double>*> query;
    query.reserve(cve_sentences);
    for (std::size_t i = 0; i < cve_sentences; ++i) {
        query.push_back(&store.at(cve_key, i));
    }

    std::array<double, corpus::kCatalogSize> scores{};
    for (int rank = 1; rank <= corpus::kCatalogSize; ++rank) {
        const auto key = EmbeddingStore::cwe_key(catalog.by_rank(rank).cwe_id);
        const std::size_t count = cwe_sentences[static_cast<std::size_t>(rank - 1)];
        double best = 0.0;
        double sum = 0.0;
        bool any = false;
        for (std::size_t j = 0; j < count; ++j) {
            const auto& doc = store.at(key, j);
            for (const auto* q : query) {
                const double c = cosine(*q, doc);
                best = any ? std::max(best, c) : c;
                sum += c;
                any = true;
            }
        }
        if (any) {
            scores[static_cast<std::size_t>(rank - 1)] =
                aggregation == Aggregation::max ? best : sum / static_cast<double>(count * query.size());
        }
    }
    auto list = RankedList::from_scores(cve_id, scores);
    list.fallback = std::all_of(scores.begin(), scores.end(), [](double s) { return s == 0.0; });
    return list;
}

RankedList cosine_sentence_rank(const corpus::CveRecord& record, const corpus::Catalog& catalog,
                                const EmbeddingStore& store, Aggregation aggregation, const TextPipeline& pipeline) {
    std::array<std::size_t, corpus::kCatalogSize> counts{};
    for (int rank = 1; rank <= corpus::kCatalogSize; ++rank) {
        counts[static_cast<std::size_t>(rank - 1)] = catalog.collated(rank).sentences.size();
    }
    return cosine_sentence_rank(record.cve_id, pipeline.query_sentences(record).size(), counts, catalog, store,
                                aggregation);
}

}  // namespace cvemap::rank

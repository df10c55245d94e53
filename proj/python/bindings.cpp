#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cvemap/corpus.hpp"
#include "cvemap/embedding_store.hpp"
#include "cvemap/error.hpp"
#include "cvemap/eval.hpp"
#include "cvemap/ingest.hpp"
#include "cvemap/preprocess.hpp"
#include "cvemap/rank.hpp"

namespace py = pybind11;
using namespace cvemap;

namespace {

rank::TextPipeline pipeline_for(bool preprocess) {
    rank::TextPipeline p;
    p.cleanup = preprocess;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CVE to CWE Top 25 ranking toolkit";

    static py::exception<Error> base_error(m, "Error");
    static py::exception<UsageError> usage_error(m, "UsageError", base_error.ptr());
    static py::exception<DataError> data_error(m, "DataError", base_error.ptr());
    static py::exception<UpstreamError> upstream_error(m, "UpstreamError", base_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const UsageError& e) {
            py::set_error(usage_error, e.what());
        } catch (const DataError& e) {
            py::set_error(data_error, e.what());
        } catch (const UpstreamError& e) {
            py::set_error(upstream_error, e.what());
        } catch (const Error& e) {
            py::set_error(base_error, e.what());
        }
    });

    py::class_<corpus::LabelAssignment>(m, "LabelAssignment")
        .def(py::init<std::vector<int>>())
        .def_property_readonly("chain", &corpus::LabelAssignment::chain)
        .def_property_readonly("is_single", &corpus::LabelAssignment::is_single)
        .def_property_readonly("is_causal", &corpus::LabelAssignment::is_causal)
        .def("cwe_ids", [](const corpus::LabelAssignment& a) { return a.cwe_ids(corpus::Catalog::builtin()); })
        .def("__str__", &corpus::LabelAssignment::str)
        .def("__repr__", [](const corpus::LabelAssignment& a) { return "LabelAssignment('" + a.str() + "')"; })
        .def(py::self == py::self);

    m.def("parse_label", &corpus::parse_label, py::arg("text"));
    m.def("format_label", &corpus::format_label, py::arg("assignment"));

    py::class_<corpus::DatasetRow>(m, "DatasetRow")
        .def(py::init<std::string, corpus::LabelAssignment>(), py::arg("cve_id"), py::arg("assignment"))
        .def_readwrite("cve_id", &corpus::DatasetRow::cve_id)
        .def_readwrite("assignment", &corpus::DatasetRow::assignment)
        .def("__repr__",
             [](const corpus::DatasetRow& r) { return "DatasetRow('" + r.cve_id + "', '" + r.assignment.str() + "')"; })
        .def(py::self == py::self);

    py::class_<corpus::DatasetStats>(m, "DatasetStats")
        .def_readonly("total", &corpus::DatasetStats::total)
        .def_readonly("single_count", &corpus::DatasetStats::single_count)
        .def_readonly("causal_count", &corpus::DatasetStats::causal_count)
        .def_readonly("per_label_counts", &corpus::DatasetStats::per_label_counts);

    m.def("load_dataset", &corpus::load_dataset, py::arg("path"));
    m.def("save_dataset",
          [](const std::vector<corpus::DatasetRow>& rows, const std::filesystem::path& path) {
              corpus::save_dataset(rows, path);
          },
          py::arg("rows"), py::arg("path"));
    m.def("dataset_stats", [](const std::vector<corpus::DatasetRow>& rows) { return corpus::dataset_stats(rows); },
          py::arg("rows"));

    py::class_<corpus::CweEntry>(m, "CweEntry")
        .def_readonly("rank", &corpus::CweEntry::rank)
        .def_readonly("cwe_id", &corpus::CweEntry::cwe_id)
        .def_readonly("name", &corpus::CweEntry::name)
        .def_readonly("description", &corpus::CweEntry::description)
        .def_readonly("extended_description", &corpus::CweEntry::extended_description)
        .def_readonly("cvss_score", &corpus::CweEntry::cvss_score);

    py::class_<corpus::Catalog>(m, "Catalog")
        .def_static("builtin", &corpus::Catalog::builtin, py::return_value_policy::reference)
        .def_static("load", &corpus::Catalog::load, py::arg("path"))
        .def_property_readonly("version", &corpus::Catalog::version)
        .def("by_rank", &corpus::Catalog::by_rank, py::arg("rank"), py::return_value_policy::reference_internal)
        .def("rank_of", &corpus::Catalog::rank_of, py::arg("cwe_id"))
        .def("collated_text", [](const corpus::Catalog& c, int rank) { return c.collated(rank).text; })
        .def("collated_sentences", [](const corpus::Catalog& c, int rank) { return c.collated(rank).sentences; })
        .def("__len__", [](const corpus::Catalog&) { return corpus::kCatalogSize; });

    py::class_<corpus::CveRecord>(m, "CveRecord")
        .def(py::init([](std::string cve_id, std::string description, std::string title,
                         std::set<std::string> nvd_labels) {
                 corpus::CveRecord r;
                 r.cve_id = std::move(cve_id);
                 r.description = std::move(description);
                 r.title = std::move(title);
                 r.state = corpus::RecordState::accepted;
                 r.nvd_labels = std::move(nvd_labels);
                 return r;
             }),
             py::arg("cve_id"), py::arg("description"), py::arg("title") = "",
             py::arg("nvd_labels") = std::set<std::string>{})
        .def_readwrite("cve_id", &corpus::CveRecord::cve_id)
        .def_readwrite("title", &corpus::CveRecord::title)
        .def_readwrite("description", &corpus::CveRecord::description)
        .def_readwrite("nvd_labels", &corpus::CveRecord::nvd_labels)
        .def("text", &corpus::CveRecord::text);

    m.def("load_records", &ingest::load_records, py::arg("path"));

    py::class_<preprocess::RemovedSpan>(m, "RemovedSpan")
        .def_readonly("begin", &preprocess::RemovedSpan::begin)
        .def_readonly("end", &preprocess::RemovedSpan::end)
        .def_readonly("text", &preprocess::RemovedSpan::text)
        .def_property_readonly("category",
                               [](const preprocess::RemovedSpan& s) { return std::string(to_string(s.category)); });

    py::class_<preprocess::CleanupReport>(m, "CleanupReport")
        .def_readonly("input", &preprocess::CleanupReport::input)
        .def_readonly("output", &preprocess::CleanupReport::output)
        .def_readonly("removed", &preprocess::CleanupReport::removed);

    m.def("cleanup",
          [](const std::string& text, std::optional<std::vector<std::string>> gazetteer) {
              if (gazetteer) {
                  return preprocess::cleanup(text, preprocess::Gazetteer(*gazetteer));
              }
              return preprocess::cleanup(text, preprocess::Gazetteer::builtin());
          },
          py::arg("text"), py::arg("gazetteer") = py::none());
    m.def("tokenize", [](const std::string& text) { return preprocess::tokenize(text, preprocess::StopwordList::builtin()); },
          py::arg("text"));
    m.def("segment_sentences", &preprocess::segment_sentences, py::arg("text"));

    py::class_<rank::RankedEntry>(m, "RankedEntry")
        .def_readonly("rank", &rank::RankedEntry::rank)
        .def_readonly("score", &rank::RankedEntry::score)
        .def("__repr__", [](const rank::RankedEntry& e) {
            return "RankedEntry(" + std::to_string(e.rank) + ", " + std::to_string(e.score) + ")";
        });

    py::class_<rank::RankedList>(m, "RankedList")
        .def_static("from_scores",
                    [](std::string cve_id, const std::vector<double>& scores) {
                        return rank::RankedList::from_scores(std::move(cve_id), scores);
                    },
                    py::arg("cve_id"), py::arg("scores"))
        .def_readonly("cve_id", &rank::RankedList::cve_id)
        .def_readonly("entries", &rank::RankedList::entries)
        .def_readonly("fallback", &rank::RankedList::fallback)
        .def("ranks", [](const rank::RankedList& l) {
            std::vector<int> out;
            for (const auto& e : l.entries) {
                out.push_back(e.rank);
            }
            return out;
        })
        .def("position_of", &rank::RankedList::position_of, py::arg("rank"))
        .def("top", &rank::RankedList::top)
        .def("to_json", &rank::RankedList::to_json);

    m.def("bm25_rank",
          [](const corpus::CveRecord& record, double k1, double b, bool preprocess) {
              return rank::bm25_rank(record, corpus::Catalog::builtin(), {k1, b}, pipeline_for(preprocess));
          },
          py::arg("record"), py::arg("k1") = 1.2, py::arg("b") = 0.75, py::arg("preprocess") = true);
    m.def("cosine_sentence_rank",
          [](const corpus::CveRecord& record, const std::filesystem::path& store_path, const std::string& aggregation,
             bool preprocess) {
              auto store = rank::EmbeddingStore::load(store_path);
              return rank::cosine_sentence_rank(record, corpus::Catalog::builtin(), store,
                                                rank::aggregation_from_string(aggregation), pipeline_for(preprocess));
          },
          py::arg("record"), py::arg("store_path"), py::arg("aggregation") = "max", py::arg("preprocess") = true);

    m.def("reciprocal_rank", &eval::reciprocal_rank, py::arg("ranked"), py::arg("truth"));
    m.def("average_precision_at_k", &eval::average_precision_at_k, py::arg("ranked"), py::arg("truth"), py::arg("k"));
    m.def("ndcg_at_k", &eval::ndcg_at_k, py::arg("ranked"), py::arg("truth"), py::arg("k"));

    py::class_<eval::EvalReport>(m, "EvalReport")
        .def_readonly("model", &eval::EvalReport::model)
        .def_readonly("mrr", &eval::EvalReport::mrr)
        .def_readonly("map_at", &eval::EvalReport::map_at)
        .def_readonly("ndcg_at", &eval::EvalReport::ndcg_at)
        .def_readonly("n_queries", &eval::EvalReport::n_queries)
        .def("to_json", &eval::EvalReport::to_json);

    m.def("evaluate",
          [](const std::string& model, const std::vector<rank::RankedList>& rankings,
             const std::vector<corpus::DatasetRow>& gold, std::vector<int> ks) {
              std::map<std::string, rank::RankedList> by_id;
              for (const auto& r : rankings) {
                  by_id.emplace(r.cve_id, r);
              }
              eval::EvaluateOptions options;
              options.ks = std::move(ks);
              return eval::evaluate(model, by_id, gold, options);
          },
          py::arg("model"), py::arg("rankings"), py::arg("gold"), py::arg("ks") = eval::kDefaultKs);
    m.def("check_invariants", &eval::check_invariants, py::arg("report"), py::arg("tolerance") = 1e-12);

    m.def("stratified_split",
          [](const std::vector<corpus::DatasetRow>& rows, double train_fraction, std::uint64_t seed) {
              auto result = eval::stratified_split(rows, {train_fraction, seed});
              return py::make_tuple(result.train, result.test);
          },
          py::arg("rows"), py::arg("train_fraction") = 0.8, py::arg("seed") = 42);

    py::class_<eval::TrainingPair>(m, "TrainingPair")
        .def_readonly("cve_id", &eval::TrainingPair::cve_id)
        .def_readonly("cwe_id", &eval::TrainingPair::cwe_id)
        .def_readonly("query", &eval::TrainingPair::query)
        .def_readonly("document", &eval::TrainingPair::document)
        .def_readonly("relevance", &eval::TrainingPair::relevance);

    m.def("export_training_pairs",
          [](const std::vector<corpus::DatasetRow>& rows, const std::vector<corpus::CveRecord>& records, int negatives,
             std::uint64_t seed, bool preprocess) {
              std::map<std::string, corpus::CveRecord> by_id;
              for (const auto& r : records) {
                  by_id.emplace(r.cve_id, r);
              }
              return eval::export_training_pairs(rows, by_id, corpus::Catalog::builtin(), {negatives, seed},
                                                 pipeline_for(preprocess));
          },
          py::arg("rows"), py::arg("records"), py::arg("negatives") = 1, py::arg("seed") = 42,
          py::arg("preprocess") = true);

    m.def("macro_f1",
          [](const std::map<std::string, std::string>& predictions, const std::vector<corpus::DatasetRow>& gold) {
              auto report = eval::macro_f1(predictions, gold, corpus::Catalog::builtin());
              py::dict classes;
              for (const auto& c : report.classes) {
                  classes[py::str(c.label)] = c.f1;
              }
              return py::make_tuple(report.macro_f1, classes);
          },
          py::arg("predictions"), py::arg("gold"));
}

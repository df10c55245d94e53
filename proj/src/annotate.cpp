#include "cvemap/annotate.hpp"

#include <algorithm>

#include <json.hpp>

#include "cvemap/nvd_fetch.hpp"
#include "file_io.hpp"
#include "hash.hpp"

namespace cvemap::annotate {

using nlohmann::json;
using Reason = WorkflowError::Reason;

std::string_view to_string(Action action) {
    switch (action) {
        case Action::agree:
            return "agree";
        case Action::relabel:
            return "relabel";
        case Action::causal:
            return "causal";
        case Action::unmappable:
            return "unmappable";
    }
    return "agree";
}

std::string_view to_string(Status status) {
    switch (status) {
        case Status::pending_r1:
            return "pending_r1";
        case Status::pending_r2:
            return "pending_r2";
        case Status::final:
            return "final";
        case Status::conflict:
            return "conflict";
        case Status::pending_adjudication:
            return "pending_adjudication";
        case Status::excluded:
            return "excluded";
    }
    return "pending_r1";
}

Action action_from_string(std::string_view text) {
    for (auto a : {Action::agree, Action::relabel, Action::causal, Action::unmappable}) {
        if (to_string(a) == text) {
            return a;
        }
    }
    throw WorkflowError(Reason::invalid, "unknown action '" + std::string(text) + "'");
}

Status status_from_string(std::string_view text) {
    for (auto s : {Status::pending_r1, Status::pending_r2, Status::final, Status::conflict,
                   Status::pending_adjudication, Status::excluded}) {
        if (to_string(s) == text) {
            return s;
        }
    }
    throw DataError("unknown task status '" + std::string(text) + "'");
}

std::map<std::string, Roles> assign(std::span<const std::string> cve_ids, std::span<const std::string> annotators) {
    if (annotators.size() != 3) {
        throw UsageError("exactly 3 annotators are required, got " + std::to_string(annotators.size()));
    }
    if (std::set<std::string>(annotators.begin(), annotators.end()).size() != 3) {
        throw UsageError("annotator ids must be distinct");
    }
    std::vector<std::string> sorted(cve_ids.begin(), cve_ids.end());
    std::sort(sorted.begin(), sorted.end(), [](const std::string& a, const std::string& b) {
        return corpus::cve_id_less(a, b);
    });
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DataError("duplicate CVE id in annotation pool: " + *std::adjacent_find(sorted.begin(), sorted.end()));
    }
    std::map<std::string, Roles> out;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        out[sorted[i]] = Roles{annotators[i % 3], annotators[(i + 1) % 3], annotators[(i + 2) % 3]};
    }
    return out;
}

std::optional<std::string> AnnotationTask::expected_actor() const {
    switch (status) {
        case Status::pending_r1:
            return roles.round1;
        case Status::pending_r2:
            return roles.round2;
        case Status::pending_adjudication:
        case Status::conflict:
            return roles.adjudicator;
        default:
            return std::nullopt;
    }
}

std::optional<corpus::LabelAssignment> AnnotationTask::final_labels() const {
    if (status != Status::final) {
        return std::nullopt;
    }
    return adjudication ? adjudication->effective : round2->effective;
}

namespace {

std::optional<corpus::LabelAssignment> nvd_label(const corpus::CveRecord& record, const corpus::Catalog& catalog) {
    std::set<int> ranks;
    for (const auto& id : record.nvd_labels) {
        if (auto rank = catalog.rank_of(id)) {
            ranks.insert(*rank);
        }
    }
    if (ranks.size() != 1) {
        return std::nullopt;
    }
    return corpus::LabelAssignment({*ranks.begin()});
}

}  // namespace

void submit(AnnotationTask& task, const Decision& decision, std::uint64_t task_version,
            const corpus::Catalog& catalog) {
    const auto& id = task.record.cve_id;
    if (task.closed()) {
        throw WorkflowError(Reason::closed, id + " is already " + std::string(to_string(task.status)));
    }
    const auto expected = task.expected_actor();
    if (decision.annotator != *expected) {
        throw WorkflowError(Reason::wrong_actor,
                            id + " is waiting for " + *expected + ", not " + decision.annotator);
    }
    if (task_version != task.version) {
        throw WorkflowError(Reason::stale_version, id + " is at version " + std::to_string(task.version) +
                                                       ", decision was made on " + std::to_string(task_version));
    }

    RoundRecord record{decision, std::nullopt};
    switch (decision.action) {
        case Action::relabel:
        case Action::causal: {
            if (!decision.labels || decision.labels->chain().empty()) {
                throw WorkflowError(Reason::invalid, std::string(to_string(decision.action)) + " needs labels");
            }
            if (decision.action == Action::relabel && !decision.labels->is_single()) {
                throw WorkflowError(Reason::invalid, "relabel takes a single label; use causal for chains");
            }
            if (decision.action == Action::causal && !decision.labels->is_causal()) {
                throw WorkflowError(Reason::invalid, "causal takes a chain of two or more labels");
            }
            record.effective = decision.labels;
            break;
        }
        case Action::agree:
            if (decision.labels) {
                throw WorkflowError(Reason::invalid, "agree carries no labels");
            }
            if (task.status == Status::pending_r1) {
                record.effective = nvd_label(task.record, catalog);
                if (!record.effective) {
                    throw WorkflowError(Reason::invalid,
                                        id + " has no single Top 25 NVD label to agree with");
                }
            } else if (task.status == Status::pending_r2) {
                record.effective = task.round1->effective;
            } else {
                throw WorkflowError(Reason::invalid, "the adjudicator must choose labels or unmappable");
            }
            break;
        case Action::unmappable:
            if (decision.labels) {
                throw WorkflowError(Reason::invalid, "unmappable carries no labels");
            }
            break;
    }

    switch (task.status) {
        case Status::pending_r1:
            task.round1 = std::move(record);
            task.status = Status::pending_r2;
            break;
        case Status::pending_r2: {
            const bool agreed = record.effective == task.round1->effective;
            task.round2 = std::move(record);
            if (!agreed) {
                task.status = Status::pending_adjudication;
            } else {
                task.status = task.round2->effective ? Status::final : Status::excluded;
            }
            break;
        }
        default:
            task.adjudication = std::move(record);
            task.status = task.adjudication->effective ? Status::final : Status::excluded;
            break;
    }
    ++task.version;
}

std::vector<corpus::DatasetRow> export_final(std::span<const AnnotationTask> tasks) {
    std::vector<corpus::DatasetRow> rows;
    for (const auto& t : tasks) {
        if (auto labels = t.final_labels()) {
            rows.push_back({t.record.cve_id, *labels});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const corpus::DatasetRow& a, const corpus::DatasetRow& b) {
        return corpus::cve_id_less(a.cve_id, b.cve_id);
    });
    return rows;
}

double agreement_with_nvd(std::span<const corpus::DatasetRow> rows,
                          const std::map<std::string, std::set<std::string>>& nvd_labels,
                          const corpus::Catalog& catalog) {
    if (rows.empty()) {
        return 0.0;
    }
    std::size_t agreeing = 0;
    for (const auto& row : rows) {
        auto nvd = nvd_labels.find(row.cve_id);
        if (nvd == nvd_labels.end()) {
            continue;
        }
        const auto ids = row.assignment.cwe_ids(catalog);
        if (std::all_of(ids.begin(), ids.end(), [&](const std::string& id) { return nvd->second.count(id) > 0; })) {
            ++agreeing;
        }
    }
    return static_cast<double>(agreeing) / static_cast<double>(rows.size());
}

namespace {

json ranking_json(const rank::RankedList& ranking, const corpus::Catalog* catalog) {
    json arr = json::array();
    for (const auto& e : ranking.entries) {
        json item = {{"rank", e.rank}, {"score", e.score}};
        if (catalog != nullptr) {
            const auto& entry = catalog->by_rank(e.rank);
            item["cwe_id"] = entry.cwe_id;
            item["name"] = entry.name;
        }
        arr.push_back(std::move(item));
    }
    return arr;
}

json labels_json(const std::optional<corpus::LabelAssignment>& labels) {
    return labels ? json(labels->str()) : json(nullptr);
}

json round_json(const std::optional<RoundRecord>& round) {
    if (!round) {
        return nullptr;
    }
    return {{"annotator", round->decision.annotator},
            {"action", to_string(round->decision.action)},
            {"labels", labels_json(round->effective)},
            {"timestamp", round->decision.timestamp}};
}

std::string event_content(const FeedbackEvent& event, const std::string& prev_hash) {
    json obj = {{"cve_id", event.cve_id},
                {"model_ranking", ranking_json(event.model_ranking, nullptr)},
                {"human_labels", labels_json(event.human_labels)},
                {"accepted_top1", event.accepted_top1},
                {"timestamp", event.timestamp},
                {"prev_hash", prev_hash}};
    return obj.dump();
}

}  // namespace

std::string decision_to_json(const std::string& cve_id, const Decision& decision, std::uint64_t task_version) {
    json obj = {{"cve_id", cve_id},
                {"annotator", decision.annotator},
                {"action", to_string(decision.action)},
                {"labels", labels_json(decision.labels)},
                {"timestamp", decision.timestamp},
                {"task_version", task_version}};
    return obj.dump();
}

std::string task_to_json(const AnnotationTask& task, const corpus::Catalog& catalog) {
    json nvd = json::array();
    for (const auto& id : task.record.nvd_labels) {
        json item = {{"cwe_id", id}};
        if (auto rank = catalog.rank_of(id)) {
            item["rank"] = *rank;
            item["name"] = catalog.by_rank(*rank).name;
        }
        nvd.push_back(std::move(item));
    }
    const auto expected = task.expected_actor();
    json obj = {{"cve_id", task.record.cve_id},
                {"title", task.record.title},
                {"description", task.record.description},
                {"nvd_labels", nvd},
                {"model_ranking", task.model_ranking ? ranking_json(*task.model_ranking, &catalog) : json(nullptr)},
                {"round1", round_json(task.round1)},
                {"round2", round_json(task.round2)},
                {"adjudication", round_json(task.adjudication)},
                {"roles",
                 {{"round1", task.roles.round1},
                  {"round2", task.roles.round2},
                  {"adjudicator", task.roles.adjudicator}}},
                {"status", to_string(task.status)},
                {"expected_actor", expected ? json(*expected) : json(nullptr)},
                {"final_labels", labels_json(task.final_labels())},
                {"task_version", task.version}};
    return obj.dump();
}

FeedbackLog::FeedbackLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        count_ = verify(path_);
        auto lines = detail::split_lines(detail::read_file(path_));
        if (!lines.empty()) {
            last_hash_ = json::parse(lines.back()).at("hash").get<std::string>();
        }
    }
}

void FeedbackLog::append(const FeedbackEvent& event) {
    const auto content = event_content(event, last_hash_);
    const auto hash = detail::sha256_hex(content);
    auto obj = json::parse(content);
    obj["hash"] = hash;
    detail::append_line(path_, obj.dump());
    last_hash_ = hash;
    ++count_;
}

std::size_t FeedbackLog::verify(const std::filesystem::path& path) {
    auto text = detail::read_file(path);
    auto lines = detail::split_lines(text);
    std::string prev;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            auto obj = json::parse(lines[i]);
            const auto hash = obj.at("hash").get<std::string>();
            obj.erase("hash");
            if (obj.at("prev_hash").get<std::string>() != prev) {
                throw DataError("feedback log line " + std::to_string(i + 1) + " does not link to its predecessor");
            }
            if (detail::sha256_hex(obj.dump()) != hash) {
                throw DataError("feedback log line " + std::to_string(i + 1) + " hash mismatch");
            }
            prev = hash;
        } catch (const json::exception& e) {
            throw DataError("feedback log line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return lines.size();
}

std::string WorkflowStats::to_json(const corpus::Catalog& catalog) const {
    json per_label = json::array();
    for (int rank = 1; rank <= corpus::kCatalogSize; ++rank) {
        const auto& e = catalog.by_rank(rank);
        per_label.push_back({{"rank", rank},
                             {"cwe_id", e.cwe_id},
                             {"name", e.name},
                             {"count", dataset.per_label_counts[static_cast<std::size_t>(rank - 1)]}});
    }
    json obj = {{"total", dataset.total},
                {"single", dataset.single_count},
                {"causal", dataset.causal_count},
                {"per_label", per_label},
                {"pending_by_annotator", pending_by_annotator},
                {"by_status", by_status},
                {"conflict_queue", conflict_queue},
                {"agreement_with_nvd", agreement_with_nvd}};
    return obj.dump();
}

Workflow::Workflow(std::span<const corpus::CveRecord> records, std::vector<std::string> annotators,
                   const corpus::Catalog& catalog, WorkflowOptions options)
    : catalog_(catalog), annotators_(std::move(annotators)), options_(std::move(options)) {
    if (!options_.clock) {
        options_.clock = ingest::utc_now_iso8601;
    }
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) {
        ids.push_back(r.cve_id);
    }
    auto roles = assign(ids, annotators_);
    for (const auto& r : records) {
        AnnotationTask task;
        task.record = r;
        task.roles = roles.at(r.cve_id);
        tasks_.emplace(r.cve_id, std::move(task));
    }
    if (!options_.feedback_log.empty()) {
        feedback_.emplace(options_.feedback_log);
    }
    if (!options_.journal.empty() && std::filesystem::exists(options_.journal)) {
        replay_journal();
    }
}

bool Workflow::is_annotator(std::string_view id) const {
    return std::find(annotators_.begin(), annotators_.end(), id) != annotators_.end();
}

void Workflow::replay_journal() {
    auto text = detail::read_file(options_.journal);
    auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto where = options_.journal.string() + ":" + std::to_string(i + 1);
        try {
            auto obj = json::parse(lines[i]);
            Decision d;
            d.annotator = obj.at("annotator").get<std::string>();
            d.action = action_from_string(obj.at("action").get<std::string>());
            if (!obj.at("labels").is_null()) {
                d.labels = corpus::parse_label(obj.at("labels").get<std::string>());
            }
            d.timestamp = obj.at("timestamp").get<std::string>();
            auto it = tasks_.find(obj.at("cve_id").get<std::string>());
            if (it == tasks_.end()) {
                throw DataError("journal refers to unknown task");
            }
            annotate::submit(it->second, d, obj.at("task_version").get<std::uint64_t>(), catalog_);
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        } catch (const Error& e) {
            throw DataError(where + ": " + e.what());
        }
    }
}

void Workflow::attach_ranking(AnnotationTask& task) {
    if (options_.ranker && !task.model_ranking) {
        task.model_ranking = options_.ranker(task.record);
    }
}

std::optional<AnnotationTask> Workflow::next_task(const std::string& annotator) {
    std::lock_guard lock(mutex_);
    if (!is_annotator(annotator)) {
        throw WorkflowError(Reason::not_found, "unknown annotator '" + annotator + "'");
    }
    for (auto& [id, task] : tasks_) {
        if (task.expected_actor() == annotator) {
            attach_ranking(task);
            return task;
        }
    }
    return std::nullopt;
}

std::optional<AnnotationTask> Workflow::task(const std::string& cve_id) const {
    std::lock_guard lock(mutex_);
    auto it = tasks_.find(cve_id);
    if (it == tasks_.end()) {
        return std::nullopt;
    }
    return it->second;
}

AnnotationTask Workflow::submit(const std::string& cve_id, Decision decision, std::uint64_t task_version) {
    std::lock_guard lock(mutex_);
    auto it = tasks_.find(cve_id);
    if (it == tasks_.end()) {
        throw WorkflowError(Reason::not_found, "no task for " + cve_id);
    }
    if (decision.timestamp.empty()) {
        decision.timestamp = options_.clock();
    }
    auto updated = it->second;
    annotate::submit(updated, decision, task_version, catalog_);
    attach_ranking(updated);
    if (!options_.journal.empty()) {
        detail::append_line(options_.journal, decision_to_json(cve_id, decision, task_version));
    }
    it->second = updated;

    if (feedback_ && updated.model_ranking) {
        const auto& latest = updated.adjudication ? *updated.adjudication
                             : updated.round2     ? *updated.round2
                                                  : *updated.round1;
        FeedbackEvent event;
        event.cve_id = cve_id;
        event.model_ranking = *updated.model_ranking;
        event.human_labels = latest.effective;
        event.accepted_top1 = latest.effective && latest.effective->is_single() &&
                              latest.effective->first() == updated.model_ranking->top();
        event.timestamp = decision.timestamp;
        feedback_->append(event);
    }
    return updated;
}

std::vector<corpus::DatasetRow> Workflow::export_final() const {
    std::lock_guard lock(mutex_);
    std::vector<AnnotationTask> tasks;
    tasks.reserve(tasks_.size());
    for (const auto& [id, t] : tasks_) {
        tasks.push_back(t);
    }
    return annotate::export_final(tasks);
}

WorkflowStats Workflow::stats() const {
    auto rows = export_final();
    std::lock_guard lock(mutex_);
    WorkflowStats stats;
    stats.dataset = corpus::dataset_stats(rows);
    for (const auto& a : annotators_) {
        stats.pending_by_annotator[a] = 0;
    }
    for (auto s : {Status::pending_r1, Status::pending_r2, Status::final, Status::conflict,
                   Status::pending_adjudication, Status::excluded}) {
        stats.by_status[std::string(to_string(s))] = 0;
    }
    std::map<std::string, std::set<std::string>> nvd;
    for (const auto& [id, t] : tasks_) {
        if (auto actor = t.expected_actor()) {
            ++stats.pending_by_annotator[*actor];
        }
        ++stats.by_status[std::string(to_string(t.status))];
        if (t.status == Status::pending_adjudication || t.status == Status::conflict) {
            ++stats.conflict_queue;
        }
        nvd[id] = t.record.nvd_labels;
    }
    stats.agreement_with_nvd = agreement_with_nvd(rows, nvd, catalog_);
    return stats;
}

std::size_t Workflow::feedback_events() const {
    std::lock_guard lock(mutex_);
    return feedback_ ? feedback_->size() : 0;
}

}  // namespace cvemap::annotate

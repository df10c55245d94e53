#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvemap/corpus.hpp"
#include "cvemap/error.hpp"
#include "cvemap/rank.hpp"

namespace cvemap::annotate {

enum class Action { agree, relabel, causal, unmappable };
enum class Status { pending_r1, pending_r2, final, conflict, pending_adjudication, excluded };

std::string_view to_string(Action action);
std::string_view to_string(Status status);
Action action_from_string(std::string_view text);
Status status_from_string(std::string_view text);

/// Rejected submissions. The reason maps onto an HTTP status in the API.
class WorkflowError : public Error {
  public:
    enum class Reason { not_found, wrong_actor, stale_version, closed, invalid };

    WorkflowError(Reason reason, const std::string& message) : Error(ErrorKind::usage, message), reason_(reason) {}

    [[nodiscard]] Reason reason() const noexcept { return reason_; }

  private:
    Reason reason_;
};

struct Decision {
    std::string annotator;
    Action action = Action::agree;
    std::optional<corpus::LabelAssignment> labels;
    std::string timestamp;
};

/// A decision together with what it resolved to. `effective` is empty for unmappable.
struct RoundRecord {
    Decision decision;
    std::optional<corpus::LabelAssignment> effective;
};

struct Roles {
    std::string round1;
    std::string round2;
    std::string adjudicator;

    bool operator==(const Roles&) const = default;
};

/// Round-robin over the sorted ids; the round-2 reviewer is the next annotator and the
/// adjudicator the remaining one. Requires exactly three distinct annotators.
std::map<std::string, Roles> assign(std::span<const std::string> cve_ids, std::span<const std::string> annotators);

struct AnnotationTask {
    corpus::CveRecord record;
    Roles roles;
    std::optional<rank::RankedList> model_ranking;
    std::optional<RoundRecord> round1;
    std::optional<RoundRecord> round2;
    std::optional<RoundRecord> adjudication;
    Status status = Status::pending_r1;
    std::uint64_t version = 0;

    /// Who must act next, empty once the task is closed.
    [[nodiscard]] std::optional<std::string> expected_actor() const;
    [[nodiscard]] bool closed() const noexcept { return status == Status::final || status == Status::excluded; }
    /// The agreed or adjudicated labels of a final task.
    [[nodiscard]] std::optional<corpus::LabelAssignment> final_labels() const;
};

/// Applies one decision to a task following the round state machine. Throws WorkflowError
/// for a wrong actor, a stale version, a closed task or an unusable decision.
void submit(AnnotationTask& task, const Decision& decision, std::uint64_t task_version,
            const corpus::Catalog& catalog);

/// Final rows ordered by CVE id.
std::vector<corpus::DatasetRow> export_final(std::span<const AnnotationTask> tasks);

/// Share of rows whose labels are all present in the record's NVD labels. Zero for no rows.
double agreement_with_nvd(std::span<const corpus::DatasetRow> rows,
                          const std::map<std::string, std::set<std::string>>& nvd_labels,
                          const corpus::Catalog& catalog);

struct FeedbackEvent {
    std::string cve_id;
    rank::RankedList model_ranking;
    std::optional<corpus::LabelAssignment> human_labels;
    bool accepted_top1 = false;
    std::string timestamp;
};

/// Append-only JSONL where every line carries the SHA-256 of the previous line's hash and
/// its own content.
class FeedbackLog {
  public:
    explicit FeedbackLog(std::filesystem::path path);

    void append(const FeedbackEvent& event);
    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

    /// Number of events; throws DataError at the first broken link.
    static std::size_t verify(const std::filesystem::path& path);

  private:
    std::filesystem::path path_;
    std::string last_hash_;
    std::size_t count_ = 0;
};

struct WorkflowOptions {
    std::filesystem::path journal;
    std::filesystem::path feedback_log;
    /// Attaches a model ranking to tasks for assistance when set.
    std::function<rank::RankedList(const corpus::CveRecord&)> ranker;
    std::function<std::string()> clock;
};

struct WorkflowStats {
    corpus::DatasetStats dataset;
    std::map<std::string, std::size_t> pending_by_annotator;
    std::map<std::string, std::size_t> by_status;
    std::size_t conflict_queue = 0;
    double agreement_with_nvd = 0.0;

    [[nodiscard]] std::string to_json(const corpus::Catalog& catalog) const;
};

/// The annotation pool shared by all annotators. Every accepted decision is journaled before
/// it is acknowledged; an existing journal is replayed on construction.
class Workflow {
  public:
    Workflow(std::span<const corpus::CveRecord> records, std::vector<std::string> annotators,
             const corpus::Catalog& catalog, WorkflowOptions options = {});

    [[nodiscard]] const std::vector<std::string>& annotators() const noexcept { return annotators_; }
    [[nodiscard]] bool is_annotator(std::string_view id) const;

    /// Lowest-id task waiting for `annotator`.
    std::optional<AnnotationTask> next_task(const std::string& annotator);
    [[nodiscard]] std::optional<AnnotationTask> task(const std::string& cve_id) const;

    AnnotationTask submit(const std::string& cve_id, Decision decision, std::uint64_t task_version);

    [[nodiscard]] std::vector<corpus::DatasetRow> export_final() const;
    [[nodiscard]] WorkflowStats stats() const;
    [[nodiscard]] std::size_t feedback_events() const;
    [[nodiscard]] const corpus::Catalog& catalog() const noexcept { return catalog_; }

  private:
    void replay_journal();
    void attach_ranking(AnnotationTask& task);

    struct IdOrder {
        bool operator()(const std::string& a, const std::string& b) const { return corpus::cve_id_less(a, b); }
    };

    const corpus::Catalog& catalog_;
    std::vector<std::string> annotators_;
    WorkflowOptions options_;
    std::map<std::string, AnnotationTask, IdOrder> tasks_;
    std::optional<FeedbackLog> feedback_;
    mutable std::mutex mutex_;
};

std::string decision_to_json(const std::string& cve_id, const Decision& decision, std::uint64_t task_version);
std::string task_to_json(const AnnotationTask& task, const corpus::Catalog& catalog);

}  // namespace cvemap::annotate

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "cvemap/annotate.hpp"

namespace cvemap::annotate {

struct ServerOptions {
    /// Served under "/" when set, for the browser frontend.
    std::filesystem::path static_dir;
};

/// JSON API over a Workflow:
///   GET  /api/tasks/next?annotator=ID        200 task, 204 nothing pending
///   GET  /api/tasks/{cve_id}
///   POST /api/tasks/{cve_id}/decision         {annotator, action, labels?, task_version}
///   GET  /api/dataset/stats
///   GET  /api/dataset/export?format=csv|jsonl
///   GET  /api/catalog
/// Rejected decisions answer 403 (wrong actor), 409 (stale version or closed task),
/// 400 (malformed) or 404 (unknown task or annotator), each with {"error", "reason"}.
class AnnotationServer {
  public:
    explicit AnnotationServer(Workflow& workflow, ServerOptions options = {});
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port (0 picks one).
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cvemap::annotate

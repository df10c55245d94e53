#include "cvemap/annotate_server.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cvemap/error.hpp"

namespace cvemap::annotate {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, std::string_view reason, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}, {"reason", reason}}.dump(), kJson);
}

void send_workflow_error(httplib::Response& res, const WorkflowError& e) {
    switch (e.reason()) {
        case WorkflowError::Reason::not_found:
            send_error(res, 404, "not_found", e.what());
            break;
        case WorkflowError::Reason::wrong_actor:
            send_error(res, 403, "wrong_actor", e.what());
            break;
        case WorkflowError::Reason::stale_version:
            send_error(res, 409, "stale_version", e.what());
            break;
        case WorkflowError::Reason::closed:
            send_error(res, 409, "closed", e.what());
            break;
        case WorkflowError::Reason::invalid:
            send_error(res, 400, "invalid", e.what());
            break;
    }
}

std::optional<corpus::LabelAssignment> parse_labels_field(const json& body) {
    auto it = body.find("labels");
    if (it == body.end() || it->is_null()) {
        return std::nullopt;
    }
    if (it->is_string()) {
        return corpus::parse_label(it->get<std::string>());
    }
    if (it->is_array()) {
        std::vector<int> chain;
        for (const auto& v : *it) {
            if (!v.is_number_integer()) {
                throw DataError("labels must be integers");
            }
            chain.push_back(v.get<int>());
        }
        return corpus::LabelAssignment(std::move(chain));
    }
    throw DataError("labels must be a string like \"2-25\" or an array of ranks");
}

}  // namespace

struct AnnotationServer::Impl {
    Workflow& workflow;
    ServerOptions options;
    httplib::Server server;
    std::thread thread;

    Impl(Workflow& w, ServerOptions o) : workflow(w), options(std::move(o)) { routes(); }

    void routes() {
        server.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
            const auto annotator = req.get_param_value("annotator");
            if (annotator.empty()) {
                send_error(res, 400, "invalid", "missing annotator parameter");
                return;
            }
            try {
                auto task = workflow.next_task(annotator);
                if (!task) {
                    res.status = 204;
                    return;
                }
                res.set_content(task_to_json(*task, workflow.catalog()), kJson);
            } catch (const WorkflowError& e) {
                send_workflow_error(res, e);
            }
        });

        server.Get(R"(/api/tasks/(CVE-[0-9]+-[0-9]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto task = workflow.task(req.matches[1]);
            if (!task) {
                send_error(res, 404, "not_found", "no task for " + std::string(req.matches[1]));
                return;
            }
            res.set_content(task_to_json(*task, workflow.catalog()), kJson);
        });

        server.Post(R"(/api/tasks/(CVE-[0-9]+-[0-9]+)/decision)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        decide(req.matches[1], req, res);
                    });

        server.Get("/api/dataset/stats", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(workflow.stats().to_json(workflow.catalog()), kJson);
        });

        server.Get("/api/dataset/export", [this](const httplib::Request& req, httplib::Response& res) {
            const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("csv");
            const auto rows = workflow.export_final();
            if (format == "csv") {
                res.set_content(corpus::dataset_to_csv(rows), "text/csv");
            } else if (format == "jsonl") {
                res.set_content(corpus::dataset_to_jsonl(rows), "application/x-ndjson");
            } else {
                send_error(res, 400, "invalid", "format must be csv or jsonl");
            }
        });

        server.Get("/api/catalog", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(workflow.catalog().to_json_text(), kJson);
        });

        if (!options.static_dir.empty()) {
            if (!server.set_mount_point("/", options.static_dir.string())) {
                throw UsageError("static directory " + options.static_dir.string() + " does not exist");
            }
        }
    }

    void decide(const std::string& cve_id, const httplib::Request& req, httplib::Response& res) {
        Decision decision;
        std::uint64_t version = 0;
        try {
            auto body = json::parse(req.body);
            decision.annotator = body.at("annotator").get<std::string>();
            decision.action = action_from_string(body.at("action").get<std::string>());
            decision.labels = parse_labels_field(body);
            version = body.at("task_version").get<std::uint64_t>();
        } catch (const json::exception& e) {
            send_error(res, 400, "invalid", std::string("malformed decision: ") + e.what());
            return;
        } catch (const WorkflowError& e) {
            send_workflow_error(res, e);
            return;
        } catch (const Error& e) {
            send_error(res, 400, "invalid", e.what());
            return;
        }
        if (req.has_header("X-Annotator") && req.get_header_value("X-Annotator") != decision.annotator) {
            send_error(res, 403, "wrong_actor", "X-Annotator header does not match the decision's annotator");
            return;
        }
        try {
            auto task = workflow.submit(cve_id, std::move(decision), version);
            res.set_content(task_to_json(task, workflow.catalog()), kJson);
        } catch (const WorkflowError& e) {
            send_workflow_error(res, e);
        } catch (const Error& e) {
            send_error(res, 500, "internal", e.what());
        }
    }
};

AnnotationServer::AnnotationServer(Workflow& workflow, ServerOptions options)
    : impl_(std::make_unique<Impl>(workflow, std::move(options))) {}

AnnotationServer::~AnnotationServer() {
    stop();
}

int AnnotationServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) {
        throw UpstreamError("cannot bind " + host + ":" + std::to_string(port), false);
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void AnnotationServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw UpstreamError("cannot serve on " + host + ":" + std::to_string(port), false);
    }
}

void AnnotationServer::stop() {
    if (!impl_) {
        return;
    }
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

}  // namespace cvemap::annotate

#include "untangle/annotation_server.hpp"

#include "untangle/error.hpp"

#include <httplib.h>

#include <charconv>

namespace untangle {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, json{{"error", code}, {"message", message}});
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownChange: return 404;
        case ErrorCode::IoFailure: return 500;
        default: return 400;
    }
}

json task_json(const MethodChange& c) {
    return json{{"change_id", c.change_id},
                {"commit_id", c.commit.commit_id},
                {"message", c.commit.message},
                {"timestamp", c.commit.timestamp},
                {"file_path", c.file_path},
                {"signature", c.method_signature},
                {"diff", c.diff_text},
                {"methods_in_commit", c.methods_in_commit},
                {"is_bugfix", c.commit.is_bugfix}};
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
    install_routes();
    if (static_dir && std::filesystem::is_directory(*static_dir)) server_->set_mount_point("/", static_dir->string());
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::install_routes() {
    server_->Get("/api/tasks", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string rater = req.get_param_value("rater");
        if (rater.empty()) return send_error(res, 400, "InvalidArgument", "query parameter 'rater' is required");
        std::size_t limit = 20;
        if (req.has_param("limit")) {
            const std::string raw = req.get_param_value("limit");
            auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), limit);
            if (ec != std::errc() || ptr != raw.data() + raw.size() || limit == 0)
                return send_error(res, 400, "InvalidArgument", "limit must be a positive integer");
        }
        json tasks = json::array();
        for (const auto& c : store_.pending_tasks(rater, limit)) tasks.push_back(task_json(c));
        send_json(res, 200,
                  json{{"rater", rater},
                       {"tasks", std::move(tasks)},
                       {"labeled", store_.labeled_count(rater)},
                       {"total", store_.queue_size()}});
    });

    server_->Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return send_error(res, 400, "ParseFailure", e.what());
        }
        if (!body.is_object()) return send_error(res, 400, "ParseFailure", "body must be a JSON object");
        const auto field = [&](const char* key) -> std::string {
            if (!body.contains(key) || body[key].is_null()) return "";
            return body[key].is_string() ? body[key].get<std::string>() : body[key].dump();
        };
        const std::string change_id = field("change_id");
        const std::string rater_id = field("rater_id");
        if (change_id.empty() || rater_id.empty())
            return send_error(res, 400, "InvalidArgument", "change_id and rater_id are required");
        try {
            auto stored = store_.record_annotation(change_id, rater_id, std::string_view(field("label")), field("note"));
            send_json(res, 200, to_json(stored));
        } catch (const Error& e) {
            send_error(res, status_for(e.code()), std::string(to_string(e.code())), e.what());
        }
    });

    server_->Get("/api/kappa", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string a = req.get_param_value("rater_a");
        const std::string b = req.get_param_value("rater_b");
        if (a.empty() || b.empty())
            return send_error(res, 400, "InvalidArgument", "query parameters 'rater_a' and 'rater_b' are required");
        try {
            send_json(res, 200, to_json(store_.kappa(a, b)));
        } catch (const Error& e) {
            // No commonly labeled changes yet.
            send_error(res, e.code() == ErrorCode::EmptyInput ? 409 : 400, std::string(to_string(e.code())), e.what());
        }
    });

    server_->Get("/api/progress", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string rater = req.get_param_value("rater");
        send_json(res, 200,
                  json{{"rater", rater},
                       {"labeled", rater.empty() ? 0 : store_.labeled_count(rater)},
                       {"total", store_.queue_size()}});
    });

    server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        } catch (...) {
            send_error(res, 500, "Internal", "unknown error");
        }
    });
}

bool AnnotationServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int AnnotationServer::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool AnnotationServer::listen_after_bind() { return server_->listen_after_bind(); }

void AnnotationServer::stop() {
    if (server_) server_->stop();
}

bool AnnotationServer::is_running() const { return server_->is_running(); }

void AnnotationServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace untangle

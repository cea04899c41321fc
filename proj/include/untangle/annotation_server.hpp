#pragma once

#include "untangle/annotation_store.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace untangle {

// JSON API consumed by the annotator UI:
//   GET  /api/tasks?rater=<id>&limit=<n>
//   POST /api/labels   {change_id, rater_id, label, note}
//   GET  /api/kappa?rater_a=<id>&rater_b=<id>
//   GET  /api/progress?rater=<id>
// plus an optional static mount at "/" for the built UI.
class AnnotationServer {
public:
    explicit AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~AnnotationServer();

    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    // Blocks until stop(). Returns false when the address cannot be bound.
    bool listen(const std::string& host, int port);

    // Binds an ephemeral port and returns it (-1 on failure); serve with
    // listen_after_bind() on another thread.
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();

    void stop();
    bool is_running() const;
    void wait_until_ready() const;

private:
    void install_routes();

    AnnotationStore& store_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace untangle

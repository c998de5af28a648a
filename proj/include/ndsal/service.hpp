#pragma once

#include "ndsal/session.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace ndsal {

struct HttpResponse {
    int status = 200;
    std::string body;  // JSON
};

// Routes annotation requests to sessions stored as <session-dir>/<id>/.
// Sessions are opened lazily (replaying their event log) and kept resident;
// each has its own mutex, so submissions to one session are serialized while
// different sessions proceed concurrently.
//
//   GET  /session/{id}/batch
//   POST /session/{id}/labels     {"labels": {"<id>": <class> | "skip"}}
//   GET  /session/{id}/progress
//   POST /session/{id}            session.kv text; creates the session
class AnnotationService {
public:
    explicit AnnotationService(std::filesystem::path session_dir);

    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

    HttpResponse get_batch(const std::string& id);
    HttpResponse post_labels(const std::string& id, const std::string& body);
    HttpResponse get_progress(const std::string& id);
    HttpResponse create_session(const std::string& id, const std::string& body);

private:
    struct Slot {
        std::mutex mutex;
        std::optional<Session> session;
    };
    std::shared_ptr<Slot> slot(const std::string& id);

    std::filesystem::path root_;
    std::mutex slots_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

nlohmann::json to_json(const AnnotationBatch& batch);
nlohmann::json to_json(const Progress& progress);
nlohmann::json to_json(const SubmitResult& result);

// HTTP front end for an AnnotationService.
class HttpServer {
public:
    explicit HttpServer(AnnotationService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    // Blocks until stop() is called from another thread.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Binds host:port and serves until the process is stopped.
void serve(AnnotationService& service, const std::string& host, int port);

}  // namespace ndsal

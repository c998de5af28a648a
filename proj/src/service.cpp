#include "ndsal/service.hpp"

#include "ndsal/error.hpp"

#include <regex>

#include "httplib.h"

namespace ndsal {

namespace {

HttpResponse error_response(int status, std::string_view kind, const std::string& message) {
    nlohmann::json body;
    body["error"] = kind;
    body["message"] = message;
    return {status, body.dump()};
}

bool valid_session_id(const std::string& id) {
    static const std::regex pattern("[A-Za-z0-9_-]{1,64}");
    return std::regex_match(id, pattern);
}

template <typename F>
HttpResponse guarded(F&& f) {
    try {
        return f();
    } catch (const NotFound& e) {
        return error_response(404, e.kind(), e.what());
    } catch (const Error& e) {
        return error_response(std::string_view(e.kind()) == "invalid_argument" || std::string_view(e.kind()) == "format" ? 400 : 500, e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "format", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

}  // namespace

nlohmann::json to_json(const AnnotationBatch& batch) {
    nlohmann::json out;
    out["batch_id"] = batch.batch_id;
    out["cycle"] = batch.cycle;
    out["samples"] = nlohmann::json::array();
    for (const BatchSample& s : batch.samples) {
        out["samples"].push_back({{"id", s.id}, {"text", s.text}, {"status", std::string(status_name(s.status))}});
    }
    out["class_names"] = batch.class_names;
    return out;
}

nlohmann::json to_json(const Progress& p) {
    nlohmann::json progress;
    progress["labeled"] = p.labeled;
    progress["budget"] = p.budget;
    if (p.f1_history) progress["f1_history"] = *p.f1_history;
    if (p.alpha) progress["alpha"] = *p.alpha;
    progress["cutoff_multipliers"] = p.cutoff_multipliers;
    progress["cycle"] = p.cycle;
    progress["finished"] = p.finished;
    return {{"progress", progress}};
}

nlohmann::json to_json(const SubmitResult& r) {
    nlohmann::json out;
    out["accepted"] = r.accepted;
    out["rejected"] = nlohmann::json::array();
    for (const auto& [id, reason] : r.rejected) out["rejected"].push_back({{"id", id}, {"reason", reason}});
    out["batch_complete"] = r.batch_complete;
    out["cycle"] = r.cycle;
    return out;
}

AnnotationService::AnnotationService(std::filesystem::path session_dir) : root_(std::move(session_dir)) {}

std::shared_ptr<AnnotationService::Slot> AnnotationService::slot(const std::string& id) {
    if (!valid_session_id(id)) throw NotFound("unknown session " + id);
    std::lock_guard lock(slots_mutex_);
    auto& s = slots_[id];
    if (!s) s = std::make_shared<Slot>();
    return s;
}

HttpResponse AnnotationService::get_batch(const std::string& id) {
    return guarded([&] {
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (!s->session) s->session = Session::open(root_ / id);
        return HttpResponse{200, to_json(s->session->batch()).dump()};
    });
}

HttpResponse AnnotationService::post_labels(const std::string& id, const std::string& body) {
    return guarded([&] {
        const auto request = nlohmann::json::parse(body);
        if (!request.is_object() || !request.contains("labels") || !request["labels"].is_object()) {
            throw FormatError("body must be {\"labels\": {\"<id>\": <class> | \"skip\"}}");
        }
        LabelSubmission labels;
        std::vector<std::pair<std::string, std::string>> malformed;
        for (const auto& [key, value] : request["labels"].items()) {
            if (value.is_number_integer()) {
                labels[key] = value.get<ClassLabel>();
            } else if (value.is_string() && value.get<std::string>() == "skip") {
                labels[key] = std::nullopt;
            } else {
                malformed.emplace_back(key, "label must be a class index or \"skip\"");
            }
        }
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (!s->session) s->session = Session::open(root_ / id);
        SubmitResult result = s->session->submit(labels);
        result.rejected.insert(result.rejected.end(), malformed.begin(), malformed.end());
        nlohmann::json out = to_json(result);
        out.update(to_json(s->session->progress()));
        return HttpResponse{200, out.dump()};
    });
}

HttpResponse AnnotationService::get_progress(const std::string& id) {
    return guarded([&] {
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (!s->session) s->session = Session::open(root_ / id);
        return HttpResponse{200, to_json(s->session->progress()).dump()};
    });
}

HttpResponse AnnotationService::create_session(const std::string& id, const std::string& body) {
    return guarded([&] {
        if (!valid_session_id(id)) throw InvalidArgument("session ids use [A-Za-z0-9_-], at most 64 characters");
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (s->session || std::filesystem::exists(root_ / id / "session.kv")) {
            return error_response(409, "conflict", "session " + id + " already exists");
        }
        s->session = Session::create(root_ / id, SessionConfig::parse(body));
        return HttpResponse{201, to_json(s->session->progress()).dump()};
    });
}

HttpResponse AnnotationService::handle(const std::string& method, const std::string& path, const std::string& body) {
    static const std::regex route("/session/([^/]+)(/(batch|labels|progress))?/?");
    std::smatch m;
    if (!std::regex_match(path, m, route)) return error_response(404, "not_found", "no route for " + path);
    const std::string id = m[1];
    const std::string action = m[3];
    if (action == "batch" && method == "GET") return get_batch(id);
    if (action == "labels" && method == "POST") return post_labels(id, body);
    if (action == "progress" && method == "GET") return get_progress(id);
    if (action.empty() && method == "POST") return create_session(id, body);
    return error_response(405, "method_not_allowed", method + " " + path);
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>()) {
    auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
        res.set_header("Access-Control-Allow-Origin", "*");
    };
    auto& server = impl_->server;
    server.Get(R"(/session/.*)", dispatch);
    server.Post(R"(/session/.*)", dispatch);
    server.Options(R"(/session/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    auto& server = impl_->server;
    if (port == 0) {
        const int bound = server.bind_to_any_port(host);
        if (bound < 0) throw InvalidArgument("cannot bind " + host);
        return bound;
    }
    if (!server.bind_to_port(host, port)) throw InvalidArgument("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    impl_->server.wait_until_ready();
    impl_->server.stop();
}

void serve(AnnotationService& service, const std::string& host, int port) {
    HttpServer server(service);
    server.bind(host, port);
    server.listen();
}

}  // namespace ndsal

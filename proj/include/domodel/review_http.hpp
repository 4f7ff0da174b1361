#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "domodel/exporters.hpp"
#include "domodel/review.hpp"

namespace domodel {

inline constexpr const char* kVersionHeader = "X-Model-Version";

/// HTTP+JSON front of a ReviewService. Static UI files are served from
/// `ui_dir` when one is given.
class ReviewServer {
public:
    explicit ReviewServer(ReviewService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt)
        : service_(service) {
        // No SO_REUSEPORT: a port held by another listener must fail to bind.
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        routes();
        if (ui_dir && std::filesystem::is_directory(*ui_dir)) server_.set_mount_point("/", ui_dir->string());
    }

    bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
    int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }
    bool is_running() const { return server_.is_running(); }

private:
    using Req = httplib::Request;
    using Res = httplib::Response;

    static void send_json(Res& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(2) + "\n", "application/json");
    }

    static void send_error(Res& res, int status, const std::string& message) {
        send_json(res, status, {{"error", message}});
    }

    static void send_model(Res& res, const std::pair<DomainModel, int>& m) {
        res.set_header(kVersionHeader, std::to_string(m.second));
        auto body = model_with_ids(m.first);
        body["version"] = m.second;
        send_json(res, 200, body);
    }

    static std::optional<int> expected_version(const Req& req) {
        if (!req.has_header(kVersionHeader)) return std::nullopt;
        try {
            return std::stoi(req.get_header_value(kVersionHeader));
        } catch (const std::exception&) {
            throw SchemaError(std::string(kVersionHeader) + " is not a number");
        }
    }

    static nlohmann::json body_json(const Req& req) {
        if (req.body.empty()) return nlohmann::json::object();
        try {
            return nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            throw FormatError("request body is not valid JSON");
        }
    }

    /// Maps library errors onto status codes.
    template <class Fn>
    static void guarded(Res& res, Fn&& fn) {
        try {
            fn();
        } catch (const NotFound& e) {
            send_error(res, 404, e.what());
        } catch (const VersionConflict& e) {
            send_error(res, 409, e.what());
        } catch (const InvalidTransition& e) {
            send_error(res, 422, e.what());
        } catch (const UpstreamFailure& e) {
            send_error(res, 502, e.what());
        } catch (const FormatError& e) {
            send_error(res, 400, e.what());
        } catch (const SchemaError& e) {
            send_error(res, 400, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    }

    void routes() {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Headers", std::string("Content-Type, ") + kVersionHeader},
                                     {"Access-Control-Expose-Headers", kVersionHeader},
                                     {"Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS"}});
        server_.Options(R"(.*)", [](const Req&, Res& res) { res.status = 204; });

        server_.Get("/health", [](const Req&, Res& res) { res.set_content("ok", "text/plain"); });

        server_.Get("/projects", [this](const Req&, Res& res) {
            guarded(res, [&] {
                nlohmann::json out = nlohmann::json::array();
                for (const auto& p : service_.list_projects()) out.push_back(to_json(p));
                send_json(res, 200, out);
            });
        });

        server_.Post("/projects", [this](const Req& req, Res& res) {
            guarded(res, [&] {
                auto body = body_json(req);
                if (!body.is_object() || !body.contains("name") || !body.contains("description") ||
                    !body["name"].is_string() || !body["description"].is_string())
                    throw SchemaError("expected {\"name\": string, \"description\": string}");
                auto p = service_.create_project(body["name"].get<std::string>(),
                                                 body["description"].get<std::string>());
                send_json(res, 201, to_json(p));
            });
        });

        server_.Get("/projects/:id", [this](const Req& req, Res& res) {
            guarded(res, [&] { send_json(res, 200, to_json(service_.project(req.path_params.at("id")))); });
        });

        server_.Post("/projects/:id/generate", [this](const Req& req, Res& res) {
            guarded(res, [&] {
                auto body = body_json(req);
                auto overrides = body.contains("config") ? body["config"] : body;
                send_model(res, service_.generate(req.path_params.at("id"), overrides, expected_version(req)));
            });
        });

        server_.Get("/projects/:id/model", [this](const Req& req, Res& res) {
            guarded(res, [&] { send_model(res, service_.model(req.path_params.at("id"))); });
        });

        server_.Patch("/projects/:id/elements/:element", [this](const Req& req, Res& res) {
            guarded(res, [&] {
                auto body = body_json(req);
                if (!body.is_object() || !body.contains("status") || !body["status"].is_string())
                    throw InvalidTransition("expected {\"status\": \"accepted\" | \"rejected\"}");
                send_model(res, service_.set_status(req.path_params.at("id"), req.path_params.at("element"),
                                                    body["status"].get<std::string>(), expected_version(req)));
            });
        });

        server_.Post("/projects/:id/regenerate", [this](const Req& req, Res& res) {
            guarded(res, [&] {
                auto body = body_json(req);
                const std::string task = body.value("task", "");
                auto t = parse_regenerate_task(task);
                if (!t) throw InvalidTransition("task must be classes, assoc or inherit");
                send_model(res, service_.regenerate(req.path_params.at("id"), *t, expected_version(req)));
            });
        });

        server_.Get("/projects/:id/export", [this](const Req& req, Res& res) {
            guarded(res, [&] {
                const std::string format = req.has_param("format") ? req.get_param_value("format") : "canonical";
                const std::string only = req.has_param("accepted_only") ? req.get_param_value("accepted_only") : "false";
                if (only != "true" && only != "false") throw SchemaError("accepted_only must be true or false");
                auto [model, version] = service_.model(req.path_params.at("id"));
                res.set_header(kVersionHeader, std::to_string(version));
                if (format == "canonical") {
                    res.set_content(export_canonical(only == "true" ? accepted_only(model) : model), "application/json");
                } else if (format == "plantuml") {
                    res.set_content(to_plantuml(model, only == "true"), "text/plain");
                } else {
                    throw SchemaError("format must be canonical or plantuml");
                }
            });
        });
    }

    ReviewService& service_;
    httplib::Server server_;
};

}  // namespace domodel

#pragma once

// JSON-over-HTTP front of a ReviewStore. Writes go through
// ReviewStore::apply_decision, which serializes them; reads take a shared
// lock and never wait on a journal fsync.

#include <atomic>
#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rapidner/error.hpp"
#include "rapidner/review.hpp"

namespace rapidner::review {

namespace http_detail {

inline nlohmann::json summary(const ReviewRecord& r) {
  return {{"sent_id", r.sent_id()},
          {"text", r.sentence.text},
          {"source", to_string(r.sentence.source)},
          {"entity_type_hint", r.sentence.entity_type_hint ? nlohmann::json(*r.sentence.entity_type_hint)
                                                            : nlohmann::json()},
          {"spans", r.current_spans},
          {"conflicts", r.conflicts},
          {"status", to_string(r.status)},
          {"revision", r.revision}};
}

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                       nlohmann::json extra = nlohmann::json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

inline std::optional<std::size_t> size_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const std::string v = req.get_param_value(name);
  std::size_t value = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument(std::string(name) + " must be a non-negative integer");
  return value;
}

}  // namespace http_detail

// Parses "host:port"; a bare port binds 127.0.0.1.
inline std::pair<std::string, int> parse_bind(const std::string& bind) {
  auto colon = bind.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : bind.substr(0, colon);
  std::string port = colon == std::string::npos ? bind : bind.substr(colon + 1);
  int p = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
  if (ec != std::errc() || ptr != port.data() + port.size() || p < 0 || p > 65535)
    throw InvalidArgument("bad bind address " + bind);
  return {host.empty() ? "127.0.0.1" : host, p};
}

class ReviewServer {
 public:
  static constexpr std::size_t kDefaultLimit = 50;
  static constexpr std::size_t kMaxLimit = 1000;

  explicit ReviewServer(ReviewStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt)
      : store_(store) {
    // httplib's default adds SO_REUSEPORT, which would let a second server
    // share the port instead of failing to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    routes();
    if (static_dir && std::filesystem::is_directory(*static_dir)) server_.set_mount_point("/", static_dir->string());
  }

  ~ReviewServer() { stop(); }

  // Binds and starts serving on a background thread. Port 0 picks a free
  // port; port() reports it.
  void start(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw BindFailure(host + ":0");
    } else {
      if (!server_.bind_to_port(host, port)) throw BindFailure(host + ":" + std::to_string(port));
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  // Blocks serving requests until stop() is called from elsewhere.
  void run(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) throw BindFailure(host + ":" + std::to_string(port));
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  void routes() {
    using http_detail::send_error;
    using http_detail::send_json;

    server_.Get("/api/sentences", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        std::optional<Status> status;
        if (req.has_param("status") && !req.get_param_value("status").empty())
          status = parse_status(req.get_param_value("status"));
        std::optional<std::string> type;
        if (req.has_param("type") && !req.get_param_value("type").empty()) type = req.get_param_value("type");
        std::size_t offset = http_detail::size_param(req, "offset").value_or(0);
        std::size_t limit = std::min(http_detail::size_param(req, "limit").value_or(kDefaultLimit), kMaxLimit);
        auto [page, total] = store_.list(status, type, offset, limit);
        nlohmann::json items = nlohmann::json::array();
        for (const auto& r : page) items.push_back(http_detail::summary(r));
        send_json(res, 200, {{"total", total}, {"offset", offset}, {"limit", limit}, {"items", items}});
      } catch (const Error& e) {
        send_error(res, 400, e.code(), e.what());
      }
    });

    server_.Get(R"(/api/sentences/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto r = store_.get(id);
      if (!r) return send_error(res, 404, "UnknownSentence", "unknown sentence " + id);
      send_json(res, 200, nlohmann::json(*r));
    });

    server_.Post(R"(/api/sentences/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      std::string annotator;
      std::uint64_t revision = 0;
      Action action;
      try {
        auto body = nlohmann::json::parse(req.body);
        annotator = body.at("annotator_id").get<std::string>();
        revision = body.at("revision").get<std::uint64_t>();
        action = body.get<Action>();
      } catch (const nlohmann::json::exception& e) {
        return send_error(res, 400, "BadRequest", e.what());
      } catch (const Error& e) {
        return send_error(res, 400, e.code(), e.what());
      }
      try {
        auto updated = store_.apply_decision(id, annotator, revision, action);
        send_json(res, 200, nlohmann::json(updated));
      } catch (const UnknownSentence& e) {
        send_error(res, 404, e.code(), e.what());
      } catch (const StaleRevision& e) {
        send_error(res, 409, e.code(), e.what(), {{"current_revision", e.current()}});
      } catch (const IoError& e) {
        send_error(res, 500, e.code(), e.what());
      } catch (const Error& e) {
        send_error(res, 422, e.code(), e.what());
      }
    });

    server_.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      auto p = store_.progress();
      auto counts = [](const std::map<Status, std::size_t>& m) {
        nlohmann::json j = nlohmann::json::object();
        for (auto s : {Status::kPending, Status::kAccepted, Status::kCorrected, Status::kSkipped}) {
          auto it = m.find(s);
          j[std::string(to_string(s))] = it == m.end() ? 0 : it->second;
        }
        return j;
      };
      nlohmann::json by_type = nlohmann::json::object();
      for (const auto& [type, m] : p.by_type) by_type[type] = counts(m);
      send_json(res, 200, {{"total", p.total}, {"by_status", counts(p.by_status)}, {"by_type", by_type}});
    });

    server_.Get("/api/types", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json types = nlohmann::json::array();
      for (const auto& t : store_.types())
        types.push_back({{"name", t.name}, {"display", t.display}, {"color", t.color}});
      send_json(res, 200, {{"types", types}});
    });
  }

  ReviewStore& store_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace rapidner::review

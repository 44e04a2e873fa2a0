#pragma once

#include <atomic>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mls/session.hpp"

namespace mls {

nlohmann::json to_json(const ViewTree& tree);
nlohmann::json to_json(const SourceSpan& span);
nlohmann::json to_json(const Diagnostic& d);
nlohmann::json to_json(const TextEdit& e);

/// One client connection: a session plus the newline-delimited JSON
/// envelope {id, kind, payload}. Requests are handled strictly in order.
class ProtocolConnection {
 public:
  explicit ProtocolConnection(SessionOptions options);

  /// Handles one input line and returns the output lines, in order.
  std::vector<std::string> handle_line(std::string_view line);

  [[nodiscard]] const Session* session() const { return session_.get(); }

 private:
  using Out = std::vector<nlohmann::json>;

  void handle_open(std::int64_t id, const nlohmann::json& payload, Out& out);
  void handle_change(std::int64_t id, const nlohmann::json& payload, Out& out);
  void handle_event(std::int64_t id, const nlohmann::json& payload, Out& out);
  void handle_close(std::int64_t id, Out& out);
  void announce(std::int64_t id, Out& out);
  Session& require_session();

  SessionOptions options_;
  std::unique_ptr<Session> session_;
};

/// Serves one connection over a pair of streams until end of input.
void serve_stream(std::istream& in, std::ostream& out, const SessionOptions& options);

/// Listens on `host:port` and serves each accepted connection on its own
/// thread. Returns when `stop` becomes true (checked between accepts) or on
/// a socket error. `on_listening` receives the bound port.
int serve_tcp(const std::string& host, int port, const SessionOptions& options, const std::atomic<bool>* stop = nullptr,
              const std::function<void(int)>& on_listening = {});

}  // namespace mls

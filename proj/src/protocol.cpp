#include "mls/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <iostream>
#include <thread>

namespace mls {

using nlohmann::json;

json to_json(const SourceSpan& span) { return {{"start", span.start}, {"end", span.end}}; }

json to_json(const ViewTree& tree) {
  json children = json::array();
  for (const auto& c : tree.children) children.push_back(to_json(c));
  return {{"tag", tree.tag}, {"attrs", tree.attrs}, {"handlers", tree.handlers}, {"children", std::move(children)}};
}

json to_json(const Diagnostic& d) {
  return {{"span", to_json(d.span)}, {"severity", d.severity}, {"message", d.message}};
}

json to_json(const TextEdit& e) {
  return {{"span", to_json(e.span)}, {"replacement", e.replacement}, {"base_version", e.base_version}};
}

namespace {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json envelope(std::int64_t id, const char* kind, json payload) {
  return {{"id", id}, {"kind", kind}, {"payload", std::move(payload)}};
}

json error_message(std::int64_t id, const std::string& message) {
  return envelope(id, "error", {{"message", message}});
}

const json& field(const json& obj, const char* name) {
  if (!obj.is_object() || !obj.contains(name)) throw ProtocolError(std::string("missing field ") + name);
  return obj.at(name);
}

std::string string_field(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_string()) throw ProtocolError(std::string("field ") + name + " must be a string");
  return v.get<std::string>();
}

std::uint64_t uint_field(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ProtocolError(std::string("field ") + name + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

SourceSpan span_field(const json& obj, const char* name) {
  const json& s = field(obj, name);
  return {uint_field(s, "start"), uint_field(s, "end")};
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

ProtocolConnection::ProtocolConnection(SessionOptions options) : options_(std::move(options)) {}

Session& ProtocolConnection::require_session() {
  if (!session_) throw ProtocolError("no open document");
  return *session_;
}

void ProtocolConnection::announce(std::int64_t id, Out& out) {
  const Session& s = *session_;
  json list = json::array();
  for (const auto& i : s.instances()) {
    list.push_back({{"instance_id", i.instance.instance_id},
                    {"span", to_json(i.instance.span)},
                    {"extension_ref", i.instance.extension_ref.str()},
                    {"state_text", i.instance.state_text}});
  }
  out.push_back(envelope(id, "instances", {{"version", s.version()}, {"instances", std::move(list)}}));
  for (const auto& i : s.instances()) {
    out.push_back(envelope(0, "view", {{"instance_id", i.instance.instance_id}, {"tree", to_json(i.view)}}));
  }
  json diags = json::array();
  for (const auto& d : s.diagnostics()) diags.push_back(to_json(d));
  out.push_back(envelope(0, "diagnostics", {{"diagnostics", std::move(diags)}}));
}

void ProtocolConnection::handle_open(std::int64_t id, const json& payload, Out& out) {
  std::string text = string_field(payload, "text");
  std::uint64_t version = payload.contains("version") ? uint_field(payload, "version") : 0;
  session_ = std::make_unique<Session>(options_);
  session_->open(std::move(text), version);
  announce(id, out);
}

void ProtocolConnection::handle_change(std::int64_t id, const json& payload, Out& out) {
  Session& s = require_session();
  if (payload.contains("text")) {
    s.open(string_field(payload, "text"), payload.contains("version") ? uint_field(payload, "version") : s.version() + 1);
  } else {
    TextEdit edit{span_field(payload, "span"), string_field(payload, "replacement"), uint_field(payload, "base_version")};
    s.apply_edit(edit);
  }
  announce(id, out);
}

void ProtocolConnection::handle_event(std::int64_t id, const json& payload, Out& out) {
  Session& s = require_session();
  UiEvent ev;
  ev.instance_id = string_field(payload, "instance_id");
  ev.handler_id = string_field(payload, "handler_id");
  if (payload.contains("payload")) {
    const json& p = payload.at("payload");
    if (!p.is_object()) throw ProtocolError("event payload must be an object");
    for (const auto& [k, v] : p.items()) ev.payload[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  DispatchResult r = s.dispatch_event(ev);
  if (!r.accepted) {
    std::string message = r.diagnostics.empty() ? "event rejected" : r.diagnostics.front().message;
    out.push_back(error_message(id, message));
    return;
  }
  if (r.edit) {
    out.push_back(envelope(0, "edit", to_json(*r.edit)));
    s.apply_edit(*r.edit);
  }
  if (!r.diagnostics.empty()) {
    json diags = json::array();
    for (const auto& d : r.diagnostics) diags.push_back(to_json(d));
    out.push_back(envelope(0, "diagnostics", {{"diagnostics", std::move(diags)}}));
  }
  const InstanceState* now = s.find(ev.instance_id);
  const ViewTree& tree = now ? now->view : r.view;
  out.push_back(envelope(id, "view", {{"instance_id", ev.instance_id}, {"tree", to_json(tree)}}));
}

void ProtocolConnection::handle_close(std::int64_t id, Out& out) {
  session_.reset();
  out.push_back(envelope(id, "instances", {{"version", 0}, {"instances", json::array()}}));
}

std::vector<std::string> ProtocolConnection::handle_line(std::string_view line) {
  Out out;
  std::int64_t id = 0;
  try {
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("parse error: ") + e.what());
    }
    if (!msg.is_object()) throw ProtocolError("message must be a JSON object");
    if (msg.contains("id")) {
      if (!msg.at("id").is_number_integer()) throw ProtocolError("id must be an integer");
      id = msg.at("id").get<std::int64_t>();
    }
    std::string kind = string_field(msg, "kind");
    json payload = msg.contains("payload") ? msg.at("payload") : json::object();
    if (kind == "open") {
      handle_open(id, payload, out);
    } else if (kind == "change") {
      handle_change(id, payload, out);
    } else if (kind == "event") {
      handle_event(id, payload, out);
    } else if (kind == "close") {
      handle_close(id, out);
    } else {
      throw ProtocolError("unknown message kind " + kind);
    }
  } catch (const std::exception& e) {
    out.clear();
    out.push_back(error_message(id, e.what()));
  }
  std::vector<std::string> lines;
  lines.reserve(out.size());
  for (const auto& j : out) lines.push_back(dump(j));
  return lines;
}

void serve_stream(std::istream& in, std::ostream& out, const SessionOptions& options) {
  ProtocolConnection conn(options);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    for (const auto& l : conn.handle_line(line)) out << l << '\n';
    out.flush();
  }
}

namespace {

void serve_socket(int fd, SessionOptions options) {
  ProtocolConnection conn(std::move(options));
  std::string pending;
  char buf[4096];
  for (;;) {
    ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = pending.find('\n')) != std::string::npos) {
      std::string line = pending.substr(0, nl);
      pending.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::string reply;
      for (const auto& l : conn.handle_line(line)) reply += l + "\n";
      std::size_t sent = 0;
      while (sent < reply.size()) {
        ssize_t w = ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
        if (w <= 0) {
          ::close(fd);
          return;
        }
        sent += static_cast<std::size_t>(w);
      }
    }
  }
  ::close(fd);
}

}  // namespace

int serve_tcp(const std::string& host, int port, const SessionOptions& options, const std::atomic<bool>* stop,
              const std::function<void(int)>& on_listening) {
  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) {
    std::cerr << "socket: " << std::strerror(errno) << '\n';
    return 1;
  }
  int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    std::cerr << "invalid listen address " << host << '\n';
    ::close(listener);
    return 1;
  }
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 16) < 0) {
    std::cerr << "listen " << h << ":" << port << ": " << std::strerror(errno) << '\n';
    ::close(listener);
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));
  while (!stop || !stop->load()) {
    pollfd p{listener, POLLIN, 0};
    int ready = ::poll(&p, 1, 100);
    if (ready < 0 && errno != EINTR) break;
    if (ready <= 0) continue;
    int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) continue;
    std::thread(serve_socket, fd, options).detach();
  }
  ::close(listener);
  return 0;
}

}  // namespace mls

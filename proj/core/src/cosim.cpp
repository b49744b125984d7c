#include "meltpool/cosim.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace meltpool {

using nlohmann::json;

std::string config_hash(const MpcConfig& cfg) {
  const std::string text = json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CosimSession::CosimSession(std::shared_ptr<const DynModel> model, MpcConfig cfg)
    : controller_(std::move(model), cfg), hash_(config_hash(cfg)) {}

std::string CosimSession::error(const std::string& code, const std::string& message) {
  ++summary_.errors;
  return json{{"kind", "error"}, {"code", code}, {"message", message}}.dump();
}

std::string CosimSession::handle_line(const std::string& line) {
  if (summary_.closed) return error("no-session", "session is closed");
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::parse_error& e) {
    return error("parse", e.what());
  }
  if (!msg.is_object() || !msg.contains("kind") || !msg["kind"].is_string())
    return error("bad-request", "message needs a string 'kind'");
  const std::string kind = msg["kind"];

  if (kind == "hello") {
    const std::string version = msg.value("version", std::string{});
    if (version != kCosimVersion) {
      summary_.closed = true;
      summary_.refusal = "version-mismatch";
      return error("version-mismatch", "server speaks " + std::string(kCosimVersion));
    }
    if (msg.contains("config_hash") && msg["config_hash"] != hash_) {
      summary_.closed = true;
      summary_.refusal = "config-mismatch";
      return error("config-mismatch", "server config hash is " + hash_);
    }
    summary_.accepted = true;
    controller_.reset();
    have_step_ = false;
    return json{{"kind", "hello-ack"}, {"version", kCosimVersion}, {"config_hash", hash_}}.dump();
  }
  if (kind == "bye") {
    summary_.closed = true;
    return json{{"kind", "bye"}, {"observed", summary_.observations}}.dump();
  }
  if (kind != "observe") return error("bad-request", "unknown kind '" + kind + "'");
  if (!summary_.accepted) return error("no-session", "send hello first");
  if (!msg.contains("k") || !msg["k"].is_number_integer() || !msg.contains("x") || !msg["x"].is_number() ||
      !msg.contains("T") || !msg["T"].is_number())
    return error("bad-request", "observe needs integer k and numeric x, T");
  const auto k = msg["k"].get<std::int64_t>();
  if (have_step_ && k <= last_step_)
    return error("out-of-order", "step " + std::to_string(k) + " after " + std::to_string(last_step_));
  const double x = msg["x"].get<double>();
  const double t = msg["T"].get<double>();
  ControlOutput out;
  try {
    out = controller_.step(x, t);
  } catch (const std::exception& e) {
    return error("bad-request", e.what());
  }
  have_step_ = true;
  last_step_ = k;
  ++summary_.observations;
  return json{{"kind", "control"}, {"k", k},          {"p", out.power},
              {"v", out.speed},    {"status", to_string(out.status)}, {"iters", out.iterations}}
      .dump();
}

CosimSummary cosim_serve_stream(std::istream& in, std::ostream& out, std::shared_ptr<const DynModel> model,
                                const MpcConfig& cfg) {
  CosimSession session(std::move(model), cfg);
  std::string line;
  while (!session.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << session.handle_line(line) << '\n' << std::flush;
  }
  return session.summary();
}

namespace {

struct Fd {
  int fd = -1;
  explicit Fd(int f) : fd(f) {}
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
};

bool send_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

CosimSummary cosim_serve_tcp(int port, std::shared_ptr<const DynModel> model, const MpcConfig& cfg,
                             const std::function<void(int)>& on_listen) {
  CosimSession session(std::move(model), cfg);
  Fd server(::socket(AF_INET, SOCK_STREAM, 0));
  if (server.fd < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(server.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(server.fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
    throw std::runtime_error(std::string("bind: ") + std::strerror(errno));
  if (::listen(server.fd, 1) < 0) throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof addr;
  ::getsockname(server.fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listen) on_listen(ntohs(addr.sin_port));

  Fd client(::accept(server.fd, nullptr, nullptr));
  if (client.fd < 0) throw std::runtime_error(std::string("accept: ") + std::strerror(errno));
  std::string buffer;
  char chunk[4096];
  while (!session.closed()) {
    const ssize_t n = ::recv(client.fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while (!session.closed() && (pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!send_all(client.fd, session.handle_line(line) + "\n")) return session.summary();
    }
  }
  return session.summary();
}

}  // namespace meltpool

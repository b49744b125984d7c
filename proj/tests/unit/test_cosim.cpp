#include <future>
#include <sstream>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "meltpool/cosim.hpp"

using namespace meltpool;
using nlohmann::json;

namespace {

std::string hello(const MpcConfig& cfg) {
  return json{{"kind", "hello"}, {"version", kCosimVersion}, {"config_hash", config_hash(cfg)}}.dump();
}

std::string observe(int k, double x, double t) { return json{{"kind", "observe"}, {"k", k}, {"x", x}, {"T", t}}.dump(); }

}  // namespace

TEST(Cosim, ConfigHashIsStableAndSensitive) {
  MpcConfig a;
  EXPECT_EQ(config_hash(a), config_hash(MpcConfig{}));
  EXPECT_EQ(config_hash(a).size(), 16u);
  MpcConfig b;
  b.q = 2.0;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Cosim, SessionMatchesDirectController) {
  MpcConfig cfg;
  cfg.k_d = 0.5;
  CosimSession s(fixtures::synthetic_model(), cfg);
  MpcController direct(fixtures::synthetic_model(), cfg);
  auto ack = json::parse(s.handle_line(hello(cfg)));
  EXPECT_EQ(ack["kind"], "hello-ack");
  double x = 0.002;
  for (int k = 0; k < 10; ++k) {
    const double t = 380.0 + 5 * k;
    auto r = json::parse(s.handle_line(observe(k, x, t)));
    const auto d = direct.step(x, t);
    ASSERT_EQ(r["kind"], "control");
    EXPECT_EQ(r["k"], k);
    EXPECT_EQ(r["p"].get<double>(), d.power);
    EXPECT_EQ(r["v"].get<double>(), d.speed);
    x = fixtures::synthetic_plant(x, t, d.power, d.speed);
  }
  auto bye = json::parse(s.handle_line(R"({"kind":"bye"})"));
  EXPECT_EQ(bye["observed"], 10);
  EXPECT_TRUE(s.closed());
}

TEST(Cosim, ErrorCodes) {
  MpcConfig cfg;
  CosimSession s(fixtures::synthetic_model(), cfg);
  auto code = [&](const std::string& line) { return json::parse(s.handle_line(line)).value("code", std::string{}); };
  EXPECT_EQ(code("{not json"), "parse");
  EXPECT_EQ(code(R"({"k":1})"), "bad-request");
  EXPECT_EQ(code(observe(0, 0.002, 400)), "no-session");
  EXPECT_EQ(code(hello(cfg)), "");
  EXPECT_EQ(code(R"({"kind":"observe","k":1,"x":"a","T":400})"), "bad-request");
  EXPECT_EQ(code(observe(5, 0.002, 400)), "");
  EXPECT_EQ(code(observe(5, 0.002, 400)), "out-of-order");
  EXPECT_EQ(code(observe(4, 0.002, 400)), "out-of-order");
  EXPECT_EQ(code(observe(6, 0.002, 400)), "");
  EXPECT_EQ(s.summary().observations, 2);
}

TEST(Cosim, RefusesVersionAndConfigMismatch) {
  MpcConfig cfg;
  {
    CosimSession s(fixtures::synthetic_model(), cfg);
    auto r = json::parse(s.handle_line(R"({"kind":"hello","version":"v0"})"));
    EXPECT_EQ(r["code"], "version-mismatch");
    EXPECT_TRUE(s.closed());
    EXPECT_EQ(json::parse(s.handle_line(observe(0, 0.002, 400)))["code"], "no-session");
  }
  {
    CosimSession s(fixtures::synthetic_model(), cfg);
    auto r = json::parse(s.handle_line(R"({"kind":"hello","version":"v1","config_hash":"0000000000000000"})"));
    EXPECT_EQ(r["code"], "config-mismatch");
    EXPECT_EQ(s.summary().refusal, "config-mismatch");
  }
}

TEST(Cosim, StreamServerStopsAtBye) {
  MpcConfig cfg;
  std::stringstream in;
  in << hello(cfg) << "\n" << observe(0, 0.002, 400) << "\r\n\n" << observe(1, 0.0021, 401) << "\n"
     << R"({"kind":"bye"})" << "\n" << observe(2, 0.002, 400) << "\n";
  std::stringstream out;
  auto sum = cosim_serve_stream(in, out, fixtures::synthetic_model(), cfg);
  EXPECT_EQ(sum.observations, 2);
  EXPECT_TRUE(sum.closed);
  std::string line;
  int n = 0;
  while (std::getline(out, line)) ++n;
  EXPECT_EQ(n, 4);
}

TEST(Cosim, TcpRoundTrip) {
  MpcConfig cfg;
  std::promise<int> port_p;
  auto port_f = port_p.get_future();
  CosimSummary summary;
  std::thread server([&] {
    summary = cosim_serve_tcp(0, fixtures::synthetic_model(), cfg, [&](int port) { port_p.set_value(port); });
  });
  const int port = port_f.get();
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  const std::string msg = hello(cfg) + "\n" + observe(0, 0.002, 400) + "\n" + R"({"kind":"bye"})" + "\n";
  ASSERT_EQ(::send(fd, msg.data(), msg.size(), 0), static_cast<ssize_t>(msg.size()));
  std::string got;
  char buf[1024];
  ssize_t n;
  while ((n = ::recv(fd, buf, sizeof buf, 0)) > 0) got.append(buf, static_cast<std::size_t>(n));
  ::close(fd);
  server.join();
  EXPECT_EQ(summary.observations, 1);
  EXPECT_NE(got.find("\"kind\":\"control\""), std::string::npos);
  EXPECT_NE(got.find("\"kind\":\"bye\""), std::string::npos);
}

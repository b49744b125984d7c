#pragma once

// Step-exchange protocol for driving the controller from an external solver:
// newline-delimited JSON, one message per line, strictly request/response.
//
//   -> {"kind":"hello","version":"v1","config_hash":"<16 hex>"}
//   <- {"kind":"hello-ack","version":"v1","config_hash":"..."}
//   -> {"kind":"observe","k":7,"x":0.0027,"T":412.5}
//   <- {"kind":"control","k":7,"p":231.4,"v":800.0,"status":"converged","iters":3}
//   -> {"kind":"bye"}
//   <- {"kind":"bye","observed":N}
//
// Errors are {"kind":"error","code":..., "message":...}. Codes: parse,
// bad-request, no-session, out-of-order, version-mismatch, config-mismatch.
// The last two refuse the session.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>

#include "meltpool/dynamics.hpp"
#include "meltpool/mpc.hpp"

namespace meltpool {

inline constexpr const char* kCosimVersion = "v1";

/// FNV-1a 64 of the canonical JSON of the controller config, as 16 hex digits.
std::string config_hash(const MpcConfig& cfg);

struct CosimSummary {
  bool accepted = false;
  bool closed = false;
  int observations = 0;
  int errors = 0;
  std::string refusal;
};

class CosimSession {
 public:
  CosimSession(std::shared_ptr<const DynModel> model, MpcConfig cfg);

  /// Response line (without newline) for one request line.
  std::string handle_line(const std::string& line);
  bool closed() const { return summary_.closed; }
  const CosimSummary& summary() const { return summary_; }
  const std::string& hash() const { return hash_; }

 private:
  std::string error(const std::string& code, const std::string& message);

  MpcController controller_;
  std::string hash_;
  CosimSummary summary_;
  bool have_step_ = false;
  std::int64_t last_step_ = 0;
};

/// Serves one session over a pair of streams until bye, refusal, or EOF.
CosimSummary cosim_serve_stream(std::istream& in, std::ostream& out, std::shared_ptr<const DynModel> model,
                                const MpcConfig& cfg);

/// Listens on 127.0.0.1:`port` (0 picks a free port, reported through
/// `on_listen`) and serves exactly one client session.
CosimSummary cosim_serve_tcp(int port, std::shared_ptr<const DynModel> model, const MpcConfig& cfg,
                             const std::function<void(int)>& on_listen = {});

}  // namespace meltpool

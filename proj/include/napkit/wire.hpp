#pragma once

// Newline-delimited JSON protocol for detectors living outside the process.
//
//   -> {"op":"probe"}
//   <- {"supports_gradients":false,"resolution":[w,h],"class_map":{"14":"stop"},...}
//   -> {"op":"detect","image":"<base64 PNG>"}
//   <- {"detections":[{"class_id":14,"confidence":0.91,"bbox":[cx,cy,w,h]}]}
//   -> {"op":"grad","image":"<base64 PNG>","upstream":1.0}
//   <- {"gradient":{"width":w,"height":h,"channels":3,"data":[...]}}
//
// Any request may be answered with {"error":"..."}.

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "napkit/adapters.hpp"

namespace napkit {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct DetectorCapabilities {
  bool supports_gradients = false;
  int width = 0;
  int height = 0;
  std::map<int, std::string> class_map;
  std::string confidence_definition;
};

class LineTransport {
 public:
  virtual ~LineTransport() = default;
  /// Sends one request line (without newline) and returns the reply line.
  virtual std::string exchange(const std::string& request) = 0;
};

struct WireServerOptions {
  bool expose_gradients = false;
};

/// Serves any DetectorAdapter over the wire protocol.
class WireServer {
 public:
  WireServer(std::shared_ptr<const DetectorAdapter> detector, WireServerOptions options = {});

  std::string handle(const std::string& request) const;
  /// Answers requests line by line until EOF.
  void serve(std::istream& in, std::ostream& out) const;

 private:
  std::shared_ptr<const DetectorAdapter> detector_;
  WireServerOptions options_;
};

/// In-process transport straight into a WireServer.
class LoopbackTransport final : public LineTransport {
 public:
  explicit LoopbackTransport(std::shared_ptr<const WireServer> server) : server_(std::move(server)) {}
  std::string exchange(const std::string& request) override { return server_->handle(request); }

 private:
  std::shared_ptr<const WireServer> server_;
};

/// Talks to `/bin/sh -c command` over its stdin/stdout.
class SubprocessTransport final : public LineTransport {
 public:
  explicit SubprocessTransport(std::string command,
                               std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  std::string exchange(const std::string& request) override;

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  int fd_ = -1;
  int pid_ = -1;
  std::string buffer_;
};

DetectorCapabilities external_detector_probe(LineTransport& transport);

/// DetectorAdapter proxied over a LineTransport. Calls are serialized.
class ExternalDetector final : public DetectorAdapter {
 public:
  explicit ExternalDetector(std::unique_ptr<LineTransport> transport, int stop_class_id = kStopClassId,
                            ConfidenceReduction reduction = ConfidenceReduction::Max);

  const DetectorCapabilities& capabilities() const noexcept { return caps_; }

  std::vector<Detection> detect(const Image& image) const override;
  bool supports_gradients() const override { return caps_.supports_gradients; }
  Image input_gradient(const Image& image, double upstream) const override;
  DetectorInfo info() const override;

 private:
  std::string call(const std::string& request) const;

  std::unique_ptr<LineTransport> transport_;
  DetectorCapabilities caps_;
  mutable std::mutex mu_;
};

}  // namespace napkit

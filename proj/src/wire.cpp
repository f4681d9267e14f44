#include "napkit/wire.hpp"

#include <openssl/evp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "napkit/error.hpp"
#include "napkit/image_io.hpp"

namespace napkit {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) fail(ErrorKind::ProtocolError, "base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) fail(ErrorKind::ProtocolError, "invalid base64 payload");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

namespace {

json error_reply(const std::string& message) { return json{{"error", message}}; }

Image image_from_request(const json& req) {
  const auto it = req.find("image");
  if (it == req.end() || !it->is_string()) fail(ErrorKind::ProtocolError, "request lacks an image");
  return decode_png(base64_decode(it->get<std::string>()));
}

}  // namespace

WireServer::WireServer(std::shared_ptr<const DetectorAdapter> detector, WireServerOptions options)
    : detector_(std::move(detector)), options_(options) {
  if (!detector_) fail(ErrorKind::InvalidArgument, "wire server needs a detector");
}

std::string WireServer::handle(const std::string& request) const {
  json reply;
  try {
    const json req = json::parse(request);
    const std::string op = req.at("op").get<std::string>();
    if (op == "probe") {
      const DetectorInfo info = detector_->info();
      json classes = json::object();
      for (const auto& [id, name] : info.class_map) classes[std::to_string(id)] = name;
      reply = {{"supports_gradients", options_.expose_gradients && detector_->supports_gradients()},
               {"resolution", {info.width, info.height}},
               {"class_map", classes},
               {"confidence_definition", info.confidence_definition}};
    } else if (op == "detect") {
      const Image img = image_from_request(req);
      json dets = json::array();
      for (const auto& d : detector_->detect(img)) {
        dets.push_back({{"class_id", d.class_id},
                        {"confidence", d.confidence},
                        {"bbox", {d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h}}});
      }
      reply = {{"detections", dets}};
    } else if (op == "grad") {
      if (!options_.expose_gradients || !detector_->supports_gradients()) {
        reply = error_reply("gradients not supported");
      } else {
        const Image img = image_from_request(req);
        const Image g = detector_->input_gradient(img, req.value("upstream", 1.0));
        reply = {{"gradient",
                  {{"width", g.width()},
                   {"height", g.height()},
                   {"channels", g.channels()},
                   {"data", std::vector<double>(g.data().begin(), g.data().end())}}}};
      }
    } else {
      reply = error_reply("unknown op: " + op);
    }
  } catch (const json::exception& e) {
    reply = error_reply(std::string("bad request: ") + e.what());
  } catch (const std::exception& e) {
    reply = error_reply(e.what());
  }
  return reply.dump();
}

void WireServer::serve(std::istream& in, std::ostream& out) const {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle(line) << '\n';
    out.flush();
  }
}

SubprocessTransport::SubprocessTransport(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    fail(ErrorKind::Unreachable, "cannot create socket pair for: " + command_);
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    fail(ErrorKind::Unreachable, "cannot fork for: " + command_);
  }
  if (pid == 0) {
    close(fds[0]);
    dup2(fds[1], STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  fd_ = fds[0];
  pid_ = pid;
}

SubprocessTransport::~SubprocessTransport() {
  if (fd_ >= 0) close(fd_);
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == 0) {
      kill(pid_, SIGTERM);
      waitpid(pid_, &status, 0);
    }
  }
}

std::string SubprocessTransport::exchange(const std::string& request) {
  const std::string line = request + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::Unreachable, "external detector closed its input: " + command_);
    }
    sent += static_cast<std::size_t>(n);
  }
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    pollfd p{fd_, POLLIN, 0};
    const int ready = poll(&p, 1, static_cast<int>(timeout_.count()));
    if (ready == 0) fail(ErrorKind::Unreachable, "external detector timed out: " + command_);
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::Unreachable, "poll failed on external detector: " + command_);
    }
    char chunk[65536];
    const ssize_t n = recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail(ErrorKind::Unreachable, "external detector exited: " + command_);
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

json parse_reply(const std::string& line) {
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error&) {
    fail(ErrorKind::ProtocolError, "reply is not JSON: " + line.substr(0, 120));
  }
  if (!reply.is_object()) fail(ErrorKind::ProtocolError, "reply is not a JSON object");
  if (const auto it = reply.find("error"); it != reply.end()) {
    fail(ErrorKind::ProtocolError, "detector reported an error: " + it->dump());
  }
  return reply;
}

}  // namespace

DetectorCapabilities external_detector_probe(LineTransport& transport) {
  const json reply = parse_reply(transport.exchange(json{{"op", "probe"}}.dump()));
  DetectorCapabilities caps;
  try {
    caps.supports_gradients = reply.at("supports_gradients").get<bool>();
    const auto& res = reply.at("resolution");
    caps.width = res.at(0).get<int>();
    caps.height = res.at(1).get<int>();
    const json classes = reply.value("class_map", json::object());
    for (const auto& [key, name] : classes.items()) {
      caps.class_map[std::stoi(key)] = name.get<std::string>();
    }
    caps.confidence_definition = reply.value("confidence_definition", std::string());
  } catch (const std::exception& e) {
    fail(ErrorKind::ProtocolError, std::string("malformed probe reply: ") + e.what());
  }
  return caps;
}

ExternalDetector::ExternalDetector(std::unique_ptr<LineTransport> transport, int stop_class_id,
                                   ConfidenceReduction reduction)
    : DetectorAdapter(stop_class_id, reduction), transport_(std::move(transport)) {
  if (!transport_) fail(ErrorKind::InvalidArgument, "external detector needs a transport");
  caps_ = external_detector_probe(*transport_);
}

std::string ExternalDetector::call(const std::string& request) const {
  std::lock_guard lock(mu_);
  return transport_->exchange(request);
}

std::vector<Detection> ExternalDetector::detect(const Image& image) const {
  const json req = {{"op", "detect"}, {"image", base64_encode(encode_png(image))}};
  const json reply = parse_reply(call(req.dump()));
  std::vector<Detection> out;
  try {
    for (const auto& d : reply.at("detections")) {
      Detection det;
      det.class_id = d.at("class_id").get<int>();
      det.confidence = d.at("confidence").get<double>();
      const auto& b = d.at("bbox");
      det.bbox = {det.class_id, b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                  b.at(3).get<double>()};
      if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
        fail(ErrorKind::ProtocolError, "detection confidence outside [0,1]");
      }
      out.push_back(det);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ProtocolError, std::string("malformed detect reply: ") + e.what());
  }
  return out;
}

Image ExternalDetector::input_gradient(const Image& image, double upstream) const {
  if (!caps_.supports_gradients) return DetectorAdapter::input_gradient(image, upstream);
  const json req = {{"op", "grad"}, {"image", base64_encode(encode_png(image))}, {"upstream", upstream}};
  const json reply = parse_reply(call(req.dump()));
  try {
    const auto& g = reply.at("gradient");
    Image out(g.at("width").get<int>(), g.at("height").get<int>(), g.at("channels").get<int>());
    const auto& data = g.at("data");
    if (data.size() != out.size() || !out.same_shape(image)) {
      fail(ErrorKind::ProtocolError, "gradient shape does not match the image");
    }
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = data[i].get<double>();
    return out;
  } catch (const json::exception& e) {
    fail(ErrorKind::ProtocolError, std::string("malformed grad reply: ") + e.what());
  }
}

DetectorInfo ExternalDetector::info() const {
  DetectorInfo i;
  i.width = caps_.width;
  i.height = caps_.height;
  i.supports_gradients = caps_.supports_gradients;
  i.reentrant = false;
  i.deterministic = false;
  i.class_map = caps_.class_map;
  i.confidence_definition = caps_.confidence_definition;
  return i;
}

}  // namespace napkit

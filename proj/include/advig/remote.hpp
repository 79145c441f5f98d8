#pragma once

// HTTP wire protocol for remote detectors, plus a server that exposes the
// mock backend over the same protocol so remote mode can be exercised
// offline.
//
// Request:  POST <endpoint>/detect
//           {"image": "<base64 PGM/PPM bytes>", "width": W, "height": H,
//            "channels": C}
// Response: {"detections": [{"bbox": [x1,y1,x2,y2], "objectness": o,
//            "class_id": k, "class_score": s}, ...]}

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "advig/detail/base64.hpp"
#include "advig/detector.hpp"
#include "advig/error.hpp"
#include "advig/imaging.hpp"

namespace advig {

namespace protocol {

inline nlohmann::json detect_request(const Frame& frame) {
  return nlohmann::json{{"image", detail::base64_encode(encode_pnm(frame))},
                        {"width", frame.width},
                        {"height", frame.height},
                        {"channels", frame.channels}};
}

/// Parse and validate a /detect request body. Throws InvalidParameter on
/// any schema or consistency violation.
inline Frame parse_detect_request(const std::string& body) {
  const nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw InvalidParameter("request body is not JSON");
  if (!j.is_object() || !j.contains("image") || !j["image"].is_string() ||
      !j.contains("width") || !j.contains("height") || !j.contains("channels"))
    throw InvalidParameter("request missing image/width/height/channels");
  const Frame frame = decode_pnm(detail::base64_decode(j["image"]));
  if (frame.width != j["width"].get<int>() ||
      frame.height != j["height"].get<int>() ||
      frame.channels != j["channels"].get<int>())
    throw InvalidParameter("stated dimensions disagree with image payload");
  return frame;
}

inline nlohmann::json detections_response(const std::vector<Detection>& dets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : dets)
    arr.push_back(nlohmann::json{
        {"bbox", {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2}},
        {"objectness", d.objectness},
        {"class_id", d.class_id},
        {"class_score", d.class_score}});
  return nlohmann::json{{"detections", std::move(arr)}};
}

/// Parse and validate a /detect response body. Throws InvalidParameter on
/// any schema violation.
inline std::vector<Detection> parse_detections(const std::string& body) {
  const nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw InvalidParameter("response body is not JSON");
  if (!j.is_object() || !j.contains("detections") ||
      !j["detections"].is_array())
    throw InvalidParameter("response missing detections array");
  std::vector<Detection> out;
  for (const auto& item : j["detections"]) {
    if (!item.is_object() || !item.contains("bbox") ||
        !item["bbox"].is_array() || item["bbox"].size() != 4 ||
        !item.contains("objectness") || !item["objectness"].is_number() ||
        !item.contains("class_id") ||
        !item["class_id"].is_number_integer() ||
        !item.contains("class_score") || !item["class_score"].is_number())
      throw InvalidParameter("detection entry malformed");
    Detection d;
    d.bbox = BBoxd{item["bbox"][0].get<double>(), item["bbox"][1].get<double>(),
                   item["bbox"][2].get<double>(),
                   item["bbox"][3].get<double>()};
    d.objectness = item["objectness"].get<double>();
    d.class_id = item["class_id"].get<int>();
    d.class_score = item["class_score"].get<double>();
    if (!(d.bbox.x1 < d.bbox.x2) || !(d.bbox.y1 < d.bbox.y2) ||
        d.objectness < 0.0 || d.objectness > 1.0 || d.class_score < 0.0 ||
        d.class_score > 1.0)
      throw InvalidParameter("detection entry out of range");
    out.push_back(d);
  }
  return out;
}

}  // namespace protocol

/// One remote forward pass. Faults: connection-level failures surface as
/// transport, a missed connect deadline as timeout, and any reply that is
/// not a valid 200 detection document as malformed.
inline std::vector<Detection> remote_detect(const Frame& frame,
                                            const OracleConfig& config) {
  config.validate();
  httplib::Client client(config.endpoint);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);

  const std::string body = protocol::detect_request(frame).dump();
  httplib::Result res = client.Post("/detect", body, "application/json");
  if (!res) {
    const httplib::Error err = res.error();
    if (err == httplib::Error::ConnectionTimeout)
      throw OracleError(OracleFault::timeout,
                        "connect to " + config.endpoint + " timed out");
    throw OracleError(OracleFault::transport,
                      "POST " + config.endpoint +
                          "/detect failed: " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw OracleError(OracleFault::malformed,
                      "HTTP status " + std::to_string(res->status) +
                          " from " + config.endpoint + "/detect");
  try {
    return protocol::parse_detections(res->body);
  } catch (const InvalidParameter& e) {
    throw OracleError(OracleFault::malformed, e.what());
  }
}

/// Single detector forward pass against the configured backend. The ledger
/// is incremented exactly once per successful pass; failed passes leave it
/// untouched because the corresponding OracleError is thrown first.
inline std::vector<Detection> query(const Frame& frame,
                                    const OracleConfig& config,
                                    QueryLedger& ledger) {
  std::vector<Detection> dets = config.backend == OracleBackend::mock
                                    ? mock_detect(frame, config)
                                    : remote_detect(frame, config);
  ledger.increment();
  return dets;
}

/// Serves the wire protocol backed by the deterministic mock detector.
class MockServer {
 public:
  explicit MockServer(OracleConfig config) : config_(std::move(config)) {
    config_.validate();
    server_.Post("/detect", [this](const httplib::Request& req,
                                   httplib::Response& res) {
      try {
        const Frame frame = protocol::parse_detect_request(req.body);
        const std::vector<Detection> dets = mock_detect(frame, config_);
        served_.fetch_add(1, std::memory_order_relaxed);
        res.set_content(protocol::detections_response(dets).dump(),
                        "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(),
                        "application/json");
      }
    });
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
  }

  ~MockServer() { stop(); }
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Bind the listening socket; port 0 picks a free port. Returns the
  /// bound port. Throws BindError when the address is unavailable.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int bound = server_.bind_to_any_port(host);
      if (bound < 0) throw BindError("cannot bind " + host + " (any port)");
      port_ = bound;
    } else {
      if (!server_.bind_to_port(host, port))
        throw BindError("cannot bind " + host + ":" + std::to_string(port));
      port_ = port;
    }
    return port_;
  }

  /// Serve on the calling thread until stop() is invoked.
  void serve_blocking() { server_.listen_after_bind(); }

  /// Serve on a background thread; returns once the server accepts
  /// connections.
  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  long long requests_served() const {
    return served_.load(std::memory_order_relaxed);
  }

 private:
  OracleConfig config_;
  httplib::Server server_;
  std::thread thread_;
  std::atomic<long long> served_{0};
  int port_ = 0;
};

}  // namespace advig

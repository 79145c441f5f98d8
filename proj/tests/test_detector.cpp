#include <advig/detector.hpp>
#include <advig/remote.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "support/corpus.hpp"
#include "support/oracles.hpp"

#include <string>
#include <thread>
#include <vector>

using namespace advig;

TEST_CASE("iou", "[detector]") {
  const BBoxd a{0, 0, 2, 2};
  REQUIRE(iou(a, a) == 1.0);
  REQUIRE(iou(a, BBoxd{5, 5, 7, 7}) == 0.0);
  REQUIRE(iou(a, BBoxd{2, 0, 4, 2}) == 0.0);  // touching edges do not overlap
  // overlap 1, union 4 + 4 - 1 = 7
  REQUIRE(iou(a, BBoxd{1, 1, 3, 3}) == 1.0 / 7.0);

  SECTION("symmetry and range on random boxes") {
    detail::Rng rng(1234);
    for (int i = 0; i < 200; ++i) {
      const auto box = [&] {
        const double x1 = rng.uniform(0, 50), y1 = rng.uniform(0, 50);
        return BBoxd{x1, y1, x1 + rng.uniform(1, 30), y1 + rng.uniform(1, 30)};
      };
      const BBoxd p = box(), q = box();
      const double v = iou(p, q);
      REQUIRE(v == iou(q, p));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("match_target", "[detector]") {
  const Rect target{0, 0, 2, 2};

  SECTION("no detections means the target vanished") {
    REQUIRE(match_target({}, target) == 0.0);
  }

  SECTION("an exactly matching detection reports its objectness") {
    const std::vector<Detection> dets = {
        Detection{BBoxd{0, 0, 2, 2}, 0.9, 0, 0.9}};
    REQUIRE(match_target(dets, target) == 0.9);
  }

  SECTION("a weak overlap does not match") {
    const std::vector<Detection> dets = {
        Detection{BBoxd{1, 1, 3, 3}, 0.9, 0, 0.9}};  // IoU 1/7
    REQUIRE(match_target(dets, target) == 0.0);
  }

  SECTION("IoU exactly at the threshold still matches") {
    // intersection 2, union 4: IoU = 0.5
    const std::vector<Detection> dets = {
        Detection{BBoxd{0, 0, 2, 1}, 0.7, 0, 0.7}};
    REQUIRE(match_target(dets, target, 0.5) == 0.7);
    REQUIRE(match_target(dets, target, 0.51) == 0.0);
  }

  SECTION("the best overlapping objectness wins") {
    const std::vector<Detection> dets = {
        Detection{BBoxd{0, 0, 2, 2}, 0.4, 0, 0.4},
        Detection{BBoxd{0, 0, 2, 2}, 0.8, 1, 0.8},
        Detection{BBoxd{10, 10, 12, 12}, 0.99, 0, 0.99}};
    REQUIRE(match_target(dets, target) == 0.8);
  }

  SECTION("the Rect overload equals the continuous one") {
    const std::vector<Detection> dets = {
        Detection{BBoxd{0, 0, 2, 2}, 0.6, 0, 0.6}};
    REQUIRE(match_target(dets, target) ==
            match_target(dets, BBoxd::of(target)));
  }

  SECTION("threshold domain is (0,1]") {
    REQUIRE_THROWS_AS(match_target({}, target, 0.0), InvalidParameter);
    REQUIRE_THROWS_AS(match_target({}, target, 1.5), InvalidParameter);
    REQUIRE_NOTHROW(match_target({}, target, 1.0));
  }
}

TEST_CASE("mock objectness fixed cases", "[detector][mock]") {
  OracleConfig config;  // beta 2.0, dark threshold 64
  const Rect box{2, 2, 12, 12};  // 100 pixels

  SECTION("no dark pixels scores full objectness") {
    const Frame bright = Frame::constant(16, 16, 1, 200);
    REQUIRE(mock_objectness(bright, box, config) == 1.0);
  }

  SECTION("half coverage at beta 2 hits zero exactly") {
    Frame f = Frame::constant(16, 16, 1, 200);
    for (int y = 2; y < 12; ++y)
      for (int x = 2; x < 7; ++x) f.at(x, y, 0) = 0;  // 50 of 100 pixels
    REQUIRE(mock_objectness(f, box, config) == 0.0);
  }

  SECTION("one-fifth coverage at beta 2 scores 0.6") {
    Frame f = Frame::constant(16, 16, 1, 200);
    for (int y = 2; y < 12; ++y)
      for (int x = 2; x < 4; ++x) f.at(x, y, 0) = 0;  // 20 of 100 pixels
    REQUIRE(mock_objectness(f, box, config) == 0.6);
  }

  SECTION("the dark test is strict and channel-mean based") {
    Frame f = Frame::constant(16, 16, 1, 64);  // exactly at threshold: bright
    REQUIRE(mock_objectness(f, box, config) == 1.0);
    Frame g = Frame::constant(16, 16, 1, 63);
    REQUIRE(mock_objectness(g, box, config) == 0.0);

    // RGB mean (100+0+0)/3 = 33.3 < 64: dark even with one bright channel.
    Frame rgb = Frame::constant(16, 16, 3, 0);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) rgb.at(x, y, 0) = 100;
    REQUIRE(mock_objectness(rgb, box, config) == 0.0);
  }

  SECTION("out-of-frame boxes are rejected") {
    const Frame f = Frame::constant(8, 8, 1, 200);
    REQUIRE_THROWS_AS(mock_objectness(f, Rect{4, 4, 12, 12}, config),
                      InvalidParameter);
    REQUIRE_THROWS_AS(mock_objectness(f, Rect{}, config), InvalidParameter);
  }
}

TEST_CASE("mock objectness equals the reference on random frames",
          "[detector][mock][property]") {
  detail::Rng rng(20240814);
  for (int i = 0; i < 60; ++i) {
    Frame f = Frame::constant(40, 30, i % 2 == 0 ? 1 : 3, 0);
    for (auto& v : f.data)
      v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const Rect box{rng.uniform_int(0, 10), rng.uniform_int(0, 10),
                   rng.uniform_int(20, 40), rng.uniform_int(20, 30)};
    OracleConfig config;
    config.mock_beta = rng.uniform(0.5, 4.0);
    config.mock_dark_threshold = rng.uniform_int(1, 254);
    REQUIRE(mock_objectness(f, box, config) ==
            testoracle::objectness_reference(f, box, config.mock_beta,
                                             config.mock_dark_threshold));
  }
}

TEST_CASE("mock_detect", "[detector][mock]") {
  SECTION("positive objectness emits one detection per registered box") {
    const Rect box{2, 2, 12, 12};
    const Frame f = testutil::target_frame(16, 16, box, 200, 30, 2);
    const OracleConfig config = testutil::mock_config_for(box, f.dims());
    const std::vector<Detection> dets = mock_detect(f, config);
    REQUIRE(dets.size() == 1);
    REQUIRE(dets[0].bbox == BBoxd::of(box));
    REQUIRE(dets[0].objectness == mock_objectness(f, box, config));
    REQUIRE(dets[0].objectness == dets[0].class_score);
  }

  SECTION("a fully darkened box yields no detection") {
    const Rect box{2, 2, 12, 12};
    Frame f = Frame::constant(16, 16, 1, 200);
    for (int y = box.y1; y < box.y2; ++y)
      for (int x = box.x1; x < box.x2; ++x) f.at(x, y, 0) = 0;
    REQUIRE(mock_detect(f, testutil::mock_config_for(box, f.dims())).empty());
  }

  SECTION("reference boxes scale with the queried frame") {
    const Rect ref_box{20, 20, 60, 100};
    OracleConfig config;
    config.mock_targets = {ref_box};
    config.mock_ref_dims = FrameDims{320, 240};
    const Frame half = Frame::constant(160, 120, 1, 200);
    const std::vector<Detection> dets = mock_detect(half, config);
    REQUIRE(dets.size() == 1);
    REQUIRE(dets[0].bbox == BBoxd{10, 10, 30, 50});
  }
}

TEST_CASE("query ledger counts successful passes only", "[detector][remote]") {
  const Rect box{2, 2, 12, 12};
  const Frame f = testutil::target_frame(16, 16, box, 200, 30, 2);
  const OracleConfig mock = testutil::mock_config_for(box, f.dims());

  QueryLedger ledger;
  REQUIRE(ledger.count() == 0);
  query(f, mock, ledger);
  query(f, mock, ledger);
  REQUIRE(ledger.count() == 2);

  OracleConfig refused;
  refused.backend = OracleBackend::remote;
  refused.endpoint = "http://127.0.0.1:1";  // nothing listens here
  refused.timeout = std::chrono::milliseconds(300);
  REQUIRE_THROWS_AS(query(f, refused, ledger), OracleError);
  REQUIRE(ledger.count() == 2);
}

TEST_CASE("wire protocol round-trips", "[detector][protocol]") {
  SECTION("request payload reproduces the frame") {
    detail::Rng rng(4096);
    Frame f = Frame::constant(9, 7, 3, 0);
    for (auto& v : f.data)
      v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const nlohmann::json req = protocol::detect_request(f);
    REQUIRE(req.at("width") == 9);
    REQUIRE(req.at("height") == 7);
    REQUIRE(req.at("channels") == 3);
    REQUIRE(protocol::parse_detect_request(req.dump()) == f);
  }

  SECTION("stated dimensions must agree with the payload") {
    nlohmann::json req = protocol::detect_request(Frame::constant(4, 4, 1, 9));
    req["width"] = 5;
    REQUIRE_THROWS_AS(protocol::parse_detect_request(req.dump()),
                      InvalidParameter);
    REQUIRE_THROWS_AS(protocol::parse_detect_request("not json"),
                      InvalidParameter);
    REQUIRE_THROWS_AS(protocol::parse_detect_request("{}"), InvalidParameter);
  }

  SECTION("response payload reproduces the detections") {
    const std::vector<Detection> dets = {
        Detection{BBoxd{1.5, 2.25, 10, 20}, 0.75, 3, 0.5},
        Detection{BBoxd{0, 0, 4, 4}, 1.0, 0, 1.0}};
    REQUIRE(protocol::parse_detections(
                protocol::detections_response(dets).dump()) == dets);
    REQUIRE(protocol::parse_detections(R"({"detections":[]})").empty());
  }

  SECTION("malformed responses are rejected") {
    REQUIRE_THROWS_AS(protocol::parse_detections("[]"), InvalidParameter);
    REQUIRE_THROWS_AS(protocol::parse_detections(R"({"detections":[{}]})"),
                      InvalidParameter);
    REQUIRE_THROWS_AS(
        protocol::parse_detections(
            R"({"detections":[{"bbox":[0,0,1,1],"objectness":1.5,)"
            R"("class_id":0,"class_score":0.5}]})"),
        InvalidParameter);
  }
}

TEST_CASE("mock server speaks the protocol over loopback",
          "[detector][remote]") {
  const Rect box{2, 2, 12, 12};
  const Frame f = testutil::target_frame(16, 16, box, 200, 30, 2);
  const OracleConfig mock = testutil::mock_config_for(box, f.dims());

  MockServer server(mock);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  REQUIRE(server.port() == port);
  server.start();

  OracleConfig remote;
  remote.backend = OracleBackend::remote;
  remote.endpoint = "http://127.0.0.1:" + std::to_string(port);

  SECTION("remote detections equal the in-process mock") {
    QueryLedger ledger;
    const std::vector<Detection> via_wire = query(f, remote, ledger);
    REQUIRE(via_wire == mock_detect(f, mock));
    REQUIRE(ledger.count() == 1);
    REQUIRE(server.requests_served() == 1);
  }

  SECTION("health endpoint answers") {
    httplib::Client client(remote.endpoint);
    const httplib::Result res = client.Get("/health");
    REQUIRE(res);
    REQUIRE(res->status == 200);
  }

  SECTION("a broken request body is answered with 400") {
    httplib::Client client(remote.endpoint);
    const httplib::Result res =
        client.Post("/detect", "garbage", "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 400);
  }

  server.stop();
}

TEST_CASE("remote fault classes", "[detector][remote]") {
  const Frame f = Frame::constant(4, 4, 1, 128);

  SECTION("a 200 reply that is not a detection document is malformed") {
    httplib::Server bogus;
    bogus.Post("/detect", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("plainly not json", "text/plain");
    });
    const int port = bogus.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serve([&] { bogus.listen_after_bind(); });
    bogus.wait_until_ready();

    OracleConfig cfg;
    cfg.backend = OracleBackend::remote;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    try {
      remote_detect(f, cfg);
      FAIL("expected an oracle fault");
    } catch (const OracleError& e) {
      REQUIRE(e.fault() == OracleFault::malformed);
    }
    bogus.stop();
    serve.join();
  }

  SECTION("a non-200 status is malformed, not transport") {
    httplib::Server bogus;
    bogus.Post("/detect", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
    });
    const int port = bogus.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serve([&] { bogus.listen_after_bind(); });
    bogus.wait_until_ready();

    OracleConfig cfg;
    cfg.backend = OracleBackend::remote;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    try {
      remote_detect(f, cfg);
      FAIL("expected an oracle fault");
    } catch (const OracleError& e) {
      REQUIRE(e.fault() == OracleFault::malformed);
    }
    bogus.stop();
    serve.join();
  }
}

TEST_CASE("oracle config validation", "[detector]") {
  OracleConfig config;
  REQUIRE_NOTHROW(config.validate());
  config.backend = OracleBackend::remote;
  REQUIRE_THROWS_AS(config.validate(), InvalidParameter);
  config.endpoint = "http://127.0.0.1:9";
  REQUIRE_NOTHROW(config.validate());
  config.mock_beta = 0.0;
  REQUIRE_THROWS_AS(config.validate(), InvalidParameter);
  config.mock_beta = 2.0;
  config.mock_dark_threshold = 300;
  REQUIRE_THROWS_AS(config.validate(), InvalidParameter);
  config.mock_dark_threshold = 64;
  config.timeout = std::chrono::milliseconds(0);
  REQUIRE_THROWS_AS(config.validate(), InvalidParameter);
}

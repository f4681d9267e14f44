#include <doctest.h>

#include <vector>

#include "napkit/adapters.hpp"
#include "napkit/error.hpp"
#include "napkit/evalsim.hpp"

using namespace napkit;

namespace {

SweepConfig tiny_config() {
  SweepConfig cfg;
  cfg.distances = {0.45};
  cfg.patch_types = occluder_patch_types(8);
  cfg.patch_types.resize(1);
  cfg.sizes = {{"medium", 0.604}};
  cfg.placements = {Slot::Center};
  cfg.window = 6;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("evalsim") {
  TEST_CASE("projected size follows the pinhole model") {
    CHECK(projected_size(0.1, 0.3, 600) == doctest::Approx(200.0));
    CHECK(projected_size(0.1, 0.6, 600) == doctest::Approx(100.0));
    CHECK_THROWS_AS(projected_size(0.1, 0.0, 600), Error);
  }

  TEST_CASE("zero jitter renders identical frames") {
    SweepConfig cfg = tiny_config();
    cfg.jitter = 0.0;
    const SceneRenderer r(cfg);
    const OverlayPlacement place{Slot::Center, 0.604};
    const Image& patch = cfg.patch_types[0].pixels;
    CHECK(r.render(&patch, 0.45, place, 0) == r.render(&patch, 0.45, place, 5));
    CHECK(r.render(nullptr, 0.45, place, 0) == r.render(nullptr, 0.45, place, 3));
  }

  TEST_CASE("jitter stays within its bound and depends only on seed and frame") {
    const SweepConfig cfg = tiny_config();
    const SceneRenderer a(cfg);
    const SceneRenderer b(cfg);
    for (int f = 0; f < 50; ++f) {
      CHECK(a.jitter_offset(f) == b.jitter_offset(f));
      CHECK(std::abs(a.jitter_offset(f)) <= 3);
    }
  }

  TEST_CASE("the sign shrinks with distance") {
    const SweepConfig cfg = tiny_config();
    const SceneRenderer r(cfg);
    CHECK(r.sign_box(0.3).w > r.sign_box(0.6).w);
    CHECK(r.patch_coverage(0.3, 0.6) > r.patch_coverage(0.6, 0.6));
  }

  TEST_CASE("constant detector yields zero delta") {
    const SweepConfig cfg = tiny_config();
    const ConstantDetector det(0.7);
    const auto records = run_sweep(cfg, det);
    REQUIRE(records.size() == 2);
    CHECK(records[0].key.clean());
    CHECK(records[0].key.size == kNoneField);
    CHECK(records[1].key.patch_type == "white");
    CHECK(records[1].confidences.size() == 6);
    REQUIRE(records[1].delta.has_value());
    CHECK(*records[1].delta == 0.0);
  }

  TEST_CASE("records CSV round trip") {
    const SweepConfig cfg = tiny_config();
    const ConstantDetector det(0.25);
    const auto records = run_sweep(cfg, det);
    const std::string csv = records_csv(records);
    CHECK(csv.rfind("distance_m,patch_type,size,placement,frame_idx,confidence\n", 0) == 0);
    const auto back = parse_records_csv(csv);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].key == records[i].key);
      CHECK(back[i].confidences == records[i].confidences);
    }
    CHECK(records_csv(back) == csv);
  }

  TEST_CASE("the clean type name is reserved") {
    SweepConfig cfg = tiny_config();
    cfg.patch_types[0].name = kCleanType;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}

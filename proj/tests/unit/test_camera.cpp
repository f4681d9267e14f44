#include <doctest.h>

#include "helpers.hpp"
#include "napkit/assets.hpp"
#include "napkit/camera.hpp"
#include "napkit/error.hpp"
#include "napkit/image_io.hpp"

using namespace napkit;

TEST_SUITE("camera") {
  TEST_CASE("distort_point matches hand-computed values") {
    CameraModel cam;
    cam.k1 = 0.05;
    cam.p1 = 0.01;
    const auto d = distort_point({0.3, 0.4}, cam);
    CHECK(d.x == doctest::Approx(0.30615).epsilon(1e-12));
    CHECK(d.y == doctest::Approx(0.4107).epsilon(1e-12));
  }

  TEST_CASE("undistort inverts distort") {
    CameraModel cam;
    cam.k1 = -0.2;
    cam.k2 = 0.05;
    cam.p1 = 0.005;
    cam.p2 = -0.003;
    for (double x : {-0.4, -0.1, 0.0, 0.2, 0.45}) {
      for (double y : {-0.3, 0.0, 0.25}) {
        const auto u = undistort_point({x, y}, cam);
        const auto back = distort_point(u, cam);
        CHECK(back.x == doctest::Approx(x).epsilon(1e-9));
        CHECK(back.y == doctest::Approx(y).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("undistort reports non-convergence for wild coefficients") {
    CameraModel cam;
    cam.k1 = 50.0;
    cam.k2 = -80.0;
    CHECK_FALSE(try_undistort_point({2.0, 2.0}, cam).has_value());
    try {
      undistort_point({2.0, 2.0}, cam);
      FAIL("expected NonConvergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonConvergence);
    }
  }

  TEST_CASE("zero coefficients give an exact identity remap") {
    const CameraModel cam;
    const Image img = make_background(64, 48, 3);
    CameraModel small = cam;
    small.width = 64;
    small.height = 48;
    small.cx = 31.5;
    small.cy = 23.5;
    CHECK(remap_image(img, small, RemapDirection::Distort) == img);
    CHECK(remap_image(img, small, RemapDirection::Undistort) == img);
    const BBox b = BBox::from_edges(14, 0.2, 0.3, 0.5, 0.7);
    const BBox r = remap_bbox(b, small, RemapDirection::Distort);
    CHECK(r.left() == doctest::Approx(b.left()));
    CHECK(r.bottom() == doctest::Approx(b.bottom()));
  }

  TEST_CASE("distort remap moves content outward for pincushion k1") {
    CameraModel cam;
    cam.width = 64;
    cam.height = 48;
    cam.fx = cam.fy = 60;
    cam.cx = 31.5;
    cam.cy = 23.5;
    cam.k1 = 0.3;
    const BBox b = BBox::from_edges(14, 0.6, 0.6, 0.8, 0.8);
    const BBox r = remap_bbox(b, cam, RemapDirection::Distort);
    CHECK(r.right() > b.right());
    CHECK(r.bottom() > b.bottom());
    CHECK(is_valid(r));
  }

  TEST_CASE("iou of identical and disjoint boxes") {
    const BBox a = BBox::from_edges(1, 0.1, 0.1, 0.3, 0.3);
    const BBox b = BBox::from_edges(1, 0.5, 0.5, 0.7, 0.7);
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, b) == 0.0);
  }

  TEST_CASE("calibration round trip and error reporting") {
    CameraModel cam;
    cam.k1 = -0.12;
    cam.p2 = 0.001;
    const CameraModel back = parse_calibration(serialize_calibration(cam));
    CHECK(back == cam);

    try {
      parse_calibration(R"({"fy":600,"cx":319.5,"cy":239.5,"k1":0,"k2":0,"p1":0,"p2":0,"width":640,"height":480})");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ParseError);
      CHECK(std::string(e.what()).find("fx") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_calibration(R"({"fx":-1,"fy":600,"cx":1,"cy":1,"k1":0,"k2":0,"p1":0,"p2":0,"width":640,"height":480})"),
                    Error);

    const auto dir = fresh_dir("calib");
    save_calibration(cam, dir / "cam.json");
    CHECK(load_calibration(dir / "cam.json") == cam);
    try {
      load_calibration(dir / "missing.json");
      FAIL("expected IoError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IoError);
      CHECK(category_of(e.kind()) == ErrorCategory::Data);
      CHECK(std::string(e.what()).find("missing.json") != std::string::npos);
    }
  }

  TEST_CASE("png round trip preserves 8-bit values") {
    const Image img = make_stop_sign(20);
    const Image back = decode_png(encode_png(img));
    CHECK(back.to_bytes() == img.to_bytes());
  }
}

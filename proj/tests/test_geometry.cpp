#include <advig/geometry.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

#include <algorithm>
#include <set>
#include <vector>

using namespace advig;

namespace {

PixelSet pixels_of(std::vector<Point> pts, FrameDims dims) {
  return PixelSet::from_points(dims, std::move(pts));
}

// Random instance generators reaching slightly outside the frame so the
// clipping paths stay covered.
Point random_point(detail::Rng& rng, FrameDims dims, int slack = 8) {
  return Point{rng.uniform_int(-slack, dims.width - 1 + slack),
               rng.uniform_int(-slack, dims.height - 1 + slack)};
}

FrameDims random_dims(detail::Rng& rng) {
  return FrameDims{rng.uniform_int(8, 160), rng.uniform_int(8, 120)};
}

}  // namespace

TEST_CASE("rect basics", "[geometry]") {
  const Rect r{2, 3, 10, 7};
  REQUIRE(r.width() == 8);
  REQUIRE(r.height() == 4);
  REQUIRE(r.area() == 32);
  REQUIRE_FALSE(r.empty());
  REQUIRE(r.contains(2, 3));
  REQUIRE_FALSE(r.contains(10, 3));
  REQUIRE(Rect{}.empty());
  REQUIRE(Rect{5, 5, 5, 9}.empty());
  REQUIRE(r.intersect(Rect{0, 0, 4, 5}) == Rect{2, 3, 4, 5});
  REQUIRE(r.intersect(Rect{100, 100, 120, 120}).empty());
}

TEST_CASE("mask construction and bounding box", "[geometry]") {
  const Mask full = Mask::full(6, 4);
  REQUIRE(mask_bbox(full) == Rect{0, 0, 6, 4});

  const Mask boxed = Mask::from_rect(20, 10, Rect{3, 2, 8, 9});
  REQUIRE(mask_bbox(boxed) == Rect{3, 2, 8, 9});
  REQUIRE(boxed.at(3, 2));
  REQUIRE_FALSE(boxed.at(2, 2));

  // Out-of-frame parts of the rectangle fall away.
  const Mask clipped = Mask::from_rect(10, 10, Rect{6, -5, 30, 4});
  REQUIRE(mask_bbox(clipped) == Rect{6, 0, 10, 4});

  Mask empty;
  empty.width = 5;
  empty.height = 5;
  empty.bits.assign(25, 0);
  REQUIRE(mask_bbox(empty).empty());
}

TEST_CASE("line rasterization fixed cases", "[geometry][lines]") {
  SECTION("axis-aligned segment covers exactly its row") {
    LineSetParams p{{Point{0, 5}, Point{9, 5}}, 1};
    const PixelSet got = rasterize_lines(p, FrameDims{10, 10});
    std::vector<Point> want;
    for (int x = 0; x <= 9; ++x) want.push_back(Point{x, 5});
    REQUIRE(got == pixels_of(want, FrameDims{10, 10}));
    REQUIRE(got.size() == 10);
  }

  SECTION("zero-length segment is a single pixel") {
    LineSetParams p{{Point{3, 3}, Point{3, 3}}, 1};
    const PixelSet got = rasterize_lines(p, FrameDims{10, 10});
    REQUIRE(got == pixels_of({Point{3, 3}}, FrameDims{10, 10}));
  }

  SECTION("shallow diagonal matches the digital-line trace") {
    LineSetParams p{{Point{0, 0}, Point{7, 3}}, 1};
    const PixelSet got = rasterize_lines(p, FrameDims{8, 8});
    const std::vector<Point> want = {{0, 0}, {1, 0}, {2, 1}, {3, 1},
                                     {4, 2}, {5, 2}, {6, 3}, {7, 3}};
    REQUIRE(got == pixels_of(want, FrameDims{8, 8}));
    REQUIRE(got == testoracle::line_set_pixels(p, FrameDims{8, 8}));
  }

  SECTION("thickness dilates with the square element") {
    LineSetParams p{{Point{5, 5}, Point{5, 5}}, 3};
    const PixelSet got = rasterize_lines(p, FrameDims{11, 11});
    REQUIRE(got.size() == 9);  // 3x3 block around the point
    LineSetParams p2{{Point{0, 0}, Point{0, 0}}, 2};
    // Side-2 element anchors on the pixel and extends toward +x/+y.
    REQUIRE(rasterize_lines(p2, FrameDims{4, 4}).size() == 4);
  }

  SECTION("invalid inputs are rejected") {
    REQUIRE_THROWS_AS(rasterize_lines(LineSetParams{{}, 1}, FrameDims{4, 4}),
                      InvalidParameter);
    REQUIRE_THROWS_AS(
        rasterize_lines(LineSetParams{{Point{0, 0}}, 1}, FrameDims{4, 4}),
        InvalidParameter);
    REQUIRE_THROWS_AS(
        rasterize_lines(LineSetParams{{Point{0, 0}, Point{1, 1}}, 0},
                        FrameDims{4, 4}),
        InvalidParameter);
  }
}

TEST_CASE("polygon rasterization fixed cases", "[geometry][polygon]") {
  SECTION("fully degenerate triangle is one pixel") {
    PolygonParams p{{Point{4, 4}, Point{4, 4}, Point{4, 4}}};
    REQUIRE(rasterize_polygon(p, FrameDims{10, 10}) ==
            pixels_of({Point{4, 4}}, FrameDims{10, 10}));
  }

  SECTION("right triangle equals the half-plane scan") {
    PolygonParams p{{Point{0, 0}, Point{0, 4}, Point{4, 0}}};
    const PixelSet got = rasterize_polygon(p, FrameDims{10, 10});
    REQUIRE(got == testoracle::triangle_pixels_half_plane(
                       Point{0, 0}, Point{0, 4}, Point{4, 0},
                       FrameDims{10, 10}));
    REQUIRE(got == testoracle::polygon_pixels(p, FrameDims{10, 10}));
  }

  SECTION("collinear vertices fall back to the thin segment") {
    PolygonParams p{{Point{1, 1}, Point{5, 5}, Point{3, 3}}};
    const PixelSet got = rasterize_polygon(p, FrameDims{8, 8});
    REQUIRE(got == testoracle::polygon_pixels(p, FrameDims{8, 8}));
    REQUIRE_FALSE(got.empty());
  }

  SECTION("fewer than three vertices is invalid") {
    REQUIRE_THROWS_AS(rasterize_polygon(PolygonParams{{Point{0, 0}, Point{1, 1}}},
                                        FrameDims{4, 4}),
                      InvalidParameter);
  }
}

TEST_CASE("ellipse rasterization fixed cases", "[geometry][ellipse]") {
  SECTION("unit disc under the closed inequality") {
    EllipseParams p{Point{5, 5}, 1, 1};
    const PixelSet got = rasterize_ellipse(p, FrameDims{11, 11});
    REQUIRE(got == pixels_of({{5, 5}, {4, 5}, {6, 5}, {5, 4}, {5, 6}},
                             FrameDims{11, 11}));
  }

  SECTION("corner center clips to three pixels") {
    EllipseParams p{Point{0, 0}, 1, 1};
    const PixelSet got = rasterize_ellipse(p, FrameDims{11, 11});
    REQUIRE(got == pixels_of({{0, 0}, {1, 0}, {0, 1}}, FrameDims{11, 11}));
  }

  SECTION("eccentric ellipse count matches the exhaustive scan") {
    EllipseParams p{Point{20, 20}, 7, 3};
    const PixelSet got = rasterize_ellipse(p, FrameDims{41, 41});
    const PixelSet want = testoracle::ellipse_pixels(p, FrameDims{41, 41});
    REQUIRE(got.size() == want.size());
    REQUIRE(got == want);
  }

  SECTION("non-positive axes are invalid") {
    REQUIRE_THROWS_AS(
        rasterize_ellipse(EllipseParams{Point{2, 2}, 0, 1}, FrameDims{5, 5}),
        InvalidParameter);
    REQUIRE_THROWS_AS(
        rasterize_ellipse(EllipseParams{Point{2, 2}, 1, -3}, FrameDims{5, 5}),
        InvalidParameter);
  }
}

TEST_CASE("rasterizers equal the membership oracles on random instances",
          "[geometry][property]") {
  detail::Rng rng(20240811);

  SECTION("line sets") {
    for (int i = 0; i < 220; ++i) {
      const FrameDims dims = random_dims(rng);
      LineSetParams p;
      p.thickness = rng.uniform_int(1, 5);
      const int segments = rng.uniform_int(1, 4);
      for (int s = 0; s < 2 * segments; ++s)
        p.endpoints.push_back(random_point(rng, dims));
      REQUIRE(rasterize_lines(p, dims) == testoracle::line_set_pixels(p, dims));
    }
  }

  SECTION("polygons") {
    for (int i = 0; i < 220; ++i) {
      const FrameDims dims = random_dims(rng);
      PolygonParams p;
      const int k = rng.uniform_int(3, 9);
      for (int v = 0; v < k; ++v) p.vertices.push_back(random_point(rng, dims));
      REQUIRE(rasterize_polygon(p, dims) ==
              testoracle::polygon_pixels(p, dims));
    }
  }

  SECTION("ellipses") {
    for (int i = 0; i < 220; ++i) {
      const FrameDims dims = random_dims(rng);
      EllipseParams p;
      p.center = random_point(rng, dims, 16);
      p.semi_axis_h = rng.uniform_int(1, 60);
      p.semi_axis_v = rng.uniform_int(1, 60);
      REQUIRE(rasterize_ellipse(p, dims) ==
              testoracle::ellipse_pixels(p, dims));
    }
  }

  SECTION("rasterization is deterministic") {
    for (int i = 0; i < 20; ++i) {
      const FrameDims dims = random_dims(rng);
      EllipseParams p{random_point(rng, dims), rng.uniform_int(1, 30),
                      rng.uniform_int(1, 30)};
      REQUIRE(rasterize_ellipse(p, dims) == rasterize_ellipse(p, dims));
    }
  }
}

TEST_CASE("clip_to_mask", "[geometry]") {
  detail::Rng rng(77001);

  SECTION("all-false mask empties any set") {
    const PixelSet shape =
        rasterize_ellipse(EllipseParams{Point{5, 5}, 3, 3}, FrameDims{12, 12});
    Mask off;
    off.width = 12;
    off.height = 12;
    off.bits.assign(144, 0);
    REQUIRE(clip_to_mask(shape, off).empty());
  }

  SECTION("all-true mask is the identity") {
    const PixelSet shape =
        rasterize_ellipse(EllipseParams{Point{5, 5}, 3, 3}, FrameDims{12, 12});
    REQUIRE(clip_to_mask(shape, Mask::full(12, 12)) == shape);
  }

  SECTION("random shapes against rectangle masks match set intersection") {
    for (int i = 0; i < 50; ++i) {
      const FrameDims dims = random_dims(rng);
      EllipseParams p{random_point(rng, dims), rng.uniform_int(1, 40),
                      rng.uniform_int(1, 40)};
      const PixelSet shape = rasterize_ellipse(p, dims);
      const Rect window{rng.uniform_int(0, dims.width / 2),
                        rng.uniform_int(0, dims.height / 2),
                        rng.uniform_int(dims.width / 2, dims.width),
                        rng.uniform_int(dims.height / 2, dims.height)};
      const Mask mask = Mask::from_rect(dims.width, dims.height, window);
      const PixelSet got = clip_to_mask(shape, mask);

      std::vector<Point> want;
      for (const Point& q : shape.pixels)
        if (mask.at(q.x, q.y)) want.push_back(q);
      REQUIRE(got == pixels_of(want, dims));

      // Subset of both inputs.
      for (const Point& q : got.pixels) {
        REQUIRE(mask.at(q.x, q.y));
        REQUIRE(std::binary_search(shape.pixels.begin(), shape.pixels.end(), q,
                                   point_less));
      }
    }
  }

  SECTION("dimension mismatch is rejected") {
    const PixelSet shape =
        rasterize_ellipse(EllipseParams{Point{2, 2}, 1, 1}, FrameDims{8, 8});
    REQUIRE_THROWS_AS(clip_to_mask(shape, Mask::full(9, 8)), InvalidParameter);
  }
}

TEST_CASE("clamp_params", "[geometry]") {
  const Rect bbox{10, 20, 51, 121};  // inclusive coordinate ranges [10,50] x [20,120]

  SECTION("specs already inside come back unchanged") {
    PerturbationSpec spec;
    spec.shape = PolygonParams{{Point{10, 20}, Point{50, 120}, Point{30, 60}}};
    REQUIRE(clamp_params(spec, bbox) == spec);
  }

  SECTION("out-of-range vertex clamps coordinate-wise") {
    PerturbationSpec spec;
    spec.shape = PolygonParams{{Point{-5, 300}, Point{20, 30}, Point{40, 40}}};
    const PerturbationSpec got = clamp_params(spec, bbox);
    const auto& poly = std::get<PolygonParams>(got.shape);
    REQUIRE(poly.vertices[0] == Point{10, 120});
    REQUIRE(poly.vertices[1] == Point{20, 30});
  }

  SECTION("ellipse axes clamp to half the box side") {
    PerturbationSpec spec;
    spec.shape = EllipseParams{Point{20, 60}, 999, 7};
    const Rect wide{0, 0, 40, 100};
    const auto& e = std::get<EllipseParams>(clamp_params(spec, wide).shape);
    REQUIRE(e.semi_axis_h == 20);
    REQUIRE(e.semi_axis_v == 7);
  }

  SECTION("clamping is idempotent on random specs") {
    detail::Rng rng(5150);
    for (int i = 0; i < 200; ++i) {
      PerturbationSpec spec;
      const int pick = rng.uniform_int(0, 2);
      if (pick == 0) {
        LineSetParams p;
        p.thickness = 3;
        for (int k = 0; k < 4; ++k)
          p.endpoints.push_back(
              Point{rng.uniform_int(-200, 200), rng.uniform_int(-200, 200)});
        spec.shape = std::move(p);
      } else if (pick == 1) {
        PolygonParams p;
        for (int k = 0; k < 5; ++k)
          p.vertices.push_back(
              Point{rng.uniform_int(-200, 200), rng.uniform_int(-200, 200)});
        spec.shape = std::move(p);
      } else {
        spec.shape = EllipseParams{
            Point{rng.uniform_int(-200, 200), rng.uniform_int(-200, 200)},
            rng.uniform_int(-10, 400), rng.uniform_int(-10, 400)};
      }
      const PerturbationSpec once = clamp_params(spec, bbox);
      REQUIRE(clamp_params(once, bbox) == once);
    }
  }

  SECTION("empty box is invalid") {
    PerturbationSpec spec;
    spec.shape = EllipseParams{Point{0, 0}, 1, 1};
    REQUIRE_THROWS_AS(clamp_params(spec, Rect{}), InvalidParameter);
  }
}

TEST_CASE("random_params", "[geometry]") {
  const Rect bbox{0, 0, 40, 100};

  SECTION("same seed reproduces the spec") {
    const ShapeFamily family{ShapeKind::polygon, 2, 5, 3};
    REQUIRE(random_params(family, bbox, 42) == random_params(family, bbox, 42));
  }

  SECTION("draws are clamp fixed points") {
    detail::Rng seeds(99);
    for (const ShapeKind kind :
         {ShapeKind::lines, ShapeKind::polygon, ShapeKind::ellipse}) {
      ShapeFamily family;
      family.kind = kind;
      for (int i = 0; i < 340; ++i) {
        const PerturbationSpec spec =
            random_params(family, bbox, seeds.next());
        REQUIRE(clamp_params(spec, bbox) == spec);
      }
    }
  }

  SECTION("ellipse axes follow the declared uniform ranges") {
    ShapeFamily family;
    family.kind = ShapeKind::ellipse;
    double sum_h = 0, sum_v = 0;
    const int n = 1000;
    detail::Rng seeds(4242);
    for (int i = 0; i < n; ++i) {
      const auto& e = std::get<EllipseParams>(
          random_params(family, bbox, seeds.next()).shape);
      REQUIRE(e.semi_axis_h >= 1);
      REQUIRE(e.semi_axis_h <= 20);
      REQUIRE(e.semi_axis_v >= 1);
      REQUIRE(e.semi_axis_v <= 50);
      sum_h += e.semi_axis_h;
      sum_v += e.semi_axis_v;
    }
    // Means of uniform [1,20] and [1,50] within 10%.
    REQUIRE(sum_h / n > 10.5 * 0.9);
    REQUIRE(sum_h / n < 10.5 * 1.1);
    REQUIRE(sum_v / n > 25.5 * 0.9);
    REQUIRE(sum_v / n < 25.5 * 1.1);
  }
}

TEST_CASE("shape family dimensions", "[geometry]") {
  REQUIRE(ShapeFamily{ShapeKind::lines, 2, 3, 3}.dimension() == 8);
  REQUIRE(ShapeFamily{ShapeKind::lines, 1, 3, 3}.dimension() == 4);
  REQUIRE(ShapeFamily{ShapeKind::polygon, 2, 5, 3}.dimension() == 10);
  REQUIRE(ShapeFamily{ShapeKind::ellipse, 2, 3, 3}.dimension() == 4);
  REQUIRE_THROWS_AS((ShapeFamily{ShapeKind::lines, 0, 3, 3}.validate()),
                    InvalidParameter);
  REQUIRE_THROWS_AS((ShapeFamily{ShapeKind::polygon, 2, 2, 3}.validate()),
                    InvalidParameter);
}

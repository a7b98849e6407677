#include <catch2/catch_amalgamated.hpp>

#include "zoomclick/geometry.hpp"
#include "zoomclick/rng.hpp"

using namespace zoomclick;

TEST_CASE("map_to_original follows the viewport affine map")
{
    const NormPoint a = map_to_original({0.5, 0.5}, Viewport::full());
    CHECK(a.x == Catch::Approx(0.5));
    CHECK(a.y == Catch::Approx(0.5));

    const NormPoint b = map_to_original({0.5, 0.5}, {0.25, 0.25, 0.75, 0.75});
    CHECK(b.x == Catch::Approx(0.5));
    CHECK(b.y == Catch::Approx(0.5));

    const NormPoint c = map_to_original({0.0, 1.0}, {0.2, 0.1, 0.6, 0.5});
    CHECK(c.x == Catch::Approx(0.2));
    CHECK(c.y == Catch::Approx(0.5));
}

TEST_CASE("to_pixels rounds half away from zero and clamps")
{
    CHECK(to_pixels({0.5, 0.5}, 1920, 1080) == PixelPoint{960, 540});
    CHECK(to_pixels({1.0, 1.0}, 100, 100) == PixelPoint{99, 99});
    CHECK(to_pixels({0.333, 0.667}, 1000, 1000) == PixelPoint{333, 667});
    // .5 boundary rounds up for positive values
    CHECK(to_pixels({0.25, 0.25}, 2, 2) == PixelPoint{1, 1});
    CHECK(to_pixels({0.0, 0.0}, 10, 10) == PixelPoint{0, 0});
}

TEST_CASE("patch_grid tiles the image with remainders in the last row/col")
{
    const auto even = patch_grid(1000, 800, 2, 2);
    REQUIRE(even.size() == 4);
    CHECK(even[0] == PixelBox{0, 0, 500, 400});
    CHECK(even[1] == PixelBox{500, 0, 500, 400});
    CHECK(even[2] == PixelBox{0, 400, 500, 400});
    CHECK(even[3] == PixelBox{500, 400, 500, 400});

    const auto odd = patch_grid(101, 101, 2, 2);
    REQUIRE(odd.size() == 4);
    CHECK(odd[0] == PixelBox{0, 0, 50, 50});
    CHECK(odd[1] == PixelBox{50, 0, 51, 50});
    CHECK(odd[2] == PixelBox{0, 50, 50, 51});
    CHECK(odd[3] == PixelBox{50, 50, 51, 51});

    const auto identity = patch_grid(64, 64, 1, 1);
    REQUIRE(identity.size() == 1);
    CHECK(identity[0] == PixelBox{0, 0, 64, 64});

    CHECK_THROWS_AS(patch_grid(1, 10, 1, 2), std::invalid_argument);
    CHECK_THROWS_AS(patch_grid(10, 10, 0, 2), std::invalid_argument);
}

TEST_CASE("next_crop_size applies the shrink ratio with the context floor")
{
    CHECK(next_crop_size(3840, 2160, 0.5, 768) == std::pair{1920, 1080});
    CHECK(next_crop_size(1000, 900, 0.5, 768) == std::pair{768, 768});
    CHECK(next_crop_size(500, 500, 0.25, 100) == std::pair{125, 125});
    // floor larger than the current view clamps to the view
    CHECK(next_crop_size(600, 400, 0.5, 768) == std::pair{600, 400});

    CHECK_THROWS_AS(next_crop_size(100, 100, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(next_crop_size(100, 100, 1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(next_crop_size(100, 100, 0.5, 0), std::invalid_argument);
}

TEST_CASE("place_window boundary modes")
{
    const PixelPoint center{50, 50};
    CHECK(place_window(center, 400, 400, 1000, 1000, BoundaryMode::Shift) ==
          PixelBox{0, 0, 400, 400});
    CHECK(place_window(center, 400, 400, 1000, 1000, BoundaryMode::Clip) ==
          PixelBox{0, 0, 250, 250});
    CHECK(place_window(center, 400, 400, 1000, 1000, BoundaryMode::Shrink) ==
          PixelBox{0, 0, 100, 100});

    // interior center keeps the full window in every mode
    for (const auto mode :
         {BoundaryMode::Shift, BoundaryMode::Clip, BoundaryMode::Shrink}) {
        const auto b = place_window({500, 500}, 400, 300, 1000, 1000, mode);
        CHECK(b == PixelBox{300, 350, 400, 300});
    }

    // corner center under shrink degrades to a single pixel
    const auto corner =
        place_window({0, 0}, 400, 400, 1000, 1000, BoundaryMode::Shrink);
    CHECK(corner == PixelBox{0, 0, 1, 1});

    CHECK_THROWS_AS(place_window({50, 50}, 2000, 10, 1000, 1000,
                                 BoundaryMode::Shift),
                    std::invalid_argument);
    CHECK_THROWS_AS(place_window({-1, 0}, 10, 10, 1000, 1000,
                                 BoundaryMode::Shift),
                    std::invalid_argument);
}

TEST_CASE("viewport_from_box normalizes exactly")
{
    CHECK(viewport_from_box({0, 0, 1000, 1000}, 1000, 1000) ==
          Viewport{0, 0, 1, 1});
    CHECK(viewport_from_box({250, 250, 500, 500}, 1000, 1000) ==
          Viewport{0.25, 0.25, 0.75, 0.75});
    CHECK(viewport_from_box({100, 0, 300, 200}, 400, 400) ==
          Viewport{0.25, 0.0, 1.0, 0.5});
    CHECK_THROWS_AS(viewport_from_box({0, 0, 1001, 10}, 1000, 1000),
                    std::invalid_argument);
}

TEST_CASE("point_in_box is half-open")
{
    CHECK(point_in_box({10, 10}, {0, 0, 20, 20}));
    CHECK_FALSE(point_in_box({20, 10}, {0, 0, 20, 20}));
    CHECK(point_in_box({0, 0}, {0, 0, 1, 1}));
    CHECK_FALSE(point_in_box({0, 1}, {0, 0, 1, 1}));
}

TEST_CASE("geometry randomized invariants")
{
    SplitMix64 rng(20260810);
    for (int i = 0; i < 1000; ++i) {
        const int img_w = rng.uniform_int(8, 4000);
        const int img_h = rng.uniform_int(8, 4000);

        // round trip: mapped point stays inside the viewport
        PixelBox box{0, 0, 0, 0};
        box.width = rng.uniform_int(1, img_w);
        box.height = rng.uniform_int(1, img_h);
        box.left = rng.uniform_int(0, img_w - box.width);
        box.top = rng.uniform_int(0, img_h - box.height);
        const Viewport v = viewport_from_box(box, img_w, img_h);
        const NormPoint p{rng.uniform(), rng.uniform()};
        const NormPoint mapped = map_to_original(p, v);
        CHECK(v.contains(mapped));

        // composition consistency: viewport mapping equals direct crop-pixel
        // arithmetic
        const double direct_x = box.left + p.x * box.width;
        const double direct_y = box.top + p.y * box.height;
        CHECK(std::abs(mapped.x * img_w - direct_x) < 1e-6);
        CHECK(std::abs(mapped.y * img_h - direct_y) < 1e-6);

        // boundary modes: shift preserves size, all modes stay inside
        const PixelPoint center{rng.uniform_int(0, img_w - 1),
                                rng.uniform_int(0, img_h - 1)};
        const int w = rng.uniform_int(1, img_w);
        const int h = rng.uniform_int(1, img_h);
        for (const auto mode :
             {BoundaryMode::Shift, BoundaryMode::Clip, BoundaryMode::Shrink}) {
            const PixelBox placed =
                place_window(center, w, h, img_w, img_h, mode);
            CHECK(placed.left >= 0);
            CHECK(placed.top >= 0);
            CHECK(placed.right() <= img_w);
            CHECK(placed.bottom() <= img_h);
            CHECK(placed.width >= 1);
            CHECK(placed.height >= 1);
            if (mode == BoundaryMode::Shift) {
                CHECK(placed.width == w);
                CHECK(placed.height == h);
            } else {
                CHECK(placed.width <= w);
                CHECK(placed.height <= h);
            }
            if (mode == BoundaryMode::Shrink) {
                CHECK(std::abs(2 * center.x - (2 * placed.left + placed.width)) <=
                      2);
                CHECK(std::abs(2 * center.y - (2 * placed.top + placed.height)) <=
                      2);
            }
        }

        // grid partition: disjoint, union exact
        const int rows = rng.uniform_int(1, 4);
        const int cols = rng.uniform_int(1, 4);
        if (img_w >= cols && img_h >= rows) {
            const auto tiles = patch_grid(img_w, img_h, rows, cols);
            long long area = 0;
            for (const auto& t : tiles) {
                area += static_cast<long long>(t.width) * t.height;
            }
            CHECK(area == static_cast<long long>(img_w) * img_h);
            for (size_t a = 0; a < tiles.size(); ++a) {
                for (size_t b = a + 1; b < tiles.size(); ++b) {
                    CHECK(intersect(tiles[a], tiles[b]).empty());
                }
            }
        }

        // repeated shrinks never grow and respect the floor
        int cw = img_w;
        int ch = img_h;
        const double rho = 0.2 + 0.6 * rng.uniform();
        const int m = rng.uniform_int(1, 1024);
        for (int step = 0; step < 6; ++step) {
            const auto [nw, nh] = next_crop_size(cw, ch, rho, m);
            CHECK(nw <= cw);
            CHECK(nh <= ch);
            CHECK(nw >= std::min(m, img_w));
            CHECK(nh >= std::min(m, img_h));
            cw = nw;
            ch = nh;
        }
    }
}

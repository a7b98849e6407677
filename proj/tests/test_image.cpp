#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "zoomclick/image.hpp"
#include "zoomclick/image_io.hpp"

using namespace zoomclick;

namespace {

Image checkerboard(int w, int h)
{
    std::vector<uint8_t> px(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const uint8_t v = ((x / 4 + y / 4) % 2) ? 255 : 0;
            const size_t i = (static_cast<size_t>(y) * w + x) * 3;
            px[i] = v;
            px[i + 1] = static_cast<uint8_t>(x % 256);
            px[i + 2] = static_cast<uint8_t>(y % 256);
        }
    }
    return Image(w, h, std::move(px));
}

} // namespace

TEST_CASE("synthetic images carry dimensions only")
{
    const Image img = Image::synthetic(640, 480);
    CHECK(img.width() == 640);
    CHECK(img.height() == 480);
    CHECK_FALSE(img.has_pixels());
    const Image crop = img.crop({10, 20, 100, 50});
    CHECK(crop.width() == 100);
    CHECK(crop.height() == 50);
    CHECK_FALSE(crop.has_pixels());
    CHECK_THROWS_AS(img.crop({600, 0, 100, 10}), std::invalid_argument);
}

TEST_CASE("crop copies the exact region")
{
    const Image img = checkerboard(64, 48);
    const PixelBox box{5, 7, 20, 10};
    const Image crop = img.crop(box);
    REQUIRE(crop.has_pixels());
    for (int y = 0; y < box.height; ++y) {
        for (int x = 0; x < box.width; ++x) {
            const size_t src =
                ((static_cast<size_t>(y) + box.top) * 64 + x + box.left) * 3;
            const size_t dst = (static_cast<size_t>(y) * box.width + x) * 3;
            REQUIRE(img.pixels()[src] == crop.pixels()[dst]);
            REQUIRE(img.pixels()[src + 1] == crop.pixels()[dst + 1]);
            REQUIRE(img.pixels()[src + 2] == crop.pixels()[dst + 2]);
        }
    }
}

TEST_CASE("png encode/decode round trip")
{
    const Image img = checkerboard(33, 21);
    const auto tmp = std::filesystem::temp_directory_path() /
        "zoomclick_test_roundtrip.png";
    save_png(img, tmp.string());
    const Image back = load_image(tmp.string());
    REQUIRE(back.width() == img.width());
    REQUIRE(back.height() == img.height());
    CHECK(back.pixels() == img.pixels()); // png is lossless
    std::filesystem::remove(tmp);

    CHECK_THROWS(load_image("/nonexistent/zoomclick.png"));
    CHECK_THROWS(encode_png(Image::synthetic(4, 4)));
}

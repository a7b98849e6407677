#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "zoomclick/geometry.hpp"

namespace zoomclick {

/// A screenshot the pipeline zooms into. Pixels are interleaved RGB8. A
/// dimensions-only image (no pixel buffer) is valid: synthetic evaluation
/// runs entirely on geometry, and only backends that ship pixels to a model
/// ever need the buffer.
class Image {
public:
    Image() = default;

    Image(int width, int height, std::vector<uint8_t> rgb)
        : width_(width), height_(height), pixels_(std::move(rgb))
    {
        if (width_ < 1 || height_ < 1) {
            throw std::invalid_argument("Image: degenerate dimensions");
        }
        if (pixels_.size() != static_cast<size_t>(width_) * height_ * 3) {
            throw std::invalid_argument("Image: pixel buffer size mismatch");
        }
    }

    /// Dimensions-only image for synthetic runs.
    static Image synthetic(int width, int height)
    {
        if (width < 1 || height < 1) {
            throw std::invalid_argument("Image: degenerate dimensions");
        }
        Image img;
        img.width_ = width;
        img.height_ = height;
        return img;
    }

    int width() const { return width_; }
    int height() const { return height_; }
    PixelBox bounds() const { return {0, 0, width_, height_}; }
    bool has_pixels() const { return !pixels_.empty(); }
    const std::vector<uint8_t>& pixels() const { return pixels_; }

    /// Copy out a region. The region must lie inside the image.
    Image crop(const PixelBox& box) const
    {
        if (box.empty() || box.left < 0 || box.top < 0 ||
            box.right() > width_ || box.bottom() > height_) {
            throw std::invalid_argument("Image::crop: box outside image");
        }
        if (!has_pixels()) {
            return synthetic(box.width, box.height);
        }
        std::vector<uint8_t> out(static_cast<size_t>(box.width) * box.height * 3);
        const size_t src_stride = static_cast<size_t>(width_) * 3;
        const size_t dst_stride = static_cast<size_t>(box.width) * 3;
        for (int r = 0; r < box.height; ++r) {
            const uint8_t* src =
                pixels_.data() + (box.top + r) * src_stride + box.left * 3;
            std::copy(src, src + dst_stride, out.data() + r * dst_stride);
        }
        return Image(box.width, box.height, std::move(out));
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> pixels_;
};

} // namespace zoomclick

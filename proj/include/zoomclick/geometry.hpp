#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace zoomclick {

/// Point in normalized [0,1] coordinates relative to some view.
struct NormPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Integer pixel location in a concrete image (column, row).
struct PixelPoint {
    int x = 0;
    int y = 0;
};

inline bool operator==(const PixelPoint& a, const PixelPoint& b)
{
    return a.x == b.x && a.y == b.y;
}

/// Euclidean distance in pixels.
inline double pixel_distance(const PixelPoint& a, const PixelPoint& b)
{
    const double dx = static_cast<double>(a.x) - b.x;
    const double dy = static_cast<double>(a.y) - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

/// Normalized rectangle over the original image. The pipeline's spatial
/// state: every crop is expressed as a viewport so that predictions made on
/// it can be mapped straight back to original-image coordinates.
struct Viewport {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 1.0;
    double y2 = 1.0;

    static Viewport full() { return {0.0, 0.0, 1.0, 1.0}; }

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }

    bool valid() const
    {
        return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 &&
            y2 <= 1.0;
    }

    bool contains(const NormPoint& p) const
    {
        return x1 <= p.x && p.x <= x2 && y1 <= p.y && p.y <= y2;
    }
};

inline bool operator==(const Viewport& a, const Viewport& b)
{
    return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}

/// Pixel rectangle spanning [left, left+width) x [top, top+height).
struct PixelBox {
    int left = 0;
    int top = 0;
    int width = 0;
    int height = 0;

    int right() const { return left + width; }
    int bottom() const { return top + height; }
    bool empty() const { return width <= 0 || height <= 0; }

    /// Center pixel (floor of the true midpoint for even sizes).
    PixelPoint center() const
    {
        return {left + width / 2, top + height / 2};
    }
};

inline bool operator==(const PixelBox& a, const PixelBox& b)
{
    return a.left == b.left && a.top == b.top && a.width == b.width &&
        a.height == b.height;
}

/// Intersection of two boxes; empty (0x0 at origin) when disjoint.
inline PixelBox intersect(const PixelBox& a, const PixelBox& b)
{
    const int l = std::max(a.left, b.left);
    const int t = std::max(a.top, b.top);
    const int r = std::min(a.right(), b.right());
    const int bo = std::min(a.bottom(), b.bottom());
    if (r <= l || bo <= t) {
        return {0, 0, 0, 0};
    }
    return {l, t, r - l, bo - t};
}

/// Policy for a crop window that would cross the image edge.
enum class BoundaryMode {
    Shift,  ///< keep size, translate the window back inside
    Clip,   ///< keep center, trim the overflowing sides
    Shrink, ///< keep center, reduce the window until it fits
};

inline const char* to_string(BoundaryMode mode)
{
    switch (mode) {
        case BoundaryMode::Shift: return "shift";
        case BoundaryMode::Clip: return "clip";
        case BoundaryMode::Shrink: return "shrink";
    }
    return "?";
}

inline BoundaryMode boundary_mode_from_string(const std::string& s)
{
    if (s == "shift") return BoundaryMode::Shift;
    if (s == "clip") return BoundaryMode::Clip;
    if (s == "shrink") return BoundaryMode::Shrink;
    throw std::invalid_argument("unknown boundary mode: " + s);
}

/// Map a point predicted on a view back to original-image normalized
/// coordinates. The result always lies inside the viewport.
inline NormPoint map_to_original(const NormPoint& p, const Viewport& v)
{
    return {v.x1 + (v.x2 - v.x1) * p.x, v.y1 + (v.y2 - v.y1) * p.y};
}

/// Convert a normalized point to integer pixels. Rounds half away from zero
/// and clamps to valid pixel indices.
inline PixelPoint to_pixels(const NormPoint& p, int width, int height)
{
    if (width < 1 || height < 1) {
        throw std::invalid_argument("to_pixels: degenerate image dimensions");
    }
    const auto px = static_cast<int>(std::llround(width * p.x));
    const auto py = static_cast<int>(std::llround(height * p.y));
    return {std::clamp(px, 0, width - 1), std::clamp(py, 0, height - 1)};
}

/// Split an image into a rows x cols grid of disjoint tiles, row-major.
/// Remainder pixels from the integer division go to the last row/column, so
/// the union of the tiles is exactly the image.
inline std::vector<PixelBox> patch_grid(int width, int height, int rows,
                                        int cols)
{
    if (rows < 1 || cols < 1 || width < cols || height < rows) {
        throw std::invalid_argument("patch_grid: degenerate grid");
    }
    const int base_w = width / cols;
    const int base_h = height / rows;
    std::vector<PixelBox> tiles;
    tiles.reserve(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        const int top = r * base_h;
        const int h = (r == rows - 1) ? height - top : base_h;
        for (int c = 0; c < cols; ++c) {
            const int left = c * base_w;
            const int w = (c == cols - 1) ? width - left : base_w;
            tiles.push_back({left, top, w, h});
        }
    }
    return tiles;
}

/// Next crop size: componentwise max of the floored shrink and the minimum
/// crop size m, clamped so the crop never exceeds the current view
/// (and therefore never exceeds the image).
inline std::pair<int, int> next_crop_size(int width_t, int height_t,
                                          double rho, int m)
{
    if (!(rho > 0.0 && rho < 1.0)) {
        throw std::invalid_argument("next_crop_size: rho must be in (0,1)");
    }
    if (m < 1) {
        throw std::invalid_argument("next_crop_size: m must be >= 1");
    }
    const int w = std::max(static_cast<int>(std::floor(rho * width_t)), m);
    const int h = std::max(static_cast<int>(std::floor(rho * height_t)), m);
    return {std::min(w, width_t), std::min(h, height_t)};
}

/// Place a w x h window centered at `center` inside an img_w x img_h image,
/// resolving boundary overflow per `mode`.
inline PixelBox place_window(const PixelPoint& center, int w, int h,
                             int img_w, int img_h, BoundaryMode mode)
{
    if (w < 1 || h < 1 || w > img_w || h > img_h) {
        throw std::invalid_argument("place_window: window size out of range");
    }
    if (center.x < 0 || center.x >= img_w || center.y < 0 ||
        center.y >= img_h) {
        throw std::invalid_argument("place_window: center outside image");
    }
    const int ideal_left = center.x - w / 2;
    const int ideal_top = center.y - h / 2;
    switch (mode) {
        case BoundaryMode::Shift: {
            const int left = std::clamp(ideal_left, 0, img_w - w);
            const int top = std::clamp(ideal_top, 0, img_h - h);
            return {left, top, w, h};
        }
        case BoundaryMode::Clip: {
            const int left = std::max(ideal_left, 0);
            const int top = std::max(ideal_top, 0);
            const int right = std::min(ideal_left + w, img_w);
            const int bottom = std::min(ideal_top + h, img_h);
            return {left, top, right - left, bottom - top};
        }
        case BoundaryMode::Shrink: {
            const int ex = std::min({w / 2, center.x, img_w - center.x});
            const int ey = std::min({h / 2, center.y, img_h - center.y});
            const int bw = std::max(2 * ex, 1);
            const int bh = std::max(2 * ey, 1);
            return {center.x - ex, center.y - ey, bw, bh};
        }
    }
    throw std::logic_error("place_window: unreachable");
}

/// Normalize an original-image pixel box into a viewport.
inline Viewport viewport_from_box(const PixelBox& box, int img_w, int img_h)
{
    if (img_w < 1 || img_h < 1 || box.left < 0 || box.top < 0 ||
        box.empty() || box.right() > img_w || box.bottom() > img_h) {
        throw std::invalid_argument("viewport_from_box: box outside image");
    }
    const double w = img_w;
    const double h = img_h;
    return {box.left / w, box.top / h, box.right() / w, box.bottom() / h};
}

/// Half-open membership test: left <= x < left+width, top <= y < top+height.
inline bool point_in_box(const PixelPoint& p, const PixelBox& box)
{
    return p.x >= box.left && p.x < box.right() && p.y >= box.top &&
        p.y < box.bottom();
}

} // namespace zoomclick

#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "zoomclick/image.hpp"

// Image file decode/encode, kept out of image.hpp so the OpenCV headers are
// only paid for by targets that touch real files or remote endpoints.

namespace zoomclick {

inline Image load_image(const std::string& path)
{
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw std::runtime_error("failed to decode image: " + path);
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    std::vector<uint8_t> buf(rgb.total() * 3);
    if (rgb.isContinuous()) {
        std::copy(rgb.data, rgb.data + buf.size(), buf.data());
    } else {
        for (int r = 0; r < rgb.rows; ++r) {
            std::copy(rgb.ptr(r), rgb.ptr(r) + static_cast<size_t>(rgb.cols) * 3,
                      buf.data() + static_cast<size_t>(r) * rgb.cols * 3);
        }
    }
    return Image(rgb.cols, rgb.rows, std::move(buf));
}

/// Lossless PNG bytes of the whole image. Crops sent to endpoints are
/// encoded losslessly so re-compression never perturbs what the model sees.
inline std::string encode_png(const Image& img)
{
    if (!img.has_pixels()) {
        throw std::runtime_error(
            "encode_png: image has no pixel data (synthetic sample?)");
    }
    cv::Mat rgb(img.height(), img.width(), CV_8UC3,
                const_cast<uint8_t*>(img.pixels().data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    std::vector<uchar> out;
    if (!cv::imencode(".png", bgr, out)) {
        throw std::runtime_error("encode_png: PNG encoding failed");
    }
    return std::string(out.begin(), out.end());
}

inline void save_png(const Image& img, const std::string& path)
{
    const std::string bytes = encode_png(img);
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) {
        throw std::runtime_error("save_png: cannot open " + path);
    }
    const size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (n != bytes.size()) {
        throw std::runtime_error("save_png: short write to " + path);
    }
}

} // namespace zoomclick

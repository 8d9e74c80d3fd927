#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <opencv2/core.hpp>

#include "discloc/geometry.hpp"

namespace discloc::cli {

struct PartDot {
    double x = 0.0;
    double y = 0.0;
};

struct Overlay {
    std::vector<geometry::Box> predicted;  // yellow
    std::vector<geometry::Box> ground_truth;  // red
    std::vector<PartDot> parts;
};

/// Draws 2-pixel box outlines (inside the rounded box edges) and 3x3 part
/// dots onto a copy of a BGR 8-bit image. Anything outside the image is
/// clipped.
cv::Mat draw_overlay(const cv::Mat& image, const Overlay& overlay);

/// Decodes `input` (PNG/JPEG), draws the overlay and writes a PNG.
/// Undecodable input raises ImageError.
void render_file(const std::filesystem::path& input, const std::filesystem::path& output, const Overlay& overlay);

/// PNG bytes of `image` with fixed encoder settings.
std::vector<std::uint8_t> encode_png(const cv::Mat& image);

}  // namespace discloc::cli

#include "discloc/cli/render.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>

#include "discloc/errors.hpp"
#include "discloc/tensor.hpp"

namespace discloc::cli {
namespace {

const cv::Vec3b kYellow(0, 255, 255);
const cv::Vec3b kRed(0, 0, 255);
const cv::Vec3b kPartColor(255, 128, 0);

constexpr int kOutline = 2;

void put(cv::Mat& img, long x, long y, const cv::Vec3b& color) {
    if (x < 0 || y < 0 || x >= img.cols || y >= img.rows) return;
    img.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) = color;
}

void fill_rect(cv::Mat& img, long x1, long y1, long x2, long y2, const cv::Vec3b& color) {
    x1 = std::max(x1, 0L);
    y1 = std::max(y1, 0L);
    x2 = std::min(x2, static_cast<long>(img.cols) - 1);
    y2 = std::min(y2, static_cast<long>(img.rows) - 1);
    for (long y = y1; y <= y2; ++y) {
        for (long x = x1; x <= x2; ++x) put(img, x, y, color);
    }
}

void outline(cv::Mat& img, const geometry::Box& box, const cv::Vec3b& color) {
    const long x1 = std::lround(box.x1);
    const long y1 = std::lround(box.y1);
    const long x2 = std::lround(box.x2);
    const long y2 = std::lround(box.y2);
    fill_rect(img, x1, y1, x2, std::min(y2, y1 + kOutline - 1), color);
    fill_rect(img, x1, std::max(y1, y2 - kOutline + 1), x2, y2, color);
    fill_rect(img, x1, y1, std::min(x2, x1 + kOutline - 1), y2, color);
    fill_rect(img, std::max(x1, x2 - kOutline + 1), y1, x2, y2, color);
}

}  // namespace

cv::Mat draw_overlay(const cv::Mat& image, const Overlay& overlay) {
    if (image.type() != CV_8UC3) throw ImageError("overlay expects an 8-bit BGR image");
    cv::Mat out = image.clone();
    for (const auto& b : overlay.ground_truth) outline(out, b, kRed);
    for (const auto& b : overlay.predicted) outline(out, b, kYellow);
    for (const auto& p : overlay.parts) {
        const long x = std::lround(p.x);
        const long y = std::lround(p.y);
        fill_rect(out, x - 1, y - 1, x + 1, y + 1, kPartColor);
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const cv::Mat& image) {
    std::vector<std::uint8_t> bytes;
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6, cv::IMWRITE_PNG_STRATEGY,
                                  cv::IMWRITE_PNG_STRATEGY_DEFAULT};
    if (!cv::imencode(".png", image, bytes, params)) throw ImageError("PNG encoding failed");
    return bytes;
}

void render_file(const std::filesystem::path& input, const std::filesystem::path& output, const Overlay& overlay) {
    cv::Mat image = cv::imread(input.string(), cv::IMREAD_COLOR);
    if (image.empty()) throw ImageError("cannot decode image " + input.string());
    write_file_atomic(output, encode_png(draw_overlay(image, overlay)));
}

}  // namespace discloc::cli

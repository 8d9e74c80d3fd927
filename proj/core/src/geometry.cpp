#include "discloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "discloc/errors.hpp"

namespace discloc::geometry {

double iou(const Box& a, const Box& b) noexcept {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1) + 1.0;
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1) + 1.0;
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

Box clip(const Box& box, ImageSize extent) noexcept {
    const double max_x = static_cast<double>(extent.width) - 1.0;
    const double max_y = static_cast<double>(extent.height) - 1.0;
    return Box{std::clamp(box.x1, 0.0, max_x), std::clamp(box.y1, 0.0, max_y), std::clamp(box.x2, 0.0, max_x),
               std::clamp(box.y2, 0.0, max_y)};
}

AnchorGrid generate_anchors(std::size_t feature_h, std::size_t feature_w, const AnchorConfig& config) {
    if (!(config.stride > 0.0)) throw InvalidArgument("anchor stride must be positive");
    for (double s : config.scales) {
        if (!(s > 0.0)) throw InvalidArgument("anchor scales must be positive");
    }
    for (double r : config.ratios) {
        if (!(r > 0.0)) throw InvalidArgument("anchor ratios must be positive");
    }

    std::array<Box, kAnchorsPerCell> base{};
    std::size_t k = 0;
    for (double ratio : config.ratios) {
        for (double scale : config.scales) {
            const double side = config.stride * scale;
            const double w = side / std::sqrt(ratio);
            const double h = side * std::sqrt(ratio);
            base[k++] = Box{-0.5 * w, -0.5 * h, 0.5 * w - 1.0, 0.5 * h - 1.0};
        }
    }

    std::vector<Box> anchors;
    anchors.reserve(feature_h * feature_w * kAnchorsPerCell);
    for (std::size_t y = 0; y < feature_h; ++y) {
        const double cy = (static_cast<double>(y) + 0.5) * config.stride;
        for (std::size_t x = 0; x < feature_w; ++x) {
            const double cx = (static_cast<double>(x) + 0.5) * config.stride;
            for (const Box& b : base) anchors.push_back(Box{b.x1 + cx, b.y1 + cy, b.x2 + cx, b.y2 + cy});
        }
    }
    return AnchorGrid(feature_h, feature_w, config.stride, base, std::move(anchors));
}

std::vector<std::size_t> nms_indices(std::span<const ScoredBox> candidates, double iou_threshold,
                                     std::size_t max_keep) {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw InvalidArgument("NMS threshold must lie in [0,1]");

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });

    std::vector<std::size_t> keep;
    std::vector<char> suppressed(candidates.size(), 0);
    for (std::size_t i = 0; i < order.size() && keep.size() < max_keep; ++i) {
        const std::size_t cur = order[i];
        if (suppressed[cur]) continue;
        keep.push_back(cur);
        const Box& kept = candidates[cur].box;
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            const std::size_t other = order[j];
            if (!suppressed[other] && iou(kept, candidates[other].box) > iou_threshold) suppressed[other] = 1;
        }
    }
    return keep;
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double iou_threshold, std::size_t max_keep) {
    std::vector<ScoredBox> out;
    for (std::size_t i : nms_indices(candidates, iou_threshold, max_keep)) out.push_back(candidates[i]);
    return out;
}

Tensor3 roi_pool(const Tensor3& features, const Box& roi, double stride, std::size_t out_h, std::size_t out_w) {
    if (!(stride > 0.0)) throw InvalidArgument("roi_pool stride must be positive");
    if (out_h == 0 || out_w == 0) throw InvalidArgument("roi_pool output size must be positive");
    const auto fh = static_cast<long>(features.height());
    const auto fw = static_cast<long>(features.width());
    if (!roi.valid() || fh == 0 || fw == 0) throw DegenerateRoI("RoI has no extent");

    const long x1 = std::max(0L, static_cast<long>(std::floor(roi.x1 / stride)));
    const long y1 = std::max(0L, static_cast<long>(std::floor(roi.y1 / stride)));
    const long x2 = std::min(fw - 1, static_cast<long>(std::ceil(roi.x2 / stride)));
    const long y2 = std::min(fh - 1, static_cast<long>(std::ceil(roi.y2 / stride)));
    if (x2 < x1 || y2 < y1) throw DegenerateRoI("RoI covers no feature cells");

    const double bin_h = static_cast<double>(y2 - y1 + 1) / static_cast<double>(out_h);
    const double bin_w = static_cast<double>(x2 - x1 + 1) / static_cast<double>(out_w);

    std::vector<float> out(features.channels() * out_h * out_w, 0.0f);
    for (std::size_t ph = 0; ph < out_h; ++ph) {
        const long hs = std::clamp(y1 + static_cast<long>(std::floor(static_cast<double>(ph) * bin_h)), y1, y2 + 1);
        const long he = std::clamp(y1 + static_cast<long>(std::ceil(static_cast<double>(ph + 1) * bin_h)), y1, y2 + 1);
        for (std::size_t pw = 0; pw < out_w; ++pw) {
            const long ws = std::clamp(x1 + static_cast<long>(std::floor(static_cast<double>(pw) * bin_w)), x1, x2 + 1);
            const long we = std::clamp(x1 + static_cast<long>(std::ceil(static_cast<double>(pw + 1) * bin_w)), x1, x2 + 1);
            if (he <= hs || we <= ws) continue;
            for (std::size_t c = 0; c < features.channels(); ++c) {
                float best = -std::numeric_limits<float>::infinity();
                for (long y = hs; y < he; ++y) {
                    for (long x = ws; x < we; ++x) {
                        best = std::max(best, features.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
                    }
                }
                out[(c * out_h + ph) * out_w + pw] = best;
            }
        }
    }
    return Tensor3(features.channels(), out_h, out_w, std::move(out));
}

}  // namespace discloc::geometry

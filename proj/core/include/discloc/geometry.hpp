#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "discloc/tensor.hpp"

namespace discloc::geometry {

/// Axis-aligned box in pixel coordinates with inclusive corners: a box
/// spanning a single pixel has x1 == x2 and width 1.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const noexcept { return x2 - x1 + 1.0; }
    double height() const noexcept { return y2 - y1 + 1.0; }
    double area() const noexcept { return width() * height(); }
    /// Reference center used by the anchor parameterization: x1 + w/2.
    double center_x() const noexcept { return x1 + 0.5 * width(); }
    double center_y() const noexcept { return y1 + 0.5 * height(); }
    bool valid() const noexcept { return x2 >= x1 && y2 >= y1; }

    bool operator==(const Box&) const = default;
};

/// Image extent in pixels; valid pixel coordinates are [0, width-1] x [0, height-1].
struct ImageSize {
    std::size_t height = 0;
    std::size_t width = 0;

    bool operator==(const ImageSize&) const = default;
};

struct ScoredBox {
    Box box;
    double score = 0.0;

    bool operator==(const ScoredBox&) const = default;
};

/// Intersection over union with inclusive-pixel areas. 0 for disjoint boxes.
double iou(const Box& a, const Box& b) noexcept;

/// Clips a box into [0, width-1] x [0, height-1].
Box clip(const Box& box, ImageSize extent) noexcept;

struct AnchorConfig {
    double stride = 16.0;
    std::array<double, 3> scales{8.0, 16.0, 32.0};
    std::array<double, 3> ratios{0.5, 1.0, 2.0};
};

inline constexpr std::size_t kAnchorsPerCell = 9;

class AnchorGrid {
public:
    AnchorGrid(std::size_t feature_h, std::size_t feature_w, double stride, std::array<Box, kAnchorsPerCell> base,
               std::vector<Box> anchors)
        : feature_h_(feature_h), feature_w_(feature_w), stride_(stride), base_(base), anchors_(std::move(anchors)) {}

    std::size_t feature_h() const noexcept { return feature_h_; }
    std::size_t feature_w() const noexcept { return feature_w_; }
    double stride() const noexcept { return stride_; }
    /// The nine reference shapes centered at the origin, ratio-major then scale.
    const std::array<Box, kAnchorsPerCell>& base() const noexcept { return base_; }
    std::span<const Box> anchors() const noexcept { return anchors_; }
    std::size_t size() const noexcept { return anchors_.size(); }
    /// Number of sliding-window positions (feature_h * feature_w).
    std::size_t locations() const noexcept { return feature_h_ * feature_w_; }

    std::size_t index(std::size_t cell_y, std::size_t cell_x, std::size_t base_index) const noexcept {
        return (cell_y * feature_w_ + cell_x) * kAnchorsPerCell + base_index;
    }

private:
    std::size_t feature_h_;
    std::size_t feature_w_;
    double stride_;
    std::array<Box, kAnchorsPerCell> base_;
    std::vector<Box> anchors_;
};

/// One anchor per (cell, ratio, scale). Anchor areas are (stride*scale)^2 with
/// height/width equal to the ratio; each is centered on
/// ((cell + 0.5) * stride). Ordering: cells row-major, then ratio, then scale.
/// Anchors are not clipped to any image.
AnchorGrid generate_anchors(std::size_t feature_h, std::size_t feature_w, const AnchorConfig& config = {});

/// Greedy non-maximum suppression. Candidates are visited by descending
/// score (equal scores keep input order); a box survives when its IoU with
/// every survivor so far is <= iou_threshold. Stops after max_keep survivors.
std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double iou_threshold, std::size_t max_keep);

/// Same as nms() but returns indices into `candidates`.
std::vector<std::size_t> nms_indices(std::span<const ScoredBox> candidates, double iou_threshold,
                                     std::size_t max_keep);

/// Max-pools the region `roi` (image coordinates) of `features` into an
/// out_h x out_w grid per channel. The region maps onto feature cells
/// [floor(x1/stride), ceil(x2/stride)] (clamped to the map); bin edges use
/// floor for starts and ceil for ends. Empty bins produce 0.
Tensor3 roi_pool(const Tensor3& features, const Box& roi, double stride, std::size_t out_h, std::size_t out_w);

}  // namespace discloc::geometry

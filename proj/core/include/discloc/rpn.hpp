#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "discloc/geometry.hpp"

namespace discloc::rpn {

/// (tx, ty, tw, th) relative to an anchor.
using Deltas = std::array<double, 4>;

enum class AnchorLabel : std::int8_t { Ignore = -1, Negative = 0, Positive = 1 };

struct AnchorTarget {
    AnchorLabel label = AnchorLabel::Ignore;
    Deltas deltas{0.0, 0.0, 0.0, 0.0};  // meaningful for positives only
    int matched_box = -1;                // pseudo-box id for positives, else -1
};

struct AnchorTargets {
    std::vector<AnchorTarget> anchors;

    std::size_t count(AnchorLabel label) const noexcept;
};

struct LabelingConfig {
    double pos_iou = 0.7;
    double neg_iou = 0.3;
};

/// Per-anchor predicted objectness p in (0, 1) and regression output.
struct RpnPrediction {
    std::vector<double> probabilities;
    std::vector<Deltas> deltas;
};

struct LossBreakdown {
    double cls_term = 0.0;
    double reg_term = 0.0;
    double total = 0.0;
    double n_cls = 0.0;
    double n_reg = 0.0;
    double lambda = 0.0;
};

/// tx=(cx-cxa)/wa, ty=(cy-cya)/ha, tw=log(w/wa), th=log(h/ha) with
/// inclusive widths and centers x1 + w/2.
Deltas encode_box(const geometry::Box& anchor, const geometry::Box& target);

/// Inverse of encode_box; optionally clipped to `clip_to`. |tw| or |th|
/// above kMaxLogScale raises DeltaOutOfRange.
geometry::Box decode_box(const geometry::Box& anchor, const Deltas& deltas,
                         std::optional<geometry::ImageSize> clip_to = std::nullopt);

inline constexpr double kMaxLogScale = 20.0;

/// True when the anchor lies fully inside [0, width-1] x [0, height-1].
bool inside_image(const geometry::Box& anchor, geometry::ImageSize extent) noexcept;

/// Labels anchors against one pseudo ground-truth box.
///   - anchors crossing the image border: ignore
///   - IoU > pos_iou, or IoU equal to the best IoU among in-image anchors
///     (when that best IoU is positive): positive, with encode_box targets
///   - remaining anchors with IoU < neg_iou: negative
///   - everything else: ignore
AnchorTargets label_anchors(const geometry::AnchorGrid& grid, const geometry::Box& pseudo_box,
                            geometry::ImageSize extent, const LabelingConfig& config = {});

struct SamplingConfig {
    std::size_t batch_size = 256;
    double positive_fraction = 0.5;
    std::uint64_t seed = 0;
};

/// Subsamples labeled anchors into a balanced mini-batch: at most
/// batch_size*positive_fraction positives, negatives fill the remainder.
/// Unselected anchors become ignore. Deterministic for a given seed on every
/// platform (mt19937_64 with an explicit rejection draw).
AnchorTargets sample_minibatch(const AnchorTargets& targets, const SamplingConfig& config);

double smooth_l1(double x) noexcept;

/// cls_term = sum over non-ignored anchors of -[p* log p + (1-p*) log(1-p)];
/// reg_term = sum over positives of smooth_l1 per coordinate of (t - t*);
/// total = cls_term/n_cls + lambda*reg_term/n_reg.
LossBreakdown rpn_loss(const RpnPrediction& prediction, const AnchorTargets& targets, double lambda, double n_cls,
                       double n_reg);

}  // namespace discloc::rpn

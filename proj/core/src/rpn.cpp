#include "discloc/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "discloc/errors.hpp"

namespace discloc::rpn {
namespace {

// Unbiased draw in [0, n). std::uniform_int_distribution is implementation
// defined, so it would break cross-platform determinism.
std::size_t draw_below(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

// Keeps a uniformly chosen subset of `pool` of size `keep`, disabling the rest.
void subsample(std::vector<std::size_t>& pool, std::size_t keep, std::mt19937_64& rng,
               std::vector<AnchorTarget>& anchors) {
    if (pool.size() <= keep) return;
    for (std::size_t i = 0; i < keep; ++i) {
        std::swap(pool[i], pool[i + draw_below(rng, pool.size() - i)]);
    }
    for (std::size_t i = keep; i < pool.size(); ++i) {
        anchors[pool[i]] = AnchorTarget{};
    }
    pool.resize(keep);
}

}  // namespace

std::size_t AnchorTargets::count(AnchorLabel label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(anchors.begin(), anchors.end(), [label](const AnchorTarget& t) { return t.label == label; }));
}

Deltas encode_box(const geometry::Box& anchor, const geometry::Box& target) {
    const double wa = anchor.width();
    const double ha = anchor.height();
    return Deltas{(target.center_x() - anchor.center_x()) / wa, (target.center_y() - anchor.center_y()) / ha,
                  std::log(target.width() / wa), std::log(target.height() / ha)};
}

geometry::Box decode_box(const geometry::Box& anchor, const Deltas& deltas,
                         std::optional<geometry::ImageSize> clip_to) {
    for (double d : deltas) {
        if (!std::isfinite(d)) throw InvalidArgument("non-finite box delta");
    }
    if (std::abs(deltas[2]) > kMaxLogScale || std::abs(deltas[3]) > kMaxLogScale) {
        throw DeltaOutOfRange("log-scale delta exceeds " + std::to_string(kMaxLogScale));
    }
    const double wa = anchor.width();
    const double ha = anchor.height();
    const double cx = anchor.center_x() + deltas[0] * wa;
    const double cy = anchor.center_y() + deltas[1] * ha;
    const double w = wa * std::exp(deltas[2]);
    const double h = ha * std::exp(deltas[3]);
    const double x1 = cx - 0.5 * w;
    const double y1 = cy - 0.5 * h;
    geometry::Box box{x1, y1, x1 + w - 1.0, y1 + h - 1.0};
    return clip_to ? geometry::clip(box, *clip_to) : box;
}

bool inside_image(const geometry::Box& anchor, geometry::ImageSize extent) noexcept {
    return anchor.x1 >= 0.0 && anchor.y1 >= 0.0 && anchor.x2 <= static_cast<double>(extent.width) - 1.0 &&
           anchor.y2 <= static_cast<double>(extent.height) - 1.0;
}

AnchorTargets label_anchors(const geometry::AnchorGrid& grid, const geometry::Box& pseudo_box,
                            geometry::ImageSize extent, const LabelingConfig& config) {
    if (!(config.pos_iou > config.neg_iou)) throw InvalidArgument("pos_iou must exceed neg_iou");
    if (!pseudo_box.valid()) throw InvalidArgument("pseudo box has negative extent");

    const auto anchors = grid.anchors();
    std::vector<double> overlaps(anchors.size(), 0.0);
    std::vector<bool> inside(anchors.size(), false);
    double best = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        inside[i] = inside_image(anchors[i], extent);
        if (!inside[i]) continue;
        overlaps[i] = geometry::iou(anchors[i], pseudo_box);
        best = std::max(best, overlaps[i]);
    }

    AnchorTargets targets;
    targets.anchors.resize(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        if (!inside[i]) continue;
        auto& t = targets.anchors[i];
        const double o = overlaps[i];
        if (o > config.pos_iou || (best > 0.0 && o == best)) {
            t.label = AnchorLabel::Positive;
            t.deltas = encode_box(anchors[i], pseudo_box);
            t.matched_box = 0;
        } else if (o < config.neg_iou) {
            t.label = AnchorLabel::Negative;
        }
    }
    return targets;
}

AnchorTargets sample_minibatch(const AnchorTargets& targets, const SamplingConfig& config) {
    if (!(config.positive_fraction >= 0.0 && config.positive_fraction <= 1.0)) {
        throw InvalidArgument("positive fraction must lie in [0,1]");
    }
    AnchorTargets out = targets;
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < out.anchors.size(); ++i) {
        if (out.anchors[i].label == AnchorLabel::Positive) positives.push_back(i);
        if (out.anchors[i].label == AnchorLabel::Negative) negatives.push_back(i);
    }

    std::mt19937_64 rng(config.seed);
    const auto max_pos = static_cast<std::size_t>(static_cast<double>(config.batch_size) * config.positive_fraction);
    subsample(positives, max_pos, rng, out.anchors);
    subsample(negatives, config.batch_size - positives.size(), rng, out.anchors);
    return out;
}

double smooth_l1(double x) noexcept {
    const double a = std::abs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

LossBreakdown rpn_loss(const RpnPrediction& prediction, const AnchorTargets& targets, double lambda, double n_cls,
                       double n_reg) {
    const std::size_t n = targets.anchors.size();
    if (prediction.probabilities.size() != n || prediction.deltas.size() != n) {
        throw ShapeError("prediction covers " + std::to_string(prediction.probabilities.size()) + " anchors, targets " +
                         std::to_string(n));
    }
    if (!(n_cls > 0.0) || !(n_reg > 0.0)) throw InvalidArgument("loss normalizers must be positive");

    LossBreakdown loss;
    loss.n_cls = n_cls;
    loss.n_reg = n_reg;
    loss.lambda = lambda;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = prediction.probabilities[i];
        if (!(p > 0.0 && p < 1.0)) {
            throw InvalidProbability("anchor " + std::to_string(i) + " has probability outside (0,1)");
        }
        const auto& t = targets.anchors[i];
        if (t.label == AnchorLabel::Ignore) continue;
        if (t.label == AnchorLabel::Positive) {
            loss.cls_term -= std::log(p);
            for (std::size_t k = 0; k < 4; ++k) loss.reg_term += smooth_l1(prediction.deltas[i][k] - t.deltas[k]);
        } else {
            loss.cls_term -= std::log1p(-p);
        }
    }
    loss.total = loss.cls_term / n_cls + lambda * loss.reg_term / n_reg;
    return loss;
}

}  // namespace discloc::rpn

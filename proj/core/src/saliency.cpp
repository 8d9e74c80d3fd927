#include "discloc/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "discloc/errors.hpp"

namespace discloc::saliency {
namespace {

void check_shapes(const Tensor3& features, const Matrix2& weights) {
    if (weights.cols() != features.channels()) {
        throw ShapeError("weights have " + std::to_string(weights.cols()) + " columns but features have " +
                         std::to_string(features.channels()) + " channels");
    }
    if (weights.rows() == 0) throw ShapeError("weights have no class rows");
}

double sample_coordinate(std::size_t i, std::size_t in, std::size_t out) {
    if (out == 1) return static_cast<double>(in - 1) / 2.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
}

struct Range {
    float lo;
    float hi;
};

Range value_range(std::span<const float> values) {
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {*lo, *hi};
}

class DisjointSet {
public:
    std::uint32_t make() {
        parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
        return parent_.back();
    }
    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }
    std::size_t size() const noexcept { return parent_.size(); }

private:
    std::vector<std::uint32_t> parent_;
};

}  // namespace

const char* to_string(ClassSource source) noexcept {
    return source == ClassSource::ArgmaxPredicted ? "argmax-predicted" : "caller-forced";
}

std::vector<double> class_scores(const Tensor3& features, const Matrix2& weights) {
    check_shapes(features, weights);
    const std::size_t plane = features.height() * features.width();
    if (plane == 0) throw ShapeError("features have no spatial extent");

    std::vector<double> gap(features.channels());
    for (std::size_t u = 0; u < features.channels(); ++u) {
        auto ch = features.channel(u);
        gap[u] = std::accumulate(ch.begin(), ch.end(), 0.0) / static_cast<double>(plane);
    }
    std::vector<double> scores(weights.rows());
    for (std::size_t c = 0; c < weights.rows(); ++c) {
        auto w = weights.row(c);
        double s = 0.0;
        for (std::size_t u = 0; u < w.size(); ++u) s += static_cast<double>(w[u]) * gap[u];
        scores[c] = s;
    }
    return scores;
}

std::size_t predict_class(const Tensor3& features, const Matrix2& weights) {
    const auto scores = class_scores(features, weights);
    // max_element returns the first of equal maxima.
    return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

SaliencyMap compute_cam(const Tensor3& features, const Matrix2& weights, std::size_t class_index,
                        ClassSource source) {
    check_shapes(features, weights);
    if (class_index >= weights.rows()) {
        throw InvalidArgument("class index " + std::to_string(class_index) + " out of range for " +
                              std::to_string(weights.rows()) + " classes");
    }
    const std::size_t plane = features.height() * features.width();
    std::vector<double> acc(plane, 0.0);
    auto w = weights.row(class_index);
    for (std::size_t u = 0; u < features.channels(); ++u) {
        const double wu = w[u];
        if (wu == 0.0) continue;
        auto ch = features.channel(u);
        for (std::size_t i = 0; i < plane; ++i) acc[i] += wu * static_cast<double>(ch[i]);
    }
    SaliencyMap map{features.height(), features.width(), std::vector<float>(plane), class_index, source};
    std::transform(acc.begin(), acc.end(), map.values.begin(), [](double v) { return static_cast<float>(v); });
    return map;
}

SaliencyMap upsample_bilinear(const SaliencyMap& map, std::size_t target_h, std::size_t target_w) {
    if (target_h == 0 || target_w == 0) throw InvalidArgument("upsample target must be at least 1x1");
    if (map.height == 0 || map.width == 0) throw InvalidArgument("cannot resample an empty map");

    std::vector<std::size_t> x0(target_w), x1(target_w);
    std::vector<double> fx(target_w);
    for (std::size_t x = 0; x < target_w; ++x) {
        const double sx = sample_coordinate(x, map.width, target_w);
        x0[x] = std::min(static_cast<std::size_t>(std::floor(sx)), map.width - 1);
        x1[x] = std::min(x0[x] + 1, map.width - 1);
        fx[x] = sx - static_cast<double>(x0[x]);
    }

    SaliencyMap out{target_h, target_w, std::vector<float>(target_h * target_w), map.class_index, map.source};
    for (std::size_t y = 0; y < target_h; ++y) {
        const double sy = sample_coordinate(y, map.height, target_h);
        const std::size_t y0 = std::min(static_cast<std::size_t>(std::floor(sy)), map.height - 1);
        const std::size_t y1 = std::min(y0 + 1, map.height - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < target_w; ++x) {
            const double top = (1.0 - fx[x]) * map.at(y0, x0[x]) + fx[x] * map.at(y0, x1[x]);
            const double bottom = (1.0 - fx[x]) * map.at(y1, x0[x]) + fx[x] * map.at(y1, x1[x]);
            out.values[y * target_w + x] = static_cast<float>((1.0 - fy) * top + fy * bottom);
        }
    }
    return out;
}

std::vector<std::size_t> histogram_levels(std::span<const float> values, std::size_t bins) {
    if (values.empty()) throw InvalidArgument("histogram of an empty map");
    if (bins < 2) throw InvalidArgument("Otsu needs at least 2 histogram bins");
    const auto [lo, hi] = value_range(values);
    if (!(hi > lo)) throw DegenerateMap("saliency map is constant");
    const double span = static_cast<double>(hi) - static_cast<double>(lo);

    std::vector<std::size_t> levels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double normalized = (static_cast<double>(values[i]) - lo) / span;
        levels[i] = std::min(bins - 1, static_cast<std::size_t>(normalized * static_cast<double>(bins)));
    }
    return levels;
}

double otsu_threshold(const SaliencyMap& map, std::size_t bins) {
    using boost::multiprecision::int128_t;
    using boost::multiprecision::uint256_t;

    if (map.values.empty()) throw InvalidArgument("Otsu threshold of an empty map");
    if (std::any_of(map.values.begin(), map.values.end(), [](float v) { return !std::isfinite(v); })) {
        throw InvalidValue("saliency map holds non-finite values");
    }
    const auto levels = histogram_levels(map.values, bins);
    std::vector<std::uint64_t> hist(bins, 0);
    for (std::size_t l : levels) ++hist[l];

    std::int64_t total_n = static_cast<std::int64_t>(levels.size());
    std::int64_t total_s = 0;
    for (std::size_t l = 0; l < bins; ++l) total_s += static_cast<std::int64_t>(l * hist[l]);

    // sigma_B^2 * N^2 = (S0*n1 - S1*n0)^2 / (n0*n1); compared exactly by
    // cross-multiplication.
    std::size_t best_k = 0;
    uint256_t best_num = 0;
    uint256_t best_den = 1;
    std::int64_t n0 = 0;
    std::int64_t s0 = 0;
    for (std::size_t k = 1; k < bins; ++k) {
        n0 += static_cast<std::int64_t>(hist[k - 1]);
        s0 += static_cast<std::int64_t>((k - 1) * hist[k - 1]);
        const std::int64_t n1 = total_n - n0;
        if (n0 == 0 || n1 == 0) continue;
        const std::int64_t s1 = total_s - s0;
        int128_t diff = int128_t(s0) * n1 - int128_t(s1) * n0;
        if (diff < 0) diff = -diff;
        const uint256_t num = uint256_t(diff) * uint256_t(diff);
        const uint256_t den = uint256_t(n0) * uint256_t(n1);
        if (best_k == 0 || num * best_den > best_num * den) {
            best_k = k;
            best_num = num;
            best_den = den;
        }
    }
    // The minimum sits in bin 0 and the maximum in bin bins-1, so every edge
    // splits the map into two non-empty classes.
    const auto [lo, hi] = value_range(map.values);
    return static_cast<double>(lo) +
           (static_cast<double>(hi) - static_cast<double>(lo)) * static_cast<double>(best_k) / static_cast<double>(bins);
}

BinaryMask binarize(const SaliencyMap& map, double threshold) {
    BinaryMask mask{map.height, map.width, std::vector<std::uint8_t>(map.values.size()), threshold};
    std::transform(map.values.begin(), map.values.end(), mask.bits.begin(),
                   [threshold](float v) { return static_cast<std::uint8_t>(static_cast<double>(v) >= threshold); });
    return mask;
}

std::size_t label_components(const BinaryMask& mask, std::vector<std::uint32_t>& labels) {
    const std::size_t h = mask.height;
    const std::size_t w = mask.width;
    labels.assign(h * w, 0);

    // Pass 1: provisional labels from the already-visited 8-neighbours
    // (W, NW, N, NE), merging equivalences.
    DisjointSet sets;
    sets.make();  // label 0 = background
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            std::uint32_t neighbours[4];
            std::size_t count = 0;
            if (x > 0 && labels[y * w + x - 1]) neighbours[count++] = labels[y * w + x - 1];
            if (y > 0) {
                const std::size_t up = (y - 1) * w;
                if (x > 0 && labels[up + x - 1]) neighbours[count++] = labels[up + x - 1];
                if (labels[up + x]) neighbours[count++] = labels[up + x];
                if (x + 1 < w && labels[up + x + 1]) neighbours[count++] = labels[up + x + 1];
            }
            if (count == 0) {
                labels[y * w + x] = sets.make();
                continue;
            }
            std::uint32_t label = *std::min_element(neighbours, neighbours + count);
            for (std::size_t i = 0; i < count; ++i) sets.unite(label, neighbours[i]);
            labels[y * w + x] = label;
        }
    }

    // Pass 2: compact roots into 1..n in order of first appearance.
    std::vector<std::uint32_t> compact(sets.size(), 0);
    std::uint32_t next = 0;
    for (auto& label : labels) {
        if (!label) continue;
        const std::uint32_t root = sets.find(label);
        if (!compact[root]) compact[root] = ++next;
        label = compact[root];
    }
    return next;
}

ComponentBox largest_component(const BinaryMask& mask) {
    std::vector<std::uint32_t> labels;
    const std::size_t n = label_components(mask, labels);
    if (n == 0) throw DegenerateMap("mask has no foreground pixels");

    std::vector<ComponentBox> comps(n + 1);
    std::vector<bool> seen(n + 1, false);
    for (std::size_t y = 0; y < mask.height; ++y) {
        for (std::size_t x = 0; x < mask.width; ++x) {
            const std::uint32_t l = labels[y * mask.width + x];
            if (!l) continue;
            auto& c = comps[l];
            const double fx = static_cast<double>(x);
            const double fy = static_cast<double>(y);
            if (!seen[l]) {
                seen[l] = true;
                c.box = geometry::Box{fx, fy, fx, fy};
                c.first_pixel = y * mask.width + x;
            }
            c.box.x1 = std::min(c.box.x1, fx);
            c.box.x2 = std::max(c.box.x2, fx);
            c.box.y2 = std::max(c.box.y2, fy);
            ++c.area;
        }
    }
    // Labels are numbered by first pixel, so the first maximum wins ties.
    std::size_t best = 1;
    for (std::size_t l = 2; l <= n; ++l) {
        if (comps[l].area > comps[best].area) best = l;
    }
    return comps[best];
}

PseudoBox extract_pseudo_box(const SaliencyMap& map, std::size_t image_h, std::size_t image_w, std::size_t bins) {
    if (map.values.empty()) throw InvalidArgument("pseudo-box of an empty map");
    const SaliencyMap resized = upsample_bilinear(map, image_h, image_w);
    const double threshold = otsu_threshold(resized, bins);
    const BinaryMask mask = binarize(resized, threshold);
    const ComponentBox comp = largest_component(mask);
    return PseudoBox{comp.box, comp.area, map.class_index, threshold};
}

}  // namespace discloc::saliency

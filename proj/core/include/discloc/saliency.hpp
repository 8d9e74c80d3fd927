#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "discloc/geometry.hpp"
#include "discloc/tensor.hpp"

namespace discloc::saliency {

enum class ClassSource { ArgmaxPredicted, CallerForced };

const char* to_string(ClassSource source) noexcept;

/// Single-channel class activation map, row-major.
struct SaliencyMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;
    std::size_t class_index = 0;
    ClassSource source = ClassSource::ArgmaxPredicted;

    float at(std::size_t y, std::size_t x) const noexcept { return values[y * width + x]; }
};

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1, row-major
    double threshold_used = 0.0;

    bool at(std::size_t y, std::size_t x) const noexcept { return bits[y * width + x] != 0; }
};

/// Tight box of one connected foreground component.
struct ComponentBox {
    geometry::Box box;
    std::size_t area = 0;
    /// Row-major index of the component's first pixel.
    std::size_t first_pixel = 0;
};

struct PseudoBox {
    geometry::Box box;
    std::size_t component_area = 0;
    std::size_t saliency_class = 0;
    double threshold = 0.0;
};

inline constexpr std::size_t kDefaultOtsuBins = 256;

/// Per-class scores sum_u w[c][u] * mean_{x,y} f_u(x,y).
std::vector<double> class_scores(const Tensor3& features, const Matrix2& weights);

/// Argmax of class_scores; ties resolve to the lowest class index.
std::size_t predict_class(const Tensor3& features, const Matrix2& weights);

/// M_c(x,y) = sum_u w[c][u] * f_u(x,y), accumulated in double.
SaliencyMap compute_cam(const Tensor3& features, const Matrix2& weights, std::size_t class_index,
                        ClassSource source = ClassSource::CallerForced);

/// Corner-aligned bilinear resampling. A single output row/column samples
/// the input's center line.
SaliencyMap upsample_bilinear(const SaliencyMap& map, std::size_t target_h, std::size_t target_w);

/// Otsu threshold over `bins` equal-width bins of the min-max normalized
/// values, using the bin index as the gray level. Returns the lower edge of
/// the first foreground bin (in the map's value units); ties in
/// between-class variance resolve to the lowest edge. Throws DegenerateMap
/// on constant maps.
double otsu_threshold(const SaliencyMap& map, std::size_t bins = kDefaultOtsuBins);

/// Bin level of every value under the histogram otsu_threshold uses.
std::vector<std::size_t> histogram_levels(std::span<const float> values, std::size_t bins);

/// Foreground iff value >= threshold.
BinaryMask binarize(const SaliencyMap& map, double threshold);

/// 8-connected component labeling. Labels are 1-based in order of first
/// pixel (row-major); background is 0. Returns the number of components.
std::size_t label_components(const BinaryMask& mask, std::vector<std::uint32_t>& labels);

/// Largest 8-connected component; equal areas resolve to the component
/// found first in row-major order. Throws DegenerateMap on an empty mask.
ComponentBox largest_component(const BinaryMask& mask);

/// Upsample to image size, Otsu-binarize, return the box of the largest
/// connected foreground component.
PseudoBox extract_pseudo_box(const SaliencyMap& map, std::size_t image_h, std::size_t image_w,
                             std::size_t bins = kDefaultOtsuBins);

}  // namespace discloc::saliency

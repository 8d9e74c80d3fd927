#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "discloc/geometry.hpp"

namespace discloc::metrics {

using ImageId = std::int64_t;

struct PartLocation {
    int part_id = 0;
    double x = 0.0;
    double y = 0.0;
    bool visible = false;

    bool operator==(const PartLocation&) const = default;
};

struct EvalRecord {
    ImageId image_id = 0;
    std::size_t true_class = 0;
    std::size_t predicted_class = 0;
    std::optional<geometry::Box> predicted_box;
    std::optional<geometry::Box> gt_box;
    std::vector<PartLocation> parts;
};

inline constexpr std::size_t kHistogramBins = 5;
/// Lower edges of the IoU histogram bins; the last bin is closed at 1.
inline constexpr std::array<double, kHistogramBins> kHistogramEdges{0.0, 0.2, 0.4, 0.6, 0.8};

using IouHistogram = std::array<std::uint64_t, kHistogramBins>;

/// Histogram bin holding `value` (values >= 0.8 land in the last bin).
std::size_t histogram_bin(double value) noexcept;

struct LocalizationResult {
    double accuracy = 0.0;
    std::uint64_t correct = 0;
    std::uint64_t evaluated = 0;
    IouHistogram histogram{};
};

struct PartScore {
    std::uint64_t hits = 0;
    std::uint64_t visible = 0;
    double value() const noexcept { return visible ? static_cast<double>(hits) / static_cast<double>(visible) : 0.0; }
};

struct PclResult {
    /// Only parts visible in at least one evaluated record appear here.
    std::map<int, PartScore> per_part;
    double average = 0.0;
};

struct ConfusedPair {
    std::size_t true_class = 0;
    std::size_t predicted_class = 0;
    std::uint64_t count = 0;

    bool operator==(const ConfusedPair&) const = default;
};

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {}

    std::size_t num_classes() const noexcept { return n_; }
    std::uint64_t at(std::size_t true_class, std::size_t predicted) const noexcept {
        return counts_[true_class * n_ + predicted];
    }
    void add(std::size_t true_class, std::size_t predicted) noexcept { ++counts_[true_class * n_ + predicted]; }
    /// Adds another matrix of the same size (shard merge).
    void merge(const ConfusionMatrix& other);

    std::uint64_t trace() const noexcept;
    std::uint64_t total() const noexcept;
    std::uint64_t row_sum(std::size_t true_class) const noexcept;

    /// Off-diagonal cells with non-zero counts, ordered by count descending,
    /// then by (true, predicted) ascending; at most k entries.
    std::vector<ConfusedPair> top_confused_pairs(std::size_t k) const;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

/// Fraction of correctly classified records. EmptyEvaluation on no records.
double accuracy(std::span<const EvalRecord> records);

/// Over records carrying both boxes: fraction with IoU strictly above
/// iou_cut, and the IoU histogram. EmptyEvaluation when no record has both.
LocalizationResult localization_accuracy(std::span<const EvalRecord> records, double iou_cut = 0.5);

/// True when (x, y) lies inside the box, edges included.
bool contains(const geometry::Box& box, double x, double y) noexcept;

/// Percentage of correct localization per part, over records with a
/// predicted box and the part visible; average is the unweighted mean over
/// parts present. EmptyEvaluation when no part is ever visible.
PclResult pcl(std::span<const EvalRecord> records);

/// M[t][p] counts records with true class t predicted as p. Class indices
/// outside [0, num_classes) raise InvalidArgument.
ConfusionMatrix confusion(std::span<const EvalRecord> records, std::size_t num_classes);

struct EvalReport {
    std::size_t records = 0;
    double accuracy = 0.0;
    std::optional<LocalizationResult> localization;
    std::optional<PclResult> pcl;
    ConfusionMatrix confusion{0};
    double iou_cut = 0.5;
};

/// Runs every metric that the records support. Localization and PCL are
/// left empty when no record carries the needed boxes/parts.
EvalReport evaluate(std::span<const EvalRecord> records, std::size_t num_classes, double iou_cut = 0.5);

}  // namespace discloc::metrics

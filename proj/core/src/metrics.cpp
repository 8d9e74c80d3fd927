#include "discloc/metrics.hpp"

#include <algorithm>
#include <string>

#include "discloc/errors.hpp"

namespace discloc::metrics {

std::size_t histogram_bin(double value) noexcept {
    std::size_t bin = 0;
    for (std::size_t b = 1; b < kHistogramBins; ++b) {
        if (value >= kHistogramEdges[b]) bin = b;
    }
    return bin;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw ShapeError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < n_; ++c) t += at(c, c);
    return t;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
    std::uint64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t true_class) const noexcept {
    std::uint64_t t = 0;
    for (std::size_t p = 0; p < n_; ++p) t += at(true_class, p);
    return t;
}

std::vector<ConfusedPair> ConfusionMatrix::top_confused_pairs(std::size_t k) const {
    std::vector<ConfusedPair> pairs;
    for (std::size_t t = 0; t < n_; ++t) {
        for (std::size_t p = 0; p < n_; ++p) {
            if (t != p && at(t, p) > 0) pairs.push_back({t, p, at(t, p)});
        }
    }
    // Row-major generation already orders equal counts by (true, predicted).
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const ConfusedPair& a, const ConfusedPair& b) { return a.count > b.count; });
    if (pairs.size() > k) pairs.resize(k);
    return pairs;
}

double accuracy(std::span<const EvalRecord> records) {
    if (records.empty()) throw EmptyEvaluation("accuracy over an empty record set");
    const auto correct = std::count_if(records.begin(), records.end(),
                                       [](const EvalRecord& r) { return r.true_class == r.predicted_class; });
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

LocalizationResult localization_accuracy(std::span<const EvalRecord> records, double iou_cut) {
    LocalizationResult result;
    for (const auto& r : records) {
        if (!r.predicted_box || !r.gt_box) continue;
        const double overlap = geometry::iou(*r.predicted_box, *r.gt_box);
        ++result.evaluated;
        ++result.histogram[histogram_bin(overlap)];
        if (overlap > iou_cut) ++result.correct;
    }
    if (result.evaluated == 0) throw EmptyEvaluation("no record carries both a predicted and a ground-truth box");
    result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.evaluated);
    return result;
}

bool contains(const geometry::Box& box, double x, double y) noexcept {
    return x >= box.x1 && x <= box.x2 && y >= box.y1 && y <= box.y2;
}

PclResult pcl(std::span<const EvalRecord> records) {
    PclResult result;
    for (const auto& r : records) {
        if (!r.predicted_box) continue;
        for (const auto& part : r.parts) {
            if (!part.visible) continue;
            auto& score = result.per_part[part.part_id];
            ++score.visible;
            if (contains(*r.predicted_box, part.x, part.y)) ++score.hits;
        }
    }
    if (result.per_part.empty()) throw EmptyEvaluation("no visible part in any record with a predicted box");
    double sum = 0.0;
    for (const auto& [id, score] : result.per_part) sum += score.value();
    result.average = sum / static_cast<double>(result.per_part.size());
    return result;
}

ConfusionMatrix confusion(std::span<const EvalRecord> records, std::size_t num_classes) {
    ConfusionMatrix m(num_classes);
    for (const auto& r : records) {
        if (r.true_class >= num_classes || r.predicted_class >= num_classes) {
            throw InvalidArgument("image " + std::to_string(r.image_id) + " has a class index outside [0, " +
                                  std::to_string(num_classes) + ")");
        }
        m.add(r.true_class, r.predicted_class);
    }
    return m;
}

EvalReport evaluate(std::span<const EvalRecord> records, std::size_t num_classes, double iou_cut) {
    EvalReport report;
    report.records = records.size();
    report.accuracy = accuracy(records);
    report.confusion = confusion(records, num_classes);
    report.iou_cut = iou_cut;
    try {
        report.localization = localization_accuracy(records, iou_cut);
    } catch (const EmptyEvaluation&) {
    }
    try {
        report.pcl = pcl(records);
    } catch (const EmptyEvaluation&) {
    }
    return report;
}

}  // namespace discloc::metrics

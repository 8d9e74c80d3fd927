#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "discloc/geometry.hpp"
#include "discloc/metrics.hpp"
#include "discloc/tensor.hpp"

namespace discloc::dataset {

using metrics::ImageId;
using metrics::PartLocation;

inline constexpr std::size_t kPartsPerImage = 15;
inline constexpr std::size_t kNumClasses = 200;

struct IndexEntry {
    std::string path;
    /// 0-based (file labels are 1-based).
    std::size_t class_label = 0;
    bool is_train = false;
    geometry::Box gt_box;
    /// Sorted by part_id.
    std::vector<PartLocation> parts;

    bool operator==(const IndexEntry&) const = default;
};

struct DatasetIndex {
    std::map<ImageId, IndexEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    std::size_t train_count() const noexcept;
    std::size_t test_count() const noexcept { return size() - train_count(); }
};

/// (x, y, w, h) -> inclusive corners (x, y, x+w-1, y+h-1).
geometry::Box box_from_xywh(double x, double y, double w, double h) noexcept;
/// Inverse of box_from_xywh.
std::array<double, 4> xywh_from_box(const geometry::Box& box) noexcept;

/// Loads and joins images.txt, image_class_labels.txt, bounding_boxes.txt,
/// train_test_split.txt and parts/part_locs.txt under `root`.
DatasetIndex load_index(const std::filesystem::path& root);

/// Classifier weights from <dir>/weights.npy.
Matrix2 load_weights(const std::filesystem::path& dir);

/// Features from <dir>/<image_id>.npy, checked against `weights`.
Tensor3 load_feature_tensor(const std::filesystem::path& dir, ImageId image_id, const Matrix2& weights);

/// Both of the above.
std::pair<Tensor3, Matrix2> load_features(const std::filesystem::path& dir, ImageId image_id);

enum class Split { All, Train, Test };

struct Prediction {
    std::size_t predicted_class = 0;
    std::optional<geometry::Box> box;
};

/// Joins predictions with ground truth. Only images that have a prediction
/// and belong to `split` produce a record; a prediction for an id missing
/// from the index raises InconsistentIndex.
std::vector<metrics::EvalRecord> join_records(const DatasetIndex& index, const std::map<ImageId, Prediction>& predictions,
                                              Split split = Split::All);

}  // namespace discloc::dataset

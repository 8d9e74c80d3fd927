#include "discloc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "discloc/errors.hpp"

namespace discloc::dataset {
namespace {

namespace fs = std::filesystem;

struct Line {
    std::size_t number;
    std::vector<std::string_view> fields;
};

class TableReader {
public:
    TableReader(const fs::path& root, const std::string& relative) : name_(relative) {
        const fs::path path = root / relative;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MissingAnnotation("missing annotation file " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        text_ = buf.str();
    }

    // Calls `fn` for every non-blank line with its whitespace-split fields.
    void for_each(const std::function<void(const Line&)>& fn) const {
        std::size_t number = 0;
        std::size_t pos = 0;
        while (pos < text_.size()) {
            std::size_t end = text_.find('\n', pos);
            if (end == std::string::npos) end = text_.size();
            ++number;
            std::string_view line(text_.data() + pos, end - pos);
            Line parsed{number, split(line)};
            if (!parsed.fields.empty()) fn(parsed);
            pos = end + 1;
        }
    }

    const std::string& name() const noexcept { return name_; }

    [[noreturn]] void fail(const Line& line, const std::string& message) const {
        throw ParseError(name_, line.number, message);
    }

    void expect_fields(const Line& line, std::size_t count) const {
        if (line.fields.size() != count) {
            fail(line, "expected " + std::to_string(count) + " fields, found " + std::to_string(line.fields.size()));
        }
    }

    std::int64_t integer(const Line& line, std::size_t i) const {
        std::int64_t value = 0;
        auto f = line.fields[i];
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
        if (ec != std::errc() || ptr != f.data() + f.size()) fail(line, "non-numeric field '" + std::string(f) + "'");
        return value;
    }

    double real(const Line& line, std::size_t i) const {
        double value = 0.0;
        auto f = line.fields[i];
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
        if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(value)) {
            fail(line, "non-numeric field '" + std::string(f) + "'");
        }
        return value;
    }

    bool flag(const Line& line, std::size_t i) const {
        const auto v = integer(line, i);
        if (v != 0 && v != 1) fail(line, "expected 0 or 1, found '" + std::string(line.fields[i]) + "'");
        return v == 1;
    }

private:
    static std::vector<std::string_view> split(std::string_view line) {
        std::vector<std::string_view> out;
        std::size_t i = 0;
        auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; };
        while (i < line.size()) {
            while (i < line.size() && is_space(line[i])) ++i;
            std::size_t start = i;
            while (i < line.size() && !is_space(line[i])) ++i;
            if (i > start) out.push_back(line.substr(start, i - start));
        }
        return out;
    }

    std::string name_;
    std::string text_;
};

template <typename T>
void insert_unique(std::map<ImageId, T>& table, ImageId id, T value, const TableReader& reader) {
    if (!table.emplace(id, std::move(value)).second) {
        throw InconsistentIndex(reader.name() + ": duplicate image id " + std::to_string(id));
    }
}

template <typename T>
void require_same_ids(const std::map<ImageId, std::string>& images, const std::map<ImageId, T>& other,
                      const std::string& name) {
    for (const auto& [id, unused] : other) {
        if (!images.count(id)) throw InconsistentIndex(name + " references unknown image id " + std::to_string(id));
    }
    for (const auto& [id, unused] : images) {
        if (!other.count(id)) throw InconsistentIndex(name + " has no row for image id " + std::to_string(id));
    }
}

}  // namespace

std::size_t DatasetIndex::train_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const auto& kv) { return kv.second.is_train; }));
}

geometry::Box box_from_xywh(double x, double y, double w, double h) noexcept {
    return geometry::Box{x, y, x + w - 1.0, y + h - 1.0};
}

std::array<double, 4> xywh_from_box(const geometry::Box& box) noexcept {
    return {box.x1, box.y1, box.width(), box.height()};
}

DatasetIndex load_index(const fs::path& root) {
    TableReader images_file(root, "images.txt");
    TableReader labels_file(root, "image_class_labels.txt");
    TableReader boxes_file(root, "bounding_boxes.txt");
    TableReader split_file(root, "train_test_split.txt");
    TableReader parts_file(root, "parts/part_locs.txt");

    std::map<ImageId, std::string> images;
    images_file.for_each([&](const Line& line) {
        images_file.expect_fields(line, 2);
        insert_unique(images, images_file.integer(line, 0), std::string(line.fields[1]), images_file);
    });

    std::map<ImageId, std::size_t> labels;
    labels_file.for_each([&](const Line& line) {
        labels_file.expect_fields(line, 2);
        const auto label = labels_file.integer(line, 1);
        if (label < 1 || label > static_cast<std::int64_t>(kNumClasses)) {
            labels_file.fail(line, "class label " + std::to_string(label) + " outside [1, 200]");
        }
        insert_unique(labels, labels_file.integer(line, 0), static_cast<std::size_t>(label - 1), labels_file);
    });

    std::map<ImageId, geometry::Box> boxes;
    boxes_file.for_each([&](const Line& line) {
        boxes_file.expect_fields(line, 5);
        const double w = boxes_file.real(line, 3);
        const double h = boxes_file.real(line, 4);
        if (w <= 0.0 || h <= 0.0) boxes_file.fail(line, "box width and height must be positive");
        insert_unique(boxes, boxes_file.integer(line, 0),
                      box_from_xywh(boxes_file.real(line, 1), boxes_file.real(line, 2), w, h), boxes_file);
    });

    std::map<ImageId, bool> split;
    split_file.for_each([&](const Line& line) {
        split_file.expect_fields(line, 2);
        insert_unique(split, split_file.integer(line, 0), split_file.flag(line, 1), split_file);
    });

    std::map<ImageId, std::vector<PartLocation>> parts;
    parts_file.for_each([&](const Line& line) {
        parts_file.expect_fields(line, 5);
        const ImageId id = parts_file.integer(line, 0);
        const auto part_id = parts_file.integer(line, 1);
        if (part_id < 1 || part_id > static_cast<std::int64_t>(kPartsPerImage)) {
            parts_file.fail(line, "part id " + std::to_string(part_id) + " outside [1, 15]");
        }
        PartLocation loc{static_cast<int>(part_id), parts_file.real(line, 2), parts_file.real(line, 3),
                         parts_file.flag(line, 4)};
        if (!images.count(id)) {
            throw InconsistentIndex(parts_file.name() + " references unknown image id " + std::to_string(id));
        }
        parts[id].push_back(loc);
    });

    require_same_ids(images, labels, labels_file.name());
    require_same_ids(images, boxes, boxes_file.name());
    require_same_ids(images, split, split_file.name());
    require_same_ids(images, parts, parts_file.name());

    DatasetIndex index;
    for (const auto& [id, path] : images) {
        auto& locs = parts[id];
        std::sort(locs.begin(), locs.end(),
                  [](const PartLocation& a, const PartLocation& b) { return a.part_id < b.part_id; });
        std::set<int> ids;
        for (const auto& p : locs) ids.insert(p.part_id);
        if (locs.size() != kPartsPerImage || ids.size() != kPartsPerImage) {
            throw InconsistentIndex(parts_file.name() + ": image " + std::to_string(id) + " has " +
                                    std::to_string(locs.size()) + " part rows (" + std::to_string(ids.size()) +
                                    " distinct), expected 15");
        }
        index.entries.emplace(id, IndexEntry{path, labels[id], split[id], boxes[id], std::move(locs)});
    }
    return index;
}

Matrix2 load_weights(const fs::path& dir) {
    return read_matrix2(dir / "weights.npy");
}

Tensor3 load_feature_tensor(const fs::path& dir, ImageId image_id, const Matrix2& weights) {
    Tensor3 features = read_tensor3(dir / (std::to_string(image_id) + ".npy"));
    if (features.channels() != weights.cols()) {
        throw ShapeError("image " + std::to_string(image_id) + ": " + std::to_string(features.channels()) +
                         "-channel features do not match " + std::to_string(weights.cols()) + "-column weights");
    }
    return features;
}

std::pair<Tensor3, Matrix2> load_features(const fs::path& dir, ImageId image_id) {
    Matrix2 weights = load_weights(dir);
    Tensor3 features = load_feature_tensor(dir, image_id, weights);
    return {std::move(features), std::move(weights)};
}

std::vector<metrics::EvalRecord> join_records(const DatasetIndex& index,
                                              const std::map<ImageId, Prediction>& predictions, Split split) {
    std::vector<metrics::EvalRecord> records;
    for (const auto& [id, pred] : predictions) {
        auto it = index.entries.find(id);
        if (it == index.entries.end()) {
            throw InconsistentIndex("prediction for image id " + std::to_string(id) + " not in the dataset index");
        }
        const auto& entry = it->second;
        if ((split == Split::Train && !entry.is_train) || (split == Split::Test && entry.is_train)) continue;
        records.push_back(metrics::EvalRecord{id, entry.class_label, pred.predicted_class, pred.box, entry.gt_box,
                                              entry.parts});
    }
    return records;
}

}  // namespace discloc::dataset

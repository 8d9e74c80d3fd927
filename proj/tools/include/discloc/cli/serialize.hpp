#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "discloc/dataset.hpp"
#include "discloc/geometry.hpp"
#include "discloc/metrics.hpp"
#include "discloc/rpn.hpp"
#include "discloc/saliency.hpp"

namespace discloc::cli {

using json = nlohmann::ordered_json;
using metrics::ImageId;

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

json box_to_json(const geometry::Box& box);
geometry::Box box_from_json(const json& j);

/// {image_id, class_index, source, height, width}
json cam_record(ImageId id, const saliency::SaliencyMap& map);

/// {image_id, class_index, threshold, box, component_area}
json pseudo_box_record(ImageId id, const saliency::PseudoBox& box);

struct PseudoBoxRecord {
    ImageId image_id = 0;
    std::size_t class_index = 0;
    double threshold = 0.0;
    geometry::Box box;
    std::size_t component_area = 0;
};
PseudoBoxRecord pseudo_box_from_json(const json& j);

/// One JSON object per line; blank lines skipped. Parse failures raise
/// ParseError with the line number.
std::vector<json> read_json_lines(const std::filesystem::path& path);
std::string to_json_lines(const std::vector<json>& rows);

json index_entry_to_json(ImageId id, const dataset::IndexEntry& entry);

/// Predictions keyed by image id; accepts "predicted_class" or
/// "class_index", and an optional "box".
std::map<ImageId, dataset::Prediction> read_predictions(const std::filesystem::path& path);

/// anchor_idx,label,tx,ty,tw,th with label 1/0/-1.
std::string targets_csv(const rpn::AnchorTargets& targets);

json loss_to_json(const rpn::LossBreakdown& loss);

struct Proposal {
    ImageId image_id = 0;
    geometry::ScoredBox scored;
};

/// image_id,x1,y1,x2,y2,score with a header row.
std::vector<Proposal> read_proposals_csv(const std::filesystem::path& path);
std::string proposals_csv(const std::vector<Proposal>& proposals);

json eval_report_to_json(const metrics::EvalReport& report);
/// Row = true class, column = predicted class, with a header row.
std::string confusion_csv(const metrics::ConfusionMatrix& matrix);
std::string histogram_csv(const metrics::IouHistogram& histogram);
std::string top_pairs_csv(const std::vector<metrics::ConfusedPair>& pairs);

}  // namespace discloc::cli

#include "discloc/cli/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "discloc/errors.hpp"

namespace discloc::cli {
namespace {

std::string slurp_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
bool parse_field(const std::string& text, T& out) {
    auto b = text.find_first_not_of(" \t");
    auto e = text.find_last_not_of(" \t\r");
    if (b == std::string::npos) return false;
    const char* first = text.data() + b;
    const char* last = text.data() + e + 1;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

std::string format_real(double value) {
    if (value == 0.0) return "0";  // folds -0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

json box_to_json(const geometry::Box& box) {
    return json::array({box.x1, box.y1, box.x2, box.y2});
}

geometry::Box box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw InvalidArgument("box must be a 4-element array [x1,y1,x2,y2]");
    geometry::Box box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!box.valid()) throw InvalidArgument("box has x2 < x1 or y2 < y1");
    return box;
}

json cam_record(ImageId id, const saliency::SaliencyMap& map) {
    return json{{"image_id", id},
                {"class_index", map.class_index},
                {"source", saliency::to_string(map.source)},
                {"height", map.height},
                {"width", map.width}};
}

json pseudo_box_record(ImageId id, const saliency::PseudoBox& box) {
    return json{{"image_id", id},
                {"class_index", box.saliency_class},
                {"threshold", box.threshold},
                {"box", box_to_json(box.box)},
                {"component_area", box.component_area}};
}

PseudoBoxRecord pseudo_box_from_json(const json& j) {
    PseudoBoxRecord r;
    r.image_id = j.at("image_id").get<ImageId>();
    r.class_index = j.at("class_index").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    r.box = box_from_json(j.at("box"));
    r.component_area = j.at("component_area").get<std::size_t>();
    return r;
}

std::vector<json> read_json_lines(const std::filesystem::path& path) {
    const std::string text = slurp_text(path);
    std::vector<json> rows;
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), number, e.what());
        }
        if (!rows.back().is_object()) throw ParseError(path.string(), number, "expected a JSON object");
    }
    return rows;
}

std::string to_json_lines(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

json index_entry_to_json(ImageId id, const dataset::IndexEntry& entry) {
    json parts = json::array();
    for (const auto& p : entry.parts) parts.push_back(json::array({p.part_id, p.x, p.y, p.visible ? 1 : 0}));
    return json{{"image_id", id},
                {"path", entry.path},
                {"class_index", entry.class_label},
                {"is_train", entry.is_train},
                {"box", box_to_json(entry.gt_box)},
                {"parts", parts}};
}

std::map<ImageId, dataset::Prediction> read_predictions(const std::filesystem::path& path) {
    const std::string text = slurp_text(path);
    std::map<ImageId, dataset::Prediction> out;
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            dataset::Prediction pred;
            if (j.contains("predicted_class")) pred.predicted_class = j.at("predicted_class").get<std::size_t>();
            else pred.predicted_class = j.at("class_index").get<std::size_t>();
            if (j.contains("box") && !j.at("box").is_null()) pred.box = box_from_json(j.at("box"));
            const auto id = j.at("image_id").get<ImageId>();
            if (!out.emplace(id, pred).second) {
                throw ParseError(path.string(), number, "duplicate prediction for image " + std::to_string(id));
            }
        } catch (const json::exception& e) {
            throw ParseError(path.string(), number, e.what());
        } catch (const InvalidArgument& e) {
            throw ParseError(path.string(), number, e.what());
        }
    }
    return out;
}

std::string targets_csv(const rpn::AnchorTargets& targets) {
    std::string out = "anchor_idx,label,tx,ty,tw,th\n";
    for (std::size_t i = 0; i < targets.anchors.size(); ++i) {
        const auto& t = targets.anchors[i];
        out += std::to_string(i) + "," + std::to_string(static_cast<int>(t.label));
        for (double d : t.deltas) out += "," + format_real(d);
        out += '\n';
    }
    return out;
}

json loss_to_json(const rpn::LossBreakdown& loss) {
    return json{{"cls_term", loss.cls_term}, {"reg_term", loss.reg_term}, {"total", loss.total},
                {"n_cls", loss.n_cls},       {"n_reg", loss.n_reg},       {"lambda", loss.lambda}};
}

std::vector<Proposal> read_proposals_csv(const std::filesystem::path& path) {
    const std::string text = slurp_text(path);
    std::vector<Proposal> out;
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (number == 1 && line.rfind("image_id", 0) == 0) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 6) {
            throw ParseError(path.string(), number, "expected 6 fields image_id,x1,y1,x2,y2,score");
        }
        Proposal p;
        double v[5];
        if (!parse_field(fields[0], p.image_id)) throw ParseError(path.string(), number, "bad image_id");
        for (int k = 0; k < 5; ++k) {
            if (!parse_field(fields[k + 1], v[k]) || !std::isfinite(v[k])) {
                throw ParseError(path.string(), number, "non-numeric field '" + fields[k + 1] + "'");
            }
        }
        p.scored = geometry::ScoredBox{geometry::Box{v[0], v[1], v[2], v[3]}, v[4]};
        if (!p.scored.box.valid()) throw ParseError(path.string(), number, "box has x2 < x1 or y2 < y1");
        out.push_back(p);
    }
    return out;
}

std::string proposals_csv(const std::vector<Proposal>& proposals) {
    std::string out = "image_id,x1,y1,x2,y2,score\n";
    for (const auto& p : proposals) {
        const auto& b = p.scored.box;
        out += std::to_string(p.image_id) + "," + format_real(b.x1) + "," + format_real(b.y1) + "," +
               format_real(b.x2) + "," + format_real(b.y2) + "," + format_real(p.scored.score) + "\n";
    }
    return out;
}

json eval_report_to_json(const metrics::EvalReport& report) {
    json j{{"records", report.records}, {"accuracy", report.accuracy}, {"iou_cut", report.iou_cut}};
    if (report.localization) {
        const auto& loc = *report.localization;
        json bins = json::array();
        for (std::size_t b = 0; b < metrics::kHistogramBins; ++b) {
            const double hi = b + 1 < metrics::kHistogramBins ? metrics::kHistogramEdges[b + 1] : 1.0;
            bins.push_back(json{{"lo", metrics::kHistogramEdges[b]}, {"hi", hi}, {"count", loc.histogram[b]}});
        }
        j["localization"] = json{{"accuracy", loc.accuracy},
                                 {"correct", loc.correct},
                                 {"evaluated", loc.evaluated},
                                 {"histogram", bins}};
    } else {
        j["localization"] = nullptr;
    }
    if (report.pcl) {
        json parts = json::object();
        for (const auto& [id, score] : report.pcl->per_part) {
            parts[std::to_string(id)] = json{{"hits", score.hits}, {"visible", score.visible}, {"pcl", score.value()}};
        }
        j["pcl"] = json{{"per_part", parts}, {"average", report.pcl->average}};
    } else {
        j["pcl"] = nullptr;
    }
    json pairs = json::array();
    for (const auto& p : report.confusion.top_confused_pairs(10)) {
        pairs.push_back(json{{"true", p.true_class}, {"predicted", p.predicted_class}, {"count", p.count}});
    }
    j["confusion"] = json{{"num_classes", report.confusion.num_classes()},
                          {"trace", report.confusion.trace()},
                          {"total", report.confusion.total()},
                          {"top_pairs", pairs}};
    return j;
}

std::string confusion_csv(const metrics::ConfusionMatrix& matrix) {
    std::string out = "true\\predicted";
    for (std::size_t p = 0; p < matrix.num_classes(); ++p) out += "," + std::to_string(p);
    out += '\n';
    for (std::size_t t = 0; t < matrix.num_classes(); ++t) {
        out += std::to_string(t);
        for (std::size_t p = 0; p < matrix.num_classes(); ++p) out += "," + std::to_string(matrix.at(t, p));
        out += '\n';
    }
    return out;
}

std::string histogram_csv(const metrics::IouHistogram& histogram) {
    std::string out = "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < metrics::kHistogramBins; ++b) {
        const double hi = b + 1 < metrics::kHistogramBins ? metrics::kHistogramEdges[b + 1] : 1.0;
        out += format_real(metrics::kHistogramEdges[b]) + "," + format_real(hi) + "," + std::to_string(histogram[b]) +
               "\n";
    }
    return out;
}

std::string top_pairs_csv(const std::vector<metrics::ConfusedPair>& pairs) {
    std::string out = "true,predicted,count\n";
    for (const auto& p : pairs) {
        out += std::to_string(p.true_class) + "," + std::to_string(p.predicted_class) + "," + std::to_string(p.count) +
               "\n";
    }
    return out;
}

}  // namespace discloc::cli

#include "discloc/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>

#include "discloc/cli/config.hpp"
#include "discloc/cli/render.hpp"
#include "discloc/cli/serialize.hpp"
#include "discloc/dataset.hpp"
#include "discloc/errors.hpp"
#include "discloc/geometry.hpp"
#include "discloc/metrics.hpp"
#include "discloc/rpn.hpp"
#include "discloc/saliency.hpp"
#include "discloc/tensor.hpp"

namespace discloc::cli {
namespace {

namespace fs = std::filesystem;

// Failure of one image; the command keeps going and exits with 1.
struct ItemFailure {
    std::string item;
    std::string message;
};

class FailureLog {
public:
    void add(std::string item, std::string message) {
        std::lock_guard lock(mutex_);
        failures_.push_back({std::move(item), std::move(message)});
    }
    int report(std::ostream& err) {
        std::sort(failures_.begin(), failures_.end(),
                  [](const ItemFailure& a, const ItemFailure& b) { return a.item < b.item; });
        for (const auto& f : failures_) err << "error: " << f.item << ": " << f.message << "\n";
        if (!failures_.empty()) err << failures_.size() << " item(s) failed\n";
        return failures_.empty() ? kExitOk : kExitItemFailures;
    }

private:
    std::mutex mutex_;
    std::vector<ItemFailure> failures_;
};

// Runs fn(i) for i in [0, n) on `jobs` threads. An exception thrown by
// fn(i) is recorded against item_name(i).
void parallel_for(std::size_t n, std::size_t jobs, const std::function<std::string(std::size_t)>& item_name,
                  const std::function<void(std::size_t)>& fn, FailureLog& failures) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                failures.add(item_name(i), e.what());
            }
        }
    };
    const std::size_t threads = std::min(jobs, std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

std::string image_item(ImageId id) { return "image " + std::to_string(id); }

// Numeric ids of files named <digits>.npy in `dir`, ascending.
std::vector<ImageId> discover_ids(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    static const std::regex pattern(R"(^(\d+)\.npy$)");
    std::vector<ImageId> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) ids.push_back(std::stoll(m[1].str()));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) throw ConfigError("an output directory is required (--out or out=)");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Mixes the config seed with an image id so per-image sampling is
// independent of processing order.
std::uint64_t image_seed(std::uint64_t seed, ImageId id) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(id) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Where image extents come from: a uniform size, a sizes file
// ("image_id width height" per line) or the dataset images themselves.
class ImageSizes {
public:
    std::optional<geometry::ImageSize> uniform;
    fs::path sizes_file;
    fs::path dataset_root;

    void load() {
        if (!sizes_file.empty()) {
            const std::string text = read_text(sizes_file);
            std::stringstream ss(text);
            std::string line;
            std::size_t number = 0;
            while (std::getline(ss, line)) {
                ++number;
                std::stringstream ls(line);
                ImageId id;
                long long w, h;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                if (!(ls >> id >> w >> h) || w <= 0 || h <= 0) {
                    throw ParseError(sizes_file.string(), number, "expected 'image_id width height'");
                }
                sizes_[id] = geometry::ImageSize{static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
            }
        } else if (!uniform && !dataset_root.empty()) {
            index_ = dataset::load_index(dataset_root);
        }
        if (!uniform && sizes_file.empty() && dataset_root.empty()) {
            throw ConfigError("image size unknown: pass --image-w/--image-h, --sizes or --dataset");
        }
    }

    geometry::ImageSize at(ImageId id) const {
        if (uniform) return *uniform;
        if (!sizes_file.empty()) {
            auto it = sizes_.find(id);
            if (it == sizes_.end()) throw InvalidArgument("no size listed in " + sizes_file.string());
            return it->second;
        }
        auto it = index_.entries.find(id);
        if (it == index_.entries.end()) throw InconsistentIndex("image not in dataset index");
        const fs::path path = dataset_root / "images" / it->second.path;
        cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
        if (img.empty()) throw ImageError("cannot decode " + path.string());
        return geometry::ImageSize{static_cast<std::size_t>(img.rows), static_cast<std::size_t>(img.cols)};
    }

private:
    std::map<ImageId, geometry::ImageSize> sizes_;
    dataset::DatasetIndex index_;
};

void add_image_size_options(CLI::App* sub, ImageSizes& sizes, std::size_t& w, std::size_t& h) {
    sub->add_option("--image-w", w, "Uniform image width in pixels");
    sub->add_option("--image-h", h, "Uniform image height in pixels");
    sub->add_option("--sizes", sizes.sizes_file, "File of 'image_id width height' lines");
}

void finish_image_sizes(ImageSizes& sizes, std::size_t w, std::size_t h, const PipelineConfig& config) {
    if (w || h) {
        if (!w || !h) throw ConfigError("--image-w and --image-h must be given together");
        sizes.uniform = geometry::ImageSize{h, w};
    }
    sizes.dataset_root = config.dataset_root;
    sizes.load();
}

struct CommonOptions {
    std::optional<fs::path> config_file;
    std::map<std::string, std::string> overrides;
};

// Every config key doubles as a --flag (underscores become dashes); flags
// override the config file.
void add_config_options(CLI::App* sub, CommonOptions& common) {
    sub->add_option_function<std::string>(
        "--config", [&common](const std::string& v) { common.config_file = v; }, "Flat key=value config file");
    for (const auto& key : PipelineConfig::keys()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        sub->add_option_function<std::string>(
               flag, [&common, key](const std::string& v) { common.overrides[key] = v; }, "config: " + key)
            ->group("Config");
    }
}

// ---------------------------------------------------------------- commands

int cmd_index(const PipelineConfig& config, std::ostream& out) {
    if (config.dataset_root.empty()) throw ConfigError("--dataset is required");
    const auto index = dataset::load_index(config.dataset_root);
    ensure_dir(config.output_dir);
    std::vector<json> rows;
    for (const auto& [id, entry] : index.entries) rows.push_back(index_entry_to_json(id, entry));
    write_file_atomic(config.output_dir / "index.jsonl", to_json_lines(rows));
    out << "images " << index.size() << " train " << index.train_count() << " test " << index.test_count() << "\n";
    return kExitOk;
}

struct CamOptions {
    std::vector<ImageId> ids;
    std::optional<std::size_t> forced_class;
};

int cmd_cam(const PipelineConfig& config, const CamOptions& opts, std::ostream& out, std::ostream& err) {
    if (config.feature_dir.empty()) throw ConfigError("--features is required");
    ensure_dir(config.output_dir);
    const Matrix2 weights = dataset::load_weights(config.feature_dir);
    if (opts.forced_class && *opts.forced_class >= weights.rows()) {
        throw ConfigError("--class " + std::to_string(*opts.forced_class) + " exceeds the " +
                          std::to_string(weights.rows()) + " weight rows");
    }
    const auto ids = opts.ids.empty() ? discover_ids(config.feature_dir) : opts.ids;

    FailureLog failures;
    std::atomic<std::size_t> written{0};
    parallel_for(
        ids.size(), config.jobs, [&](std::size_t i) { return image_item(ids[i]); },
        [&](std::size_t i) {
            const ImageId id = ids[i];
            const Tensor3 features = dataset::load_feature_tensor(config.feature_dir, id, weights);
            const bool forced = opts.forced_class.has_value();
            const std::size_t cls = forced ? *opts.forced_class : saliency::predict_class(features, weights);
            const auto map = saliency::compute_cam(
                features, weights, cls,
                forced ? saliency::ClassSource::CallerForced : saliency::ClassSource::ArgmaxPredicted);
            write_tensor(Matrix2(map.height, map.width, map.values), config.output_dir / (std::to_string(id) + ".npy"));
            write_file_atomic(config.output_dir / (std::to_string(id) + ".json"), cam_record(id, map).dump() + "\n");
            ++written;
        },
        failures);
    out << "cam: wrote " << written << " of " << ids.size() << " saliency maps\n";
    return failures.report(err);
}

saliency::SaliencyMap load_saliency(const fs::path& dir, ImageId id) {
    const fs::path base = dir / std::to_string(id);
    const Matrix2 values = read_matrix2(fs::path(base).concat(".npy"));
    const fs::path record_path = fs::path(base).concat(".json");
    json record;
    try {
        record = json::parse(read_text(record_path));
    } catch (const json::exception& e) {
        throw ParseError(record_path.string(), 1, e.what());
    }
    saliency::SaliencyMap map;
    map.height = values.rows();
    map.width = values.cols();
    map.values.assign(values.data().begin(), values.data().end());
    map.class_index = record.at("class_index").get<std::size_t>();
    map.source = record.value("source", std::string("argmax-predicted")) == "caller-forced"
                     ? saliency::ClassSource::CallerForced
                     : saliency::ClassSource::ArgmaxPredicted;
    return map;
}

int cmd_pseudo_box(const PipelineConfig& config, const fs::path& saliency_dir, std::vector<ImageId> ids,
                   const ImageSizes& sizes, std::ostream& out, std::ostream& err) {
    ensure_dir(config.output_dir);
    if (ids.empty()) ids = discover_ids(saliency_dir);

    FailureLog failures;
    std::vector<std::optional<json>> rows(ids.size());
    parallel_for(
        ids.size(), config.jobs, [&](std::size_t i) { return image_item(ids[i]); },
        [&](std::size_t i) {
            const auto map = load_saliency(saliency_dir, ids[i]);
            const auto extent = sizes.at(ids[i]);
            const auto box = saliency::extract_pseudo_box(map, extent.height, extent.width, config.otsu_bins);
            rows[i] = pseudo_box_record(ids[i], box);
        },
        failures);

    std::vector<json> ok;
    for (auto& r : rows) {
        if (r) ok.push_back(std::move(*r));
    }
    write_file_atomic(config.output_dir / "pseudo_boxes.jsonl", to_json_lines(ok));
    out << "pseudo-box: " << ok.size() << " of " << ids.size() << " images\n";
    return failures.report(err);
}

struct RpnOptions {
    fs::path pseudo_file;
    fs::path prediction_dir;
    std::size_t feature_w = 0;
    std::size_t feature_h = 0;
    bool sample = false;
};

rpn::RpnPrediction load_prediction(const fs::path& dir, ImageId id, std::size_t anchors) {
    const Matrix2 m = read_matrix2(dir / (std::to_string(id) + ".npy"));
    if (m.rows() != anchors || m.cols() != 5) {
        throw ShapeError("prediction must be " + std::to_string(anchors) + "x5 (p,tx,ty,tw,th), got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    rpn::RpnPrediction pred;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        pred.probabilities.push_back(m.at(r, 0));
        pred.deltas.push_back({m.at(r, 1), m.at(r, 2), m.at(r, 3), m.at(r, 4)});
    }
    return pred;
}

int cmd_rpn_targets(const PipelineConfig& config, const RpnOptions& opts, const ImageSizes& sizes, std::ostream& out,
                    std::ostream& err) {
    if (opts.pseudo_file.empty()) throw ConfigError("--pseudo is required");
    ensure_dir(config.output_dir);
    std::vector<PseudoBoxRecord> records;
    {
        const auto rows = read_json_lines(opts.pseudo_file);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            try {
                records.push_back(pseudo_box_from_json(rows[i]));
            } catch (const std::exception& e) {
                throw ParseError(opts.pseudo_file.string(), i + 1, e.what());
            }
        }
    }

    FailureLog failures;
    parallel_for(
        records.size(), config.jobs, [&](std::size_t i) { return image_item(records[i].image_id); },
        [&](std::size_t i) {
            const auto& rec = records[i];
            const auto extent = sizes.at(rec.image_id);
            const std::size_t fh = opts.feature_h ? opts.feature_h
                                                  : static_cast<std::size_t>(std::ceil(
                                                        static_cast<double>(extent.height) / config.anchors.stride));
            const std::size_t fw = opts.feature_w ? opts.feature_w
                                                  : static_cast<std::size_t>(std::ceil(
                                                        static_cast<double>(extent.width) / config.anchors.stride));
            const auto grid = geometry::generate_anchors(fh, fw, config.anchors);
            auto targets = rpn::label_anchors(grid, rec.box, extent, {config.pos_iou, config.neg_iou});
            if (opts.sample) {
                targets = rpn::sample_minibatch(
                    targets, {config.batch_size, config.positive_fraction, image_seed(config.seed, rec.image_id)});
            }
            const std::string stem = std::to_string(rec.image_id);
            write_file_atomic(config.output_dir / (stem + "_targets.csv"), targets_csv(targets));

            if (!opts.prediction_dir.empty()) {
                const auto pred = load_prediction(opts.prediction_dir, rec.image_id, grid.size());
                const double sampled = static_cast<double>(targets.anchors.size() -
                                                           targets.count(rpn::AnchorLabel::Ignore));
                if (!config.n_cls && sampled == 0.0) throw InvalidArgument("no labeled anchors to normalize by");
                const auto loss = rpn::rpn_loss(pred, targets, config.lambda, config.n_cls.value_or(sampled),
                                                config.n_reg.value_or(static_cast<double>(grid.locations())));
                write_file_atomic(config.output_dir / (stem + "_loss.json"), loss_to_json(loss).dump(2) + "\n");
            }
        },
        failures);
    out << "rpn-targets: " << records.size() << " images\n";
    return failures.report(err);
}

int cmd_nms(const PipelineConfig& config, const fs::path& input, std::ostream& out) {
    if (input.empty()) throw ConfigError("--in is required");
    ensure_dir(config.output_dir);
    const auto proposals = read_proposals_csv(input);

    std::map<ImageId, std::vector<geometry::ScoredBox>> by_image;
    for (const auto& p : proposals) by_image[p.image_id].push_back(p.scored);

    std::vector<Proposal> kept;
    for (const auto& [id, boxes] : by_image) {
        for (const auto& b : geometry::nms(boxes, config.nms_iou, config.max_keep)) kept.push_back({id, b});
    }
    write_file_atomic(config.output_dir / "proposals_nms.csv", proposals_csv(kept));
    out << "nms: kept " << kept.size() << " of " << proposals.size() << " proposals\n";
    return kExitOk;
}

int cmd_roipool(const PipelineConfig& config, const fs::path& features_file, const fs::path& rois_file,
                std::size_t pooled_h, std::size_t pooled_w, std::ostream& out, std::ostream& err) {
    if (features_file.empty() || rois_file.empty()) throw ConfigError("--feature-file and --rois are required");
    ensure_dir(config.output_dir);
    const Tensor3 features = read_tensor3(features_file);
    const auto rois = read_proposals_csv(rois_file);

    FailureLog failures;
    parallel_for(
        rois.size(), config.jobs, [&](std::size_t i) { return "roi " + std::to_string(i); },
        [&](std::size_t i) {
            const auto pooled = geometry::roi_pool(features, rois[i].scored.box, config.anchors.stride, pooled_h, pooled_w);
            write_tensor(pooled, config.output_dir / ("roi_" + std::to_string(i) + ".npy"));
        },
        failures);
    out << "roipool: " << rois.size() << " regions\n";
    return failures.report(err);
}

dataset::Split parse_split(const std::string& s) {
    if (s == "all") return dataset::Split::All;
    if (s == "train") return dataset::Split::Train;
    if (s == "test") return dataset::Split::Test;
    throw ConfigError("--split must be all, train or test");
}

std::vector<metrics::EvalRecord> load_records(const PipelineConfig& config, const fs::path& predictions,
                                              const std::string& split) {
    if (config.dataset_root.empty()) throw ConfigError("--dataset is required");
    if (predictions.empty()) throw ConfigError("--predictions is required");
    const auto index = dataset::load_index(config.dataset_root);
    return dataset::join_records(index, read_predictions(predictions), parse_split(split));
}

int cmd_eval(const PipelineConfig& config, const fs::path& predictions, const std::string& split, std::ostream& out) {
    const auto records = load_records(config, predictions, split);
    ensure_dir(config.output_dir);
    const auto report = metrics::evaluate(records, config.num_classes, config.iou_cut);
    write_file_atomic(config.output_dir / "report.json", eval_report_to_json(report).dump(2) + "\n");
    write_file_atomic(config.output_dir / "confusion.csv", confusion_csv(report.confusion));
    if (report.localization) {
        write_file_atomic(config.output_dir / "histogram.csv", histogram_csv(report.localization->histogram));
    }
    out << "records " << report.records << " accuracy " << format_real(report.accuracy);
    if (report.localization) out << " localization " << format_real(report.localization->accuracy);
    if (report.pcl) out << " pcl " << format_real(report.pcl->average);
    out << "\n";
    return kExitOk;
}

int cmd_confusion(const PipelineConfig& config, const fs::path& predictions, const std::string& split,
                  std::size_t top, std::ostream& out) {
    const auto records = load_records(config, predictions, split);
    ensure_dir(config.output_dir);
    const auto matrix = metrics::confusion(records, config.num_classes);
    const auto pairs = matrix.top_confused_pairs(top);
    write_file_atomic(config.output_dir / "confusion.csv", confusion_csv(matrix));
    write_file_atomic(config.output_dir / "top_pairs.csv", top_pairs_csv(pairs));
    for (const auto& p : pairs) out << p.true_class << " -> " << p.predicted_class << ": " << p.count << "\n";
    return kExitOk;
}

geometry::Box parse_box_arg(const std::string& text) {
    std::stringstream ss(text);
    std::string item;
    std::vector<double> v;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad box '" + text + "', expected x1,y1,x2,y2");
        }
    }
    if (v.size() != 4) throw ConfigError("bad box '" + text + "', expected x1,y1,x2,y2");
    geometry::Box b{v[0], v[1], v[2], v[3]};
    if (!b.valid()) throw ConfigError("box '" + text + "' has x2 < x1 or y2 < y1");
    return b;
}

PartDot parse_part_arg(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument(text);
        return PartDot{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ConfigError("bad part '" + text + "', expected x,y");
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Saliency-guided discriminative localization pipeline"};
    app.name("discloc");
    app.require_subcommand(1);

    CommonOptions common;

    auto* index_cmd = app.add_subcommand("index", "Parse a CUB-200-2011 directory into index.jsonl");
    add_config_options(index_cmd, common);

    CamOptions cam_opts;
    std::size_t forced_class = 0;
    auto* cam_cmd = app.add_subcommand("cam", "Class activation maps from exported features");
    add_config_options(cam_cmd, common);
    cam_cmd->add_option("--ids", cam_opts.ids, "Image ids (default: every <id>.npy)")->delimiter(',');
    auto* class_opt = cam_cmd->add_option("--class", forced_class, "Use this class instead of the prediction");

    fs::path saliency_dir;
    std::vector<ImageId> box_ids;
    ImageSizes box_sizes;
    std::size_t box_w = 0, box_h = 0;
    auto* box_cmd = app.add_subcommand("pseudo-box", "Pseudo ground-truth boxes from saliency maps");
    add_config_options(box_cmd, common);
    box_cmd->add_option("--saliency", saliency_dir, "Directory written by `cam`")->required();
    box_cmd->add_option("--ids", box_ids, "Image ids (default: every <id>.npy)")->delimiter(',');
    add_image_size_options(box_cmd, box_sizes, box_w, box_h);

    RpnOptions rpn_opts;
    ImageSizes rpn_sizes;
    std::size_t rpn_w = 0, rpn_h = 0;
    auto* rpn_cmd = app.add_subcommand("rpn-targets", "Anchor labels/targets (and loss) from pseudo boxes");
    add_config_options(rpn_cmd, common);
    rpn_cmd->add_option("--pseudo", rpn_opts.pseudo_file, "pseudo_boxes.jsonl")->required();
    rpn_cmd->add_option("--predictions", rpn_opts.prediction_dir, "Directory of <id>.npy Ax5 RPN outputs");
    rpn_cmd->add_option("--feature-w", rpn_opts.feature_w, "Feature map width (default ceil(W/stride))");
    rpn_cmd->add_option("--feature-h", rpn_opts.feature_h, "Feature map height (default ceil(H/stride))");
    rpn_cmd->add_flag("--sample", rpn_opts.sample, "Subsample a balanced mini-batch");
    add_image_size_options(rpn_cmd, rpn_sizes, rpn_w, rpn_h);

    fs::path nms_in;
    auto* nms_cmd = app.add_subcommand("nms", "Non-maximum suppression over a proposal CSV");
    add_config_options(nms_cmd, common);
    nms_cmd->add_option("--in", nms_in, "image_id,x1,y1,x2,y2,score CSV")->required();

    fs::path roi_features, roi_file;
    std::size_t pooled_h = 7, pooled_w = 7;
    auto* roi_cmd = app.add_subcommand("roipool", "RoI max pooling of one feature tensor");
    add_config_options(roi_cmd, common);
    roi_cmd->add_option("--feature-file", roi_features, "C x H x W feature NPY")->required();
    roi_cmd->add_option("--rois", roi_file, "image_id,x1,y1,x2,y2,score CSV")->required();
    roi_cmd->add_option("--pooled-h", pooled_h, "Output bins per column")->check(CLI::PositiveNumber);
    roi_cmd->add_option("--pooled-w", pooled_w, "Output bins per row")->check(CLI::PositiveNumber);

    fs::path eval_predictions;
    std::string eval_split = "all";
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy, localization, IoU histogram, PCL, confusion");
    add_config_options(eval_cmd, common);
    eval_cmd->add_option("--predictions", eval_predictions, "JSON lines with image_id, class, box")->required();
    eval_cmd->add_option("--split", eval_split, "all | train | test");

    fs::path conf_predictions;
    std::string conf_split = "all";
    std::size_t top = 10;
    auto* conf_cmd = app.add_subcommand("confusion", "Confusion matrix and most-confused pairs");
    add_config_options(conf_cmd, common);
    conf_cmd->add_option("--predictions", conf_predictions, "JSON lines with image_id and class")->required();
    conf_cmd->add_option("--split", conf_split, "all | train | test");
    conf_cmd->add_option("--top", top, "Number of confused pairs to list");

    fs::path render_in, render_out;
    std::vector<std::string> render_boxes, render_gt, render_parts;
    auto* render_cmd = app.add_subcommand("render", "Draw predicted/ground-truth boxes and parts onto an image");
    render_cmd->add_option("--image", render_in, "PNG or JPEG input")->required();
    render_cmd->add_option("--output", render_out, "PNG output path")->required();
    render_cmd->add_option("--box", render_boxes, "Predicted box x1,y1,x2,y2 (yellow)")->allow_extra_args(false);
    render_cmd->add_option("--gt-box", render_gt, "Ground-truth box x1,y1,x2,y2 (red)")->allow_extra_args(false);
    render_cmd->add_option("--part", render_parts, "Part location x,y")->allow_extra_args(false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitFatal;
    }

    try {
        if (render_cmd->parsed()) {
            Overlay overlay;
            for (const auto& b : render_boxes) overlay.predicted.push_back(parse_box_arg(b));
            for (const auto& b : render_gt) overlay.ground_truth.push_back(parse_box_arg(b));
            for (const auto& p : render_parts) overlay.parts.push_back(parse_part_arg(p));
            if (render_out.has_parent_path()) ensure_dir(render_out.parent_path());
            try {
                render_file(render_in, render_out, overlay);
            } catch (const ImageError& e) {
                err << "error: " << e.what() << "\n";
                return kExitItemFailures;
            }
            out << "render: wrote " << render_out.string() << "\n";
            return kExitOk;
        }

        const PipelineConfig config = load_config(common.config_file, common.overrides);
        if (index_cmd->parsed()) return cmd_index(config, out);
        if (cam_cmd->parsed()) {
            if (class_opt->count()) cam_opts.forced_class = forced_class;
            return cmd_cam(config, cam_opts, out, err);
        }
        if (box_cmd->parsed()) {
            finish_image_sizes(box_sizes, box_w, box_h, config);
            return cmd_pseudo_box(config, saliency_dir, box_ids, box_sizes, out, err);
        }
        if (rpn_cmd->parsed()) {
            finish_image_sizes(rpn_sizes, rpn_w, rpn_h, config);
            return cmd_rpn_targets(config, rpn_opts, rpn_sizes, out, err);
        }
        if (nms_cmd->parsed()) return cmd_nms(config, nms_in, out);
        if (roi_cmd->parsed()) return cmd_roipool(config, roi_features, roi_file, pooled_h, pooled_w, out, err);
        if (eval_cmd->parsed()) return cmd_eval(config, eval_predictions, eval_split, out);
        if (conf_cmd->parsed()) return cmd_confusion(config, conf_predictions, conf_split, top, out);
    } catch (const Error& e) {
        err << "fatal: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}

}  // namespace discloc::cli

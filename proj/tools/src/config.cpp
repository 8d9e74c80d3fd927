#include "discloc/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace discloc::cli {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
    }
    return out;
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& value) {
    std::array<double, 3> out{};
    std::stringstream ss(value);
    std::string item;
    std::size_t n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == 3) throw ConfigError("config key '" + key + "' takes exactly 3 comma-separated values");
        out[n++] = parse_number<double>(key, trim(item));
    }
    if (n != 3) throw ConfigError("config key '" + key + "' takes exactly 3 comma-separated values");
    return out;
}

void require_unit(const char* key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(key) + " must lie in [0,1]");
}

}  // namespace

const std::vector<std::string>& PipelineConfig::keys() {
    static const std::vector<std::string> k = {
        "dataset", "features", "out",     "stride",     "scales",    "ratios",     "pos_iou",
        "neg_iou", "nms_iou",  "iou_cut", "otsu_bins",  "lambda",    "n_cls",      "n_reg",
        "batch_size", "positive_fraction", "max_keep", "num_classes", "seed", "jobs"};
    return k;
}

void PipelineConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    if (key == "dataset") dataset_root = value;
    else if (key == "features") feature_dir = value;
    else if (key == "out") output_dir = value;
    else if (key == "stride") anchors.stride = parse_number<double>(key, value);
    else if (key == "scales") anchors.scales = parse_triple(key, value);
    else if (key == "ratios") anchors.ratios = parse_triple(key, value);
    else if (key == "pos_iou") pos_iou = parse_number<double>(key, value);
    else if (key == "neg_iou") neg_iou = parse_number<double>(key, value);
    else if (key == "nms_iou") nms_iou = parse_number<double>(key, value);
    else if (key == "iou_cut") iou_cut = parse_number<double>(key, value);
    else if (key == "otsu_bins") otsu_bins = parse_number<std::size_t>(key, value);
    else if (key == "lambda") lambda = parse_number<double>(key, value);
    else if (key == "n_cls") n_cls = parse_number<double>(key, value);
    else if (key == "n_reg") n_reg = parse_number<double>(key, value);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
    else if (key == "positive_fraction") positive_fraction = parse_number<double>(key, value);
    else if (key == "max_keep") max_keep = parse_number<std::size_t>(key, value);
    else if (key == "num_classes") num_classes = parse_number<std::size_t>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "jobs") jobs = parse_number<std::size_t>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void PipelineConfig::validate() const {
    require_unit("pos_iou", pos_iou);
    require_unit("neg_iou", neg_iou);
    require_unit("nms_iou", nms_iou);
    require_unit("iou_cut", iou_cut);
    require_unit("positive_fraction", positive_fraction);
    if (!(pos_iou > neg_iou)) throw ConfigError("pos_iou must exceed neg_iou");
    if (!(anchors.stride > 0.0)) throw ConfigError("stride must be positive");
    for (double s : anchors.scales) {
        if (!(s > 0.0)) throw ConfigError("scales must be positive");
    }
    for (double r : anchors.ratios) {
        if (!(r > 0.0)) throw ConfigError("ratios must be positive");
    }
    if (otsu_bins < 2) throw ConfigError("otsu_bins must be at least 2");
    if (n_cls && !(*n_cls > 0.0)) throw ConfigError("n_cls must be positive");
    if (n_reg && !(*n_reg > 0.0)) throw ConfigError("n_reg must be positive");
    if (num_classes == 0) throw ConfigError("num_classes must be positive");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(number) + ": expected key=value");
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides) {
    PipelineConfig config;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot read config file " + file->string());
        std::stringstream buf;
        buf << in.rdbuf();
        for (const auto& [k, v] : parse_config_text(buf.str(), file->string())) config.set(k, v);
    }
    for (const auto& [k, v] : overrides) config.set(k, v);
    config.validate();
    return config;
}

}  // namespace discloc::cli

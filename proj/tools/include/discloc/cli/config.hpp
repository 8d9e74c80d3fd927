#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "discloc/errors.hpp"
#include "discloc/geometry.hpp"
#include "discloc/saliency.hpp"

namespace discloc::cli {

class ConfigError : public Error {
    using Error::Error;
};

/// Every tunable of the pipeline. Loaded from a flat key=value file, then
/// overridden by command-line flags.
struct PipelineConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path feature_dir;
    std::filesystem::path output_dir;

    geometry::AnchorConfig anchors;

    double pos_iou = 0.7;
    double neg_iou = 0.3;
    double nms_iou = 0.7;
    double iou_cut = 0.5;

    std::size_t otsu_bins = saliency::kDefaultOtsuBins;

    double lambda = 10.0;
    /// Unset: number of sampled (non-ignored) anchors.
    std::optional<double> n_cls;
    /// Unset: number of anchor locations (feature_h * feature_w).
    std::optional<double> n_reg;

    std::size_t batch_size = 256;
    double positive_fraction = 0.5;
    std::size_t max_keep = 300;
    std::size_t num_classes = 200;

    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    /// Applies one key=value setting. Unknown keys and malformed values raise
    /// ConfigError.
    void set(const std::string& key, const std::string& value);

    /// Checks cross-field constraints (thresholds in [0,1], pos > neg, ...).
    void validate() const;

    /// The recognised keys, in canonical order.
    static const std::vector<std::string>& keys();
};

/// Parses `key = value` lines; '#' starts a comment. Later keys win.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source = "<config>");

/// Defaults, then the file (when given), then `overrides`; validated.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides);

}  // namespace discloc::cli

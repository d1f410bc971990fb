#pragma once

#include <array>
#include <chrono>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cellseg/metrics.hpp"
#include "cellseg/version.hpp"

namespace cellseg {

/// Configuration echoed into every report so results are reproducible.
struct ReportConfig {
    double iou_tau = 0.5;
    DetWeights det_weights;
    bool ignore_rule = false;
};

namespace detail {

inline nlohmann::ordered_json score_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const MetricReport& report,
                                             const ReportConfig& config,
                                             bool timestamp = false) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["config"] = {
        {"iou_tau", config.iou_tau},
        {"det_weights", {config.det_weights.w_fn, config.det_weights.w_fp,
                         config.det_weights.w_ns}},
        {"ignore_rule", config.ignore_rule},
    };
    if (timestamp) {
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        j["timestamp_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    }
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& e : report.images) {
        j["images"].push_back({
            {"image_id", e.image_id},
            {"seg", detail::score_json(e.metrics.seg)},
            {"det", detail::score_json(e.metrics.det)},
            {"mma", detail::score_json(e.metrics.mma)},
            {"n_gt", e.metrics.n_gt},
            {"n_pred", e.metrics.n_pred},
            {"n_matched", e.metrics.n_matched},
        });
    }
    j["aggregate"] = {
        {"seg", detail::score_json(report.aggregate.seg)},
        {"det", detail::score_json(report.aggregate.det)},
        {"mma", detail::score_json(report.aggregate.mma)},
        {"n_images", report.aggregate.n_images},
        {"excluded", {{"seg", report.aggregate.excluded_seg},
                      {"det", report.aggregate.excluded_det},
                      {"mma", report.aggregate.excluded_mma}}},
    };
    j["failures"] = nlohmann::ordered_json::array();
    for (const auto& f : report.failures)
        j["failures"].push_back({{"image_id", f.image_id}, {"error", f.error}});
    return j;
}

inline void write_report(const MetricReport& report, const ReportConfig& config,
                         const std::string& path, bool timestamp = false) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_report: cannot open " + path);
    out << report_to_json(report, config, timestamp).dump(2) << "\n";
    if (!out) throw std::runtime_error("write_report: write failed for " + path);
}

}  // namespace cellseg

#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>

#include "cellseg/matching.hpp"
#include "cellseg/raster.hpp"

namespace cellseg {

/// Graph-edit costs for the detection measure: missing node, spurious node, split node.
struct DetWeights {
    double w_fn = 10.0;
    double w_fp = 1.0;
    double w_ns = 5.0;
};

/// Binary grid marking unlabeled pixels that evaluation should ignore.
struct IgnoreRegion {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> mask;  // 1 = ignored

    IgnoreRegion() = default;
    IgnoreRegion(int h, int w) : height(h), width(w), mask(static_cast<size_t>(h) * w, 0) {}
    uint8_t& at(int y, int x) { return mask[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return mask[static_cast<size_t>(y) * width + x]; }
};

struct ImageMetrics {
    std::optional<double> seg;
    std::optional<double> det;
    std::optional<double> mma;
    int n_gt = 0;
    int n_pred = 0;
    int n_matched = 0;  // pairs of the IoU-threshold matching
};

/// Evaluation-time ignore rule: predicted instances with more than half their
/// area inside the region are deleted entirely; the region's remaining pixels
/// are cleared to background in both masks.
inline std::pair<LabelMask, LabelMask> apply_ignore(const LabelMask& gt, const LabelMask& pred,
                                                    const IgnoreRegion& ignore) {
    require_same_shape(gt.height, gt.width, pred.height, pred.width, "apply_ignore");
    require_same_shape(gt.height, gt.width, ignore.height, ignore.width, "apply_ignore");
    const size_t n = gt.size();

    std::vector<int64_t> area(65536, 0), inside(65536, 0);
    for (size_t i = 0; i < n; ++i) {
        const uint16_t p = pred.labels[i];
        if (p == 0) continue;
        ++area[p];
        if (ignore.mask[i]) ++inside[p];
    }
    std::vector<char> drop(65536, 0);
    for (int v = 1; v < 65536; ++v)
        if (area[v] > 0 && 2 * inside[v] > area[v]) drop[v] = 1;

    LabelMask gt_out = gt, pred_out = pred;
    for (size_t i = 0; i < n; ++i) {
        if (drop[pred_out.labels[i]]) pred_out.labels[i] = 0;
        if (ignore.mask[i]) {
            gt_out.labels[i] = 0;
            pred_out.labels[i] = 0;
        }
    }
    return {std::move(gt_out), std::move(pred_out)};
}

namespace detail {

inline std::optional<double> seg_from_table(const OverlapTable& table, double tau) {
    if (table.gt_areas.empty()) return std::nullopt;
    const Matching m = iou_threshold_matching(table, tau);
    if (m.pairs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : m.pairs) sum += p.iou;
    return sum / static_cast<double>(m.pairs.size());
}

inline std::optional<double> det_from_table(const OverlapTable& table, const DetWeights& w) {
    if (!(w.w_fn > 0 && w.w_fp > 0 && w.w_ns > 0))
        throw std::invalid_argument("det_score: weights must be positive");
    const auto n_gt = table.gt_areas.size();
    if (n_gt == 0) return std::nullopt;

    const CoverageMap cov = majority_coverage_map(table);
    int64_t false_negatives = 0;
    std::map<uint16_t, int> gts_per_pred;
    for (const auto& [g, preds] : cov.covered_by) {
        if (preds.empty()) ++false_negatives;
        for (uint16_t p : preds) ++gts_per_pred[p];
    }
    int64_t splits = 0;
    for (const auto& [p, k] : gts_per_pred) splits += k - 1;
    int64_t false_positives = 0;
    for (const auto& [p, area] : table.pred_areas)
        if (gts_per_pred.find(p) == gts_per_pred.end()) ++false_positives;

    const double aogm_d = w.w_fn * static_cast<double>(false_negatives) +
                          w.w_fp * static_cast<double>(false_positives) +
                          w.w_ns * static_cast<double>(splits);
    const double aogm_d0 = w.w_fn * static_cast<double>(n_gt);
    return 1.0 - std::min(aogm_d, aogm_d0) / aogm_d0;
}

inline std::optional<double> mma_from_table(const OverlapTable& table, int64_t union_pixels) {
    if (union_pixels == 0) return std::nullopt;
    const Matching m = max_weight_matching(table);
    return static_cast<double>(m.total_intersection()) / static_cast<double>(union_pixels);
}

inline int64_t union_foreground(const LabelMask& gt, const LabelMask& pred) {
    int64_t u = 0;
    const size_t n = gt.size();
    for (size_t i = 0; i < n; ++i)
        if (gt.labels[i] != 0 || pred.labels[i] != 0) ++u;
    return u;
}

}  // namespace detail

/// Mean IoU over one-to-one matched pairs at IoU >= tau. 0 when gt has
/// instances but nothing matches; null when gt is empty.
inline std::optional<double> seg_score(const LabelMask& gt, const LabelMask& pred,
                                       const IgnoreRegion* ignore = nullptr, double tau = 0.5) {
    require_same_shape(gt.height, gt.width, pred.height, pred.width, "seg_score");
    if (ignore) {
        auto [g2, p2] = apply_ignore(gt, pred, *ignore);
        return detail::seg_from_table(overlap_table(g2, p2), tau);
    }
    return detail::seg_from_table(overlap_table(gt, pred), tau);
}

/// 1 - min(AOGM-D, AOGM-D0) / AOGM-D0 with node add / delete / split costs.
inline std::optional<double> det_score(const LabelMask& gt, const LabelMask& pred,
                                       const DetWeights& weights = {},
                                       const IgnoreRegion* ignore = nullptr) {
    require_same_shape(gt.height, gt.width, pred.height, pred.width, "det_score");
    if (ignore) {
        auto [g2, p2] = apply_ignore(gt, pred, *ignore);
        return detail::det_from_table(overlap_table(g2, p2), weights);
    }
    return detail::det_from_table(overlap_table(gt, pred), weights);
}

/// Optimally matched intersection mass over the union of all foreground pixels.
inline std::optional<double> mma_score(const LabelMask& gt, const LabelMask& pred,
                                       const IgnoreRegion* ignore = nullptr) {
    require_same_shape(gt.height, gt.width, pred.height, pred.width, "mma_score");
    if (ignore) {
        auto [g2, p2] = apply_ignore(gt, pred, *ignore);
        return detail::mma_from_table(overlap_table(g2, p2), detail::union_foreground(g2, p2));
    }
    return detail::mma_from_table(overlap_table(gt, pred), detail::union_foreground(gt, pred));
}

inline ImageMetrics evaluate_pair(const LabelMask& gt, const LabelMask& pred,
                                  const IgnoreRegion* ignore = nullptr, double iou_tau = 0.5,
                                  const DetWeights& weights = {}) {
    require_same_shape(gt.height, gt.width, pred.height, pred.width, "evaluate_pair");
    LabelMask g2, p2;
    const LabelMask* g = &gt;
    const LabelMask* p = &pred;
    if (ignore) {
        std::tie(g2, p2) = apply_ignore(gt, pred, *ignore);
        g = &g2;
        p = &p2;
    }
    const OverlapTable table = overlap_table(*g, *p);
    ImageMetrics m;
    m.seg = detail::seg_from_table(table, iou_tau);
    m.det = detail::det_from_table(table, weights);
    m.mma = detail::mma_from_table(table, detail::union_foreground(*g, *p));
    m.n_gt = static_cast<int>(table.gt_areas.size());
    m.n_pred = static_cast<int>(table.pred_areas.size());
    m.n_matched = static_cast<int>(iou_threshold_matching(table, iou_tau).pairs.size());
    return m;
}

struct ImageEntry {
    std::string image_id;
    ImageMetrics metrics;
};

struct FailureEntry {
    std::string image_id;
    std::string error;
};

/// Unweighted means over non-null per-image values; excluded counts recorded.
struct ReportAggregate {
    std::optional<double> seg;
    std::optional<double> det;
    std::optional<double> mma;
    int n_images = 0;
    int excluded_seg = 0;
    int excluded_det = 0;
    int excluded_mma = 0;
};

struct MetricReport {
    std::vector<ImageEntry> images;
    ReportAggregate aggregate;
    std::vector<FailureEntry> failures;
};

inline ReportAggregate aggregate_entries(const std::vector<ImageEntry>& entries) {
    ReportAggregate agg;
    agg.n_images = static_cast<int>(entries.size());
    double s = 0, d = 0, m = 0;
    int ns = 0, nd = 0, nm = 0;
    for (const auto& e : entries) {
        if (e.metrics.seg) {
            s += *e.metrics.seg;
            ++ns;
        } else {
            ++agg.excluded_seg;
        }
        if (e.metrics.det) {
            d += *e.metrics.det;
            ++nd;
        } else {
            ++agg.excluded_det;
        }
        if (e.metrics.mma) {
            m += *e.metrics.mma;
            ++nm;
        } else {
            ++agg.excluded_mma;
        }
    }
    if (ns > 0) agg.seg = s / ns;
    if (nd > 0) agg.det = d / nd;
    if (nm > 0) agg.mma = m / nm;
    return agg;
}

}  // namespace cellseg

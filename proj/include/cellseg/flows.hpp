#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Flow-field objective: unit vectors pointing toward each instance's center
/// plus a foreground-probability channel. Planar channel order is (dy, dx, cellprob).
struct ObjectiveField {
    int height = 0;
    int width = 0;
    std::vector<float> dy;
    std::vector<float> dx;
    std::vector<float> cellprob;

    ObjectiveField() = default;
    ObjectiveField(int h, int w)
        : height(h), width(w),
          dy(static_cast<size_t>(h) * w, 0.0f),
          dx(static_cast<size_t>(h) * w, 0.0f),
          cellprob(static_cast<size_t>(h) * w, 0.0f) {}

    size_t idx(int y, int x) const { return static_cast<size_t>(y) * width + x; }

    PlanarField to_planar() const {
        PlanarField f(3, height, width);
        std::copy(dy.begin(), dy.end(), f.data.begin());
        std::copy(dx.begin(), dx.end(), f.data.begin() + f.plane_size());
        std::copy(cellprob.begin(), cellprob.end(), f.data.begin() + 2 * f.plane_size());
        return f;
    }

    static ObjectiveField from_planar(const PlanarField& f) {
        if (f.channels != 3)
            throw std::invalid_argument("ObjectiveField: expected 3 channels, got " +
                                        std::to_string(f.channels));
        ObjectiveField o(f.height, f.width);
        const size_t n = f.plane_size();
        std::copy(f.data.begin(), f.data.begin() + n, o.dy.begin());
        std::copy(f.data.begin() + n, f.data.begin() + 2 * n, o.dx.begin());
        std::copy(f.data.begin() + 2 * n, f.data.end(), o.cellprob.begin());
        return o;
    }
};

/// Per-pixel loss weights: 1 on labeled pixels, w_ignore on unlabeled ones.
/// Stored as doubles so the renormalization is exact to the stated weight.
struct WeightMask {
    int height = 0;
    int width = 0;
    std::vector<double> w;

    WeightMask() = default;
    WeightMask(int h, int w_, double fill = 1.0)
        : height(h), width(w_), w(static_cast<size_t>(h) * w_, fill) {}
};

struct DecodeParams {
    int n_steps = 200;
    double step_size = 1.0;
    double cellprob_threshold = 0.5;
    int min_size = 15;
};

namespace detail {

struct InstanceBox {
    int r0, c0, r1, c1;  // inclusive
};

// Instance pixel nearest the coordinate median; ties resolved by raster order.
inline std::pair<int, int> medoid_pixel(const std::vector<std::pair<int, int>>& pixels) {
    std::vector<int> rows, cols;
    rows.reserve(pixels.size());
    cols.reserve(pixels.size());
    for (auto [r, c] : pixels) {
        rows.push_back(r);
        cols.push_back(c);
    }
    std::sort(rows.begin(), rows.end());
    std::sort(cols.begin(), cols.end());
    const size_t n = rows.size();
    const double med_r = (n % 2) ? rows[n / 2] : 0.5 * (rows[n / 2 - 1] + rows[n / 2]);
    const double med_c = (n % 2) ? cols[n / 2] : 0.5 * (cols[n / 2 - 1] + cols[n / 2]);

    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> best_px = pixels.front();
    for (auto [r, c] : pixels) {
        const double d = (r - med_r) * (r - med_r) + (c - med_c) * (c - med_c);
        if (d < best) {
            best = d;
            best_px = {r, c};
        }
    }
    return best_px;
}

}  // namespace detail

/// Encode a label mask as flow targets: per instance, heat is injected at the
/// medoid and spread by 4-neighbor averaging for 2*(bbox_h + bbox_w) rounds;
/// the flow is the unit-normalized central-difference gradient of log(heat).
inline ObjectiveField masks_to_flows(const LabelMask& mask) {
    ObjectiveField out(mask.height, mask.width);

    std::vector<detail::InstanceBox> boxes(65536, {INT32_MAX, INT32_MAX, -1, -1});
    std::vector<std::vector<std::pair<int, int>>> pixels(65536);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const uint16_t v = mask.at(y, x);
            if (v == 0) continue;
            auto& b = boxes[v];
            b.r0 = std::min(b.r0, y);
            b.c0 = std::min(b.c0, x);
            b.r1 = std::max(b.r1, y);
            b.c1 = std::max(b.c1, x);
            pixels[v].emplace_back(y, x);
            out.cellprob[out.idx(y, x)] = 1.0f;
        }
    }

    for (int label = 1; label < 65536; ++label) {
        const auto& px = pixels[label];
        if (px.empty()) continue;
        const auto& b = boxes[label];
        const int bh = b.r1 - b.r0 + 1;
        const int bw = b.c1 - b.c0 + 1;
        const int lh = bh + 2, lw = bw + 2;  // box padded by 1 on every side
        const auto lidx = [lw](int r, int c) { return static_cast<size_t>(r) * lw + c; };

        std::vector<char> in_mask(static_cast<size_t>(lh) * lw, 0);
        for (auto [r, c] : px) in_mask[lidx(r - b.r0 + 1, c - b.c0 + 1)] = 1;

        const auto [med_r, med_c] = detail::medoid_pixel(px);
        const size_t center = lidx(med_r - b.r0 + 1, med_c - b.c0 + 1);

        std::vector<double> heat(static_cast<size_t>(lh) * lw, 0.0);
        std::vector<double> next(heat.size(), 0.0);
        const int iters = 2 * (bh + bw);
        for (int t = 0; t < iters; ++t) {
            heat[center] += 1.0;
            for (auto [r, c] : px) {
                const int lr = r - b.r0 + 1, lc = c - b.c0 + 1;
                double s = 0.0;
                if (in_mask[lidx(lr - 1, lc)]) s += heat[lidx(lr - 1, lc)];
                if (in_mask[lidx(lr + 1, lc)]) s += heat[lidx(lr + 1, lc)];
                if (in_mask[lidx(lr, lc - 1)]) s += heat[lidx(lr, lc - 1)];
                if (in_mask[lidx(lr, lc + 1)]) s += heat[lidx(lr, lc + 1)];
                next[lidx(lr, lc)] = s / 4.0;
            }
            for (auto [r, c] : px) {
                const size_t i = lidx(r - b.r0 + 1, c - b.c0 + 1);
                heat[i] = next[i];
            }
        }

        const auto log_heat = [&](int lr, int lc) { return std::log(heat[lidx(lr, lc)] + 1e-60); };
        for (auto [r, c] : px) {
            const int lr = r - b.r0 + 1, lc = c - b.c0 + 1;
            const double gy = 0.5 * (log_heat(lr + 1, lc) - log_heat(lr - 1, lc));
            const double gx = 0.5 * (log_heat(lr, lc + 1) - log_heat(lr, lc - 1));
            const double mag = std::sqrt(gy * gy + gx * gx);
            const size_t i = out.idx(r, c);
            if (mag >= 1e-12) {
                out.dy[i] = static_cast<float>(gy / mag);
                out.dx[i] = static_cast<float>(gx / mag);
            }
        }
    }
    return out;
}

namespace detail {

inline void bilinear_flow(const ObjectiveField& f, double y, double x, double& vy, double& vx) {
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, f.height - 1);
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, f.width - 1);
    const int y1 = std::min(y0 + 1, f.height - 1);
    const int x1 = std::min(x0 + 1, f.width - 1);
    const double fy = std::clamp(y - y0, 0.0, 1.0);
    const double fx = std::clamp(x - x0, 0.0, 1.0);
    const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
    const double w10 = fy * (1 - fx), w11 = fy * fx;
    const size_t i00 = f.idx(y0, x0), i01 = f.idx(y0, x1);
    const size_t i10 = f.idx(y1, x0), i11 = f.idx(y1, x1);
    vy = w00 * f.dy[i00] + w01 * f.dy[i01] + w10 * f.dy[i10] + w11 * f.dy[i11];
    vx = w00 * f.dx[i00] + w01 * f.dx[i01] + w10 * f.dx[i10] + w11 * f.dx[i11];
}

}  // namespace detail

/// Recover instances by advancing every foreground pixel along the flow field
/// and clustering the final positions (8-connected occupied bins).
inline LabelMask flows_to_masks(const ObjectiveField& field, const DecodeParams& params = {}) {
    if (params.n_steps < 1 || params.step_size <= 0 || params.cellprob_threshold <= 0 ||
        params.cellprob_threshold >= 1 || params.min_size < 0)
        throw std::invalid_argument("flows_to_masks: invalid decode parameters");

    const int h = field.height, w = field.width;
    std::vector<size_t> fg;
    for (size_t i = 0; i < field.cellprob.size(); ++i)
        if (field.cellprob[i] >= params.cellprob_threshold) fg.push_back(i);

    LabelMask result(h, w);
    if (fg.empty()) return result;

    std::vector<int> final_bin(fg.size());
    for (size_t k = 0; k < fg.size(); ++k) {
        double y = static_cast<double>(fg[k] / w);
        double x = static_cast<double>(fg[k] % w);
        for (int step = 0; step < params.n_steps; ++step) {
            double vy, vx;
            detail::bilinear_flow(field, y, x, vy, vx);
            y = std::clamp(y + params.step_size * vy, 0.0, static_cast<double>(h - 1));
            x = std::clamp(x + params.step_size * vx, 0.0, static_cast<double>(w - 1));
        }
        const int by = std::clamp(static_cast<int>(std::lround(y)), 0, h - 1);
        const int bx = std::clamp(static_cast<int>(std::lround(x)), 0, w - 1);
        final_bin[k] = by * w + bx;
    }

    LabelMask occupied(h, w);
    for (int bin : final_bin) occupied.labels[bin] = 1;
    const LabelMask bins_cc = connected_components(occupied, 8);

    for (size_t k = 0; k < fg.size(); ++k) result.labels[fg[k]] = bins_cc.labels[final_bin[k]];

    std::vector<int64_t> support(65536, 0);
    for (size_t k = 0; k < fg.size(); ++k) ++support[result.labels[fg[k]]];
    for (size_t k = 0; k < fg.size(); ++k)
        if (support[result.labels[fg[k]]] < params.min_size) result.labels[fg[k]] = 0;

    return relabel_sequential(result);
}

/// Per-pixel squared error summed over the three channels, weighted by the
/// mask and renormalized by the total mask weight.
inline double ignore_masked_loss(const ObjectiveField& pred, const ObjectiveField& target,
                                 const WeightMask& weights) {
    require_same_shape(pred.height, pred.width, target.height, target.width,
                       "ignore_masked_loss");
    require_same_shape(pred.height, pred.width, weights.height, weights.width,
                       "ignore_masked_loss");
    double num = 0.0, den = 0.0;
    const size_t n = pred.dy.size();
    for (size_t i = 0; i < n; ++i) {
        const double e1 = static_cast<double>(pred.dy[i]) - target.dy[i];
        const double e2 = static_cast<double>(pred.dx[i]) - target.dx[i];
        const double e3 = static_cast<double>(pred.cellprob[i]) - target.cellprob[i];
        num += (e1 * e1 + e2 * e2 + e3 * e3) * weights.w[i];
        den += weights.w[i];
    }
    return den > 0.0 ? num / den : 0.0;
}

inline WeightMask make_weight_mask(const LabelMask& gt, double w_ignore = 0.05) {
    if (!(w_ignore > 0.0 && w_ignore <= 1.0))
        throw std::invalid_argument("make_weight_mask: w_ignore must be in (0, 1]");
    WeightMask wm(gt.height, gt.width);
    for (size_t i = 0; i < gt.size(); ++i) wm.w[i] = gt.labels[i] != 0 ? 1.0 : w_ignore;
    return wm;
}

}  // namespace cellseg

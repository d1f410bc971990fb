#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cellseg/raster.hpp"

namespace cellseg {

struct ClaheParams {
    int grid_rows = 8;
    int grid_cols = 8;
    double clip_limit = 2.0;
    int bins = 256;
};

/// Tiling layout for sliding-window inference. Windows are (row, col) offsets
/// of crop x crop tiles; together they cover every pixel.
struct TilePlan {
    int crop = 512;
    int overlap = 128;
    std::vector<std::pair<int, int>> windows;  // row-major order
};

enum class CropKind { Center, TopLeft, At };

struct CropPolicy {
    CropKind kind = CropKind::Center;
    int row = 0;
    int col = 0;

    static CropPolicy center() { return {CropKind::Center, 0, 0}; }
    static CropPolicy top_left() { return {CropKind::TopLeft, 0, 0}; }
    static CropPolicy at(int r, int c) { return {CropKind::At, r, c}; }
};

/// Contrast-limited adaptive histogram equalization. Input values in [0, 1];
/// per-tile clipped-histogram CDFs blended bilinearly between tile centers.
inline ImageGrid clahe(const ImageGrid& img, const ClaheParams& params = {}) {
    const int h = img.height, w = img.width;
    const int rows = params.grid_rows, cols = params.grid_cols, bins = params.bins;
    if (rows < 1 || cols < 1 || params.clip_limit < 1.0 || bins < 2)
        throw std::invalid_argument("clahe: invalid parameters");
    if (h < rows || w < cols)
        throw std::invalid_argument("clahe: image smaller than tile grid");

    const auto row_start = [&](int i) { return static_cast<int>(static_cast<int64_t>(i) * h / rows); };
    const auto col_start = [&](int j) { return static_cast<int>(static_cast<int64_t>(j) * w / cols); };
    const auto bin_of = [&](float v) {
        return std::clamp(static_cast<int>(v * bins), 0, bins - 1);
    };

    // per-tile clipped-CDF mapping into [0, 1]
    std::vector<double> mapping(static_cast<size_t>(rows) * cols * bins);
    std::vector<int64_t> hist(bins);
    for (int ti = 0; ti < rows; ++ti) {
        for (int tj = 0; tj < cols; ++tj) {
            const int r0 = row_start(ti), r1 = row_start(ti + 1);
            const int c0 = col_start(tj), c1 = col_start(tj + 1);
            std::fill(hist.begin(), hist.end(), 0);
            for (int y = r0; y < r1; ++y)
                for (int x = c0; x < c1; ++x) ++hist[bin_of(img.at(y, x))];
            const double n_px = static_cast<double>(r1 - r0) * (c1 - c0);
            const double clip = std::max(1.0, params.clip_limit * n_px / bins);
            double excess = 0.0;
            for (int b = 0; b < bins; ++b)
                if (hist[b] > clip) excess += hist[b] - clip;
            const double uplift = excess / bins;
            double* m = &mapping[(static_cast<size_t>(ti) * cols + tj) * bins];
            double cum = 0.0;
            for (int b = 0; b < bins; ++b) {
                cum += std::min(static_cast<double>(hist[b]), clip) + uplift;
                m[b] = cum / n_px;
            }
        }
    }

    // per-axis interpolation tables between tile centers (edges replicated)
    const auto center_r = [&](int i) { return 0.5 * (row_start(i) + row_start(i + 1) - 1); };
    const auto center_c = [&](int j) { return 0.5 * (col_start(j) + col_start(j + 1) - 1); };
    std::vector<int> ri0(h), ri1(h);
    std::vector<double> rf(h);
    for (int y = 0; y < h; ++y) {
        int i = 0;
        while (i + 1 < rows && center_r(i + 1) <= y) ++i;
        if (y <= center_r(0)) {
            ri0[y] = ri1[y] = 0;
            rf[y] = 0.0;
        } else if (y >= center_r(rows - 1)) {
            ri0[y] = ri1[y] = rows - 1;
            rf[y] = 0.0;
        } else {
            ri0[y] = i;
            ri1[y] = i + 1;
            rf[y] = (y - center_r(i)) / (center_r(i + 1) - center_r(i));
        }
    }
    std::vector<int> cj0(w), cj1(w);
    std::vector<double> cf(w);
    for (int x = 0; x < w; ++x) {
        int j = 0;
        while (j + 1 < cols && center_c(j + 1) <= x) ++j;
        if (x <= center_c(0)) {
            cj0[x] = cj1[x] = 0;
            cf[x] = 0.0;
        } else if (x >= center_c(cols - 1)) {
            cj0[x] = cj1[x] = cols - 1;
            cf[x] = 0.0;
        } else {
            cj0[x] = j;
            cj1[x] = j + 1;
            cf[x] = (x - center_c(j)) / (center_c(j + 1) - center_c(j));
        }
    }

    ImageGrid out(h, w);
    const auto map_at = [&](int ti, int tj, int b) {
        return mapping[(static_cast<size_t>(ti) * cols + tj) * bins + b];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int b = bin_of(img.at(y, x));
            const double top = (1.0 - cf[x]) * map_at(ri0[y], cj0[x], b) +
                               cf[x] * map_at(ri0[y], cj1[x], b);
            const double bot = (1.0 - cf[x]) * map_at(ri1[y], cj0[x], b) +
                               cf[x] * map_at(ri1[y], cj1[x], b);
            out.at(y, x) = static_cast<float>((1.0 - rf[y]) * top + rf[y] * bot);
        }
    }
    return out;
}

/// Shift to zero mean and unit population variance; constant input maps to zeros.
inline ImageGrid zscore_normalize(const ImageGrid& img) {
    const size_t n = img.size();
    ImageGrid out(img.height, img.width);
    if (n == 0) return out;
    double sum = 0.0;
    for (float v : img.data) sum += v;
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (float v : img.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double std_dev = std::sqrt(var);
    if (std_dev < 1e-20) return out;  // constant image
    for (size_t i = 0; i < n; ++i)
        out.data[i] = static_cast<float>((img.data[i] - mean) / std_dev);
    return out;
}

namespace detail {

// Catmull-Rom kernel (bicubic, a = -0.5)
inline double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

}  // namespace detail

/// Separable bicubic resampling with replicated borders.
inline ImageGrid resize_bicubic(const ImageGrid& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bicubic: bad output size");
    const int h = img.height, w = img.width;

    // horizontal pass
    ImageGrid tmp(h, out_w);
    const double sx = static_cast<double>(w) / out_w;
    for (int x = 0; x < out_w; ++x) {
        const double src = (x + 0.5) * sx - 0.5;
        const int i = static_cast<int>(std::floor(src));
        double wt[4];
        for (int k = 0; k < 4; ++k) wt[k] = detail::cubic_weight(src - (i - 1 + k));
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int xx = std::clamp(i - 1 + k, 0, w - 1);
                acc += wt[k] * img.at(y, xx);
            }
            tmp.at(y, x) = static_cast<float>(acc);
        }
    }
    // vertical pass
    ImageGrid out(out_h, out_w);
    const double sy = static_cast<double>(h) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double src = (y + 0.5) * sy - 0.5;
        const int i = static_cast<int>(std::floor(src));
        double wt[4];
        for (int k = 0; k < 4; ++k) wt[k] = detail::cubic_weight(src - (i - 1 + k));
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int yy = std::clamp(i - 1 + k, 0, h - 1);
                acc += wt[k] * tmp.at(yy, x);
            }
            out.at(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

struct PrepareParams {
    int crop_size = 512;
    int out_size = 896;
    ClaheParams clahe;
};

/// Full input preparation: rescale to [0,1], CLAHE, z-score, resize so the
/// shortest side reaches crop_size, crop, then bicubic upsample to out_size.
inline ImageGrid prepare_input(const ImageGrid& img, CropPolicy policy = CropPolicy::center(),
                               const PrepareParams& params = {}) {
    if (img.height < 1 || img.width < 1)
        throw std::invalid_argument("prepare_input: empty image");

    // rescale to [0,1] for CLAHE
    float lo = img.data[0], hi = img.data[0];
    for (float v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ImageGrid scaled(img.height, img.width);
    const float range = hi - lo;
    if (range > 0)
        for (size_t i = 0; i < img.size(); ++i) scaled.data[i] = (img.data[i] - lo) / range;

    ImageGrid eq = clahe(scaled, params.clahe);
    ImageGrid norm = zscore_normalize(eq);

    if (std::min(norm.height, norm.width) < params.crop_size) {
        const double scale = static_cast<double>(params.crop_size) /
                             std::min(norm.height, norm.width);
        const int nh = std::max(params.crop_size,
                                static_cast<int>(std::lround(norm.height * scale)));
        const int nw = std::max(params.crop_size,
                                static_cast<int>(std::lround(norm.width * scale)));
        norm = resize_bicubic(norm, nh, nw);
    }

    int r0 = 0, c0 = 0;
    switch (policy.kind) {
        case CropKind::Center:
            r0 = (norm.height - params.crop_size) / 2;
            c0 = (norm.width - params.crop_size) / 2;
            break;
        case CropKind::TopLeft:
            break;
        case CropKind::At:
            r0 = policy.row;
            c0 = policy.col;
            break;
    }
    if (r0 < 0 || c0 < 0 || r0 + params.crop_size > norm.height ||
        c0 + params.crop_size > norm.width)
        throw std::invalid_argument("prepare_input: crop out of bounds");

    ImageGrid crop(params.crop_size, params.crop_size);
    for (int y = 0; y < params.crop_size; ++y)
        for (int x = 0; x < params.crop_size; ++x) crop.at(y, x) = norm.at(r0 + y, c0 + x);

    return resize_bicubic(crop, params.out_size, params.out_size);
}

/// Offset of the patch-sized window whose 3x3 Laplacian response has maximum
/// variance; candidates at the given stride plus boundary-aligned positions.
inline std::pair<int, int> laplacian_crop_select(const ImageGrid& img, int patch = 1024,
                                                 int stride = 128) {
    const int h = img.height, w = img.width;
    if (patch < 1 || stride < 1) throw std::invalid_argument("laplacian_crop_select: bad params");
    if (h < patch || w < patch)
        throw std::invalid_argument("laplacian_crop_select: image smaller than patch");

    // Laplacian response, zero-padded borders
    std::vector<double> resp(static_cast<size_t>(h) * w);
    const auto px = [&](int y, int x) -> double {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return img.at(y, x);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            resp[static_cast<size_t>(y) * w + x] =
                px(y - 1, x) + px(y + 1, x) + px(y, x - 1) + px(y, x + 1) - 4.0 * px(y, x);

    // summed-area tables of response and its square
    const int sw = w + 1;
    std::vector<double> s1(static_cast<size_t>(h + 1) * sw, 0.0), s2 = s1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = resp[static_cast<size_t>(y) * w + x];
            const size_t i = static_cast<size_t>(y + 1) * sw + (x + 1);
            s1[i] = v + s1[i - 1] + s1[i - sw] - s1[i - sw - 1];
            s2[i] = v * v + s2[i - 1] + s2[i - sw] - s2[i - sw - 1];
        }
    }
    const auto window_var = [&](int r, int c) {
        const auto rect = [&](const std::vector<double>& s) {
            return s[static_cast<size_t>(r + patch) * sw + (c + patch)] -
                   s[static_cast<size_t>(r) * sw + (c + patch)] -
                   s[static_cast<size_t>(r + patch) * sw + c] +
                   s[static_cast<size_t>(r) * sw + c];
        };
        const double n = static_cast<double>(patch) * patch;
        const double mean = rect(s1) / n;
        return rect(s2) / n - mean * mean;
    };

    const auto offsets = [&](int dim) {
        std::vector<int> offs;
        for (int o = 0; o + patch <= dim; o += stride) offs.push_back(o);
        if (offs.empty() || offs.back() != dim - patch) offs.push_back(dim - patch);
        return offs;
    };

    double best = -std::numeric_limits<double>::infinity();
    std::pair<int, int> best_rc{0, 0};
    for (int r : offsets(h)) {
        for (int c : offsets(w)) {
            const double v = window_var(r, c);
            if (v > best) {
                best = v;
                best_rc = {r, c};
            }
        }
    }
    return best_rc;
}

/// Split multichannel acquisitions into per-channel images plus their mean.
inline std::vector<ImageGrid> fluorescence_split(const std::vector<ImageGrid>& channels) {
    if (channels.empty()) throw std::invalid_argument("fluorescence_split: no channels");
    for (const auto& c : channels)
        require_same_shape(channels[0].height, channels[0].width, c.height, c.width,
                           "fluorescence_split");
    std::vector<ImageGrid> out = channels;
    ImageGrid combined(channels[0].height, channels[0].width);
    const double k = static_cast<double>(channels.size());
    for (size_t i = 0; i < combined.size(); ++i) {
        double s = 0.0;
        for (const auto& c : channels) s += c.data[i];
        combined.data[i] = static_cast<float>(s / k);
    }
    out.push_back(std::move(combined));
    return out;
}

/// Standard luminance grayscale conversion.
inline ImageGrid luminance(const ImageGrid& r, const ImageGrid& g, const ImageGrid& b) {
    require_same_shape(r.height, r.width, g.height, g.width, "luminance");
    require_same_shape(r.height, r.width, b.height, b.width, "luminance");
    ImageGrid out(r.height, r.width);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = static_cast<float>(0.299 * r.data[i] + 0.587 * g.data[i] +
                                         0.114 * b.data[i]);
    return out;
}

inline TilePlan plan_tiles(int h, int w, int crop = 512, int overlap = 128) {
    if (crop < 1 || overlap < 0 || overlap >= crop)
        throw std::invalid_argument("plan_tiles: need 0 <= overlap < crop");
    if (h < crop || w < crop)
        throw std::invalid_argument("plan_tiles: image smaller than crop size");
    const int stride = crop - overlap;
    const auto axis_offsets = [&](int dim) {
        std::vector<int> offs;
        for (int o = 0; o + crop < dim; o += stride) offs.push_back(o);
        offs.push_back(dim - crop);
        return offs;
    };
    TilePlan plan;
    plan.crop = crop;
    plan.overlap = overlap;
    for (int r : axis_offsets(h))
        for (int c : axis_offsets(w)) plan.windows.emplace_back(r, c);
    return plan;
}

struct Tile {
    int row = 0;
    int col = 0;
    PlanarField field;
};

/// Average overlapping tile predictions back into a full-size field.
inline PlanarField stitch(const std::vector<Tile>& tiles, const TilePlan& plan, int out_h,
                          int out_w) {
    if (tiles.size() != plan.windows.size())
        throw std::invalid_argument("stitch: expected " + std::to_string(plan.windows.size()) +
                                    " tiles, got " + std::to_string(tiles.size()));
    if (tiles.empty()) throw std::invalid_argument("stitch: no tiles");
    const int channels = tiles[0].field.channels;

    std::vector<char> seen(plan.windows.size(), 0);
    for (const auto& t : tiles) {
        const auto it = std::find(plan.windows.begin(), plan.windows.end(),
                                  std::make_pair(t.row, t.col));
        if (it == plan.windows.end())
            throw std::invalid_argument("stitch: tile at (" + std::to_string(t.row) + "," +
                                        std::to_string(t.col) + ") not in plan");
        const size_t wi = static_cast<size_t>(it - plan.windows.begin());
        if (seen[wi]) throw std::invalid_argument("stitch: duplicate tile window");
        seen[wi] = 1;
        if (t.field.channels != channels || t.field.height != plan.crop ||
            t.field.width != plan.crop)
            throw std::invalid_argument("stitch: tile shape mismatch");
        if (t.row + plan.crop > out_h || t.col + plan.crop > out_w || t.row < 0 || t.col < 0)
            throw std::invalid_argument("stitch: tile outside output bounds");
    }

    std::vector<double> acc(static_cast<size_t>(channels) * out_h * out_w, 0.0);
    std::vector<int> count(static_cast<size_t>(out_h) * out_w, 0);
    for (const auto& t : tiles) {
        for (int y = 0; y < plan.crop; ++y)
            for (int x = 0; x < plan.crop; ++x)
                ++count[static_cast<size_t>(t.row + y) * out_w + (t.col + x)];
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < plan.crop; ++y)
                for (int x = 0; x < plan.crop; ++x)
                    acc[(static_cast<size_t>(c) * out_h + t.row + y) * out_w + t.col + x] +=
                        t.field.at(c, y, x);
    }
    PlanarField out(channels, out_h, out_w);
    const size_t plane = out.plane_size();
    for (size_t i = 0; i < plane; ++i) {
        if (count[i] == 0)
            throw std::invalid_argument("stitch: plan does not cover every pixel");
        for (int c = 0; c < channels; ++c)
            out.data[c * plane + i] =
                static_cast<float>(acc[c * plane + i] / static_cast<double>(count[i]));
    }
    return out;
}

}  // namespace cellseg

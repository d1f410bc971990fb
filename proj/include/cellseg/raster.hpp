#pragma once

#include <cstdint>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cellseg {

/// Single-channel float raster, row-major.
struct ImageGrid {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    ImageGrid() = default;
    ImageGrid(int h, int w, float fill = 0.0f)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return data.size(); }
};

/// Instance mask, row-major. 0 = background; equal nonzero values = same instance.
/// Label values are 16-bit: more than 65535 instances cannot be represented.
struct LabelMask {
    int height = 0;
    int width = 0;
    std::vector<uint16_t> labels;

    LabelMask() = default;
    LabelMask(int h, int w, uint16_t fill = 0)
        : height(h), width(w), labels(static_cast<size_t>(h) * w, fill) {}

    uint16_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
    uint16_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return labels.size(); }
};

/// Multi-channel float raster, channel-planar row-major (all of channel 0, then channel 1, ...).
struct PlanarField {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    PlanarField() = default;
    PlanarField(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t plane_size() const { return static_cast<size_t>(height) * width; }
};

/// 8-bit RGB image, interleaved row-major.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // 3 bytes per pixel

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {}

    uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    uint8_t at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// Pixel-overlap statistics between a ground-truth and a predicted mask.
/// intersections holds only positive counts for (gt, pred) label pairs.
struct OverlapTable {
    std::map<uint16_t, int64_t> gt_areas;
    std::map<uint16_t, int64_t> pred_areas;
    std::map<std::pair<uint16_t, uint16_t>, int64_t> intersections;
};

inline void require_same_shape(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                    std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
                                    std::to_string(h2) + "x" + std::to_string(w2) + ")");
    }
}

/// Label maximal connected foreground regions 1..K in raster-scan order of each
/// region's first pixel. Any nonzero input value counts as foreground.
inline LabelMask connected_components(const LabelMask& binary, int connectivity = 4) {
    if (connectivity != 4 && connectivity != 8)
        throw std::invalid_argument("connected_components: connectivity must be 4 or 8");
    const int h = binary.height, w = binary.width;
    LabelMask out(h, w);
    static constexpr int dy8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static constexpr int dx8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    static constexpr int dy4[4] = {-1, 0, 0, 1};
    static constexpr int dx4[4] = {-1, 1, 0, 0};
    const int* dy = connectivity == 8 ? dy8 : dy4;
    const int* dx = connectivity == 8 ? dx8 : dx4;
    const int ndirs = connectivity;

    uint32_t next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (binary.at(y, x) == 0 || out.at(y, x) != 0) continue;
            ++next;
            if (next > 65535)
                throw std::runtime_error("connected_components: more than 65535 components");
            const uint16_t label = static_cast<uint16_t>(next);
            stack.clear();
            stack.emplace_back(y, x);
            out.at(y, x) = label;
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                for (int d = 0; d < ndirs; ++d) {
                    const int ny = cy + dy[d], nx = cx + dx[d];
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    if (binary.at(ny, nx) == 0 || out.at(ny, nx) != 0) continue;
                    out.at(ny, nx) = label;
                    stack.emplace_back(ny, nx);
                }
            }
        }
    }
    return out;
}

/// Count per-label areas and pairwise pixel intersections in one pass.
inline OverlapTable overlap_table(const LabelMask& gt, const LabelMask& pred) {
    require_same_shape(gt.height, gt.width, pred.height, pred.width, "overlap_table");
    OverlapTable t;
    const size_t n = gt.size();
    for (size_t i = 0; i < n; ++i) {
        const uint16_t g = gt.labels[i];
        const uint16_t p = pred.labels[i];
        if (g != 0) ++t.gt_areas[g];
        if (p != 0) ++t.pred_areas[p];
        if (g != 0 && p != 0) ++t.intersections[{g, p}];
    }
    return t;
}

/// Renumber labels to 1..K by raster-scan order of first occurrence.
inline LabelMask relabel_sequential(const LabelMask& mask) {
    LabelMask out(mask.height, mask.width);
    std::vector<uint16_t> remap(65536, 0);
    uint16_t next = 0;
    const size_t n = mask.size();
    for (size_t i = 0; i < n; ++i) {
        const uint16_t v = mask.labels[i];
        if (v == 0) continue;
        if (remap[v] == 0) remap[v] = ++next;
        out.labels[i] = remap[v];
    }
    return out;
}

}  // namespace cellseg

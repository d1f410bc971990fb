#pragma once

#include <string>
#include <vector>

#include "cellseg/raster.hpp"
#include "cellseg/synth.hpp"

namespace testutil {

/// Build a LabelMask from digit strings: '0' = background, '1'-'9' = labels.
inline cellseg::LabelMask mask_from_rows(const std::vector<std::string>& rows) {
    cellseg::LabelMask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) m.at(y, x) = static_cast<uint16_t>(rows[y][x] - '0');
    return m;
}

/// Axis-aligned filled rectangle, rows r0..r1 and cols c0..c1 inclusive.
inline void paint_rect(cellseg::LabelMask& m, int r0, int c0, int r1, int c1, uint16_t label) {
    for (int y = r0; y <= r1; ++y)
        for (int x = c0; x <= c1; ++x) m.at(y, x) = label;
}

/// The 10x10 square pair shifted by two columns: intersection 80, union 120.
inline std::pair<cellseg::LabelMask, cellseg::LabelMask> shifted_square_pair() {
    cellseg::LabelMask gt(16, 16), pred(16, 16);
    paint_rect(gt, 3, 0, 12, 9, 1);
    paint_rect(pred, 3, 2, 12, 11, 1);
    return {gt, pred};
}

/// Random overlap table with the given instance counts; every invariant of
/// the type holds by construction (areas exceed row/column intersection sums).
inline cellseg::OverlapTable random_table(cellseg::SplitMix64& rng, int max_per_side) {
    cellseg::OverlapTable t;
    const int ng = 1 + static_cast<int>(rng.below(max_per_side));
    const int np = 1 + static_cast<int>(rng.below(max_per_side));
    std::vector<int64_t> gt_sum(ng + 1, 0), pred_sum(np + 1, 0);
    for (int g = 1; g <= ng; ++g) {
        for (int p = 1; p <= np; ++p) {
            if (rng.next_double() < 0.45) {
                const int64_t w = 1 + static_cast<int64_t>(rng.below(100));
                t.intersections[{static_cast<uint16_t>(g), static_cast<uint16_t>(p)}] = w;
                gt_sum[g] += w;
                pred_sum[p] += w;
            }
        }
    }
    for (int g = 1; g <= ng; ++g)
        t.gt_areas[static_cast<uint16_t>(g)] = gt_sum[g] + 1 + static_cast<int64_t>(rng.below(50));
    for (int p = 1; p <= np; ++p)
        t.pred_areas[static_cast<uint16_t>(p)] =
            pred_sum[p] + 1 + static_cast<int64_t>(rng.below(50));
    return t;
}

}  // namespace testutil

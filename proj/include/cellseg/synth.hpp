#pragma once

#include <cmath>
#include <cstdint>
#include <variant>

#include "cellseg/raster.hpp"

namespace cellseg {

/// SplitMix64: fixed constants so fixtures are reproducible everywhere.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// uniform in [0, 1)
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next() % n; }
};

/// Box-Muller normal deviates from a SplitMix64 stream.
struct GaussianStream {
    SplitMix64 rng;
    bool has_spare = false;
    double spare = 0.0;

    explicit GaussianStream(uint64_t seed) : rng(seed) {}

    double next() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        // u1 in (0,1] so the log is finite
        const double u1 = (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = rng.next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare = r * std::sin(theta);
        has_spare = true;
        return r * std::cos(theta);
    }
};

struct SynthSpec {
    uint64_t seed = 1;
    int height = 256;
    int width = 256;
    int n_instances = 5;
    double radius_min = 6.0;   // semi-minor axis
    double radius_max = 10.0;
    double min_gap = 4.0;
    double ecc_min = 1.0;      // semi-major / semi-minor
    double ecc_max = 1.5;
};

/// Place n rotated ellipses by rejection sampling; conservative center-distance
/// test (sum of semi-major axes + gap) guarantees the pairwise boundary gap.
inline LabelMask gen_instances(const SynthSpec& spec) {
    if (spec.radius_min < 3.0 || spec.radius_max < spec.radius_min || spec.min_gap < 0.0 ||
        spec.ecc_min < 1.0 || spec.ecc_max < spec.ecc_min || spec.n_instances < 0)
        throw std::invalid_argument("gen_instances: invalid spec");

    LabelMask mask(spec.height, spec.width);
    SplitMix64 rng(spec.seed);

    struct Placed {
        double cy, cx, semi_major;
    };
    std::vector<Placed> placed;

    for (int k = 0; k < spec.n_instances; ++k) {
        bool ok = false;
        for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
            const double r = rng.uniform(spec.radius_min, spec.radius_max);
            const double ecc = rng.uniform(spec.ecc_min, spec.ecc_max);
            const double a = r * ecc;  // semi-major
            const double theta = rng.uniform(0.0, 3.14159265358979323846);
            const double margin = a + 1.0;
            if (2.0 * margin >= spec.height || 2.0 * margin >= spec.width) continue;
            const double cy = rng.uniform(margin, spec.height - margin);
            const double cx = rng.uniform(margin, spec.width - margin);

            bool clear = true;
            for (const auto& p : placed) {
                const double dy = cy - p.cy, dx = cx - p.cx;
                if (std::sqrt(dy * dy + dx * dx) < a + p.semi_major + spec.min_gap) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;

            // rasterize by pixel-center inclusion
            const double ct = std::cos(theta), st = std::sin(theta);
            const int y0 = std::max(0, static_cast<int>(std::floor(cy - a)));
            const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(cy + a)));
            const int x0 = std::max(0, static_cast<int>(std::floor(cx - a)));
            const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(cx + a)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double dy = y - cy, dx = x - cx;
                    const double u = (dx * ct + dy * st) / a;
                    const double v = (-dx * st + dy * ct) / r;
                    if (u * u + v * v <= 1.0) mask.at(y, x) = static_cast<uint16_t>(k + 1);
                }
            }
            placed.push_back({cy, cx, a});
            ok = true;
        }
        if (!ok)
            throw std::runtime_error("gen_instances: placement failed after 10000 attempts "
                                     "(instance " + std::to_string(k + 1) + ")");
    }
    return mask;
}

/// Two-level image with seeded Gaussian noise, clamped to [0, 1].
inline ImageGrid render_image(const LabelMask& mask, double fg_level = 0.7,
                              double bg_level = 0.3, double noise_sigma = 0.05,
                              uint64_t seed = 1) {
    ImageGrid img(mask.height, mask.width);
    GaussianStream noise(seed);
    for (size_t i = 0; i < mask.size(); ++i) {
        const double base = mask.labels[i] != 0 ? fg_level : bg_level;
        const double n = noise_sigma != 0.0 ? noise_sigma * noise.next() : 0.0;
        img.data[i] = static_cast<float>(std::clamp(base + n, 0.0, 1.0));
    }
    return img;
}

struct DropInstance {
    uint16_t label;
};
struct ShiftMask {
    int dr, dc;
};
struct MergeInstances {
    uint16_t a, b;  // b is relabeled to a
};
using PerturbOp = std::variant<DropInstance, ShiftMask, MergeInstances>;

inline LabelMask perturb_mask(const LabelMask& mask, const PerturbOp& op) {
    const auto has_label = [&](uint16_t v) {
        for (uint16_t l : mask.labels)
            if (l == v) return true;
        return false;
    };
    if (const auto* drop = std::get_if<DropInstance>(&op)) {
        if (drop->label == 0 || !has_label(drop->label))
            throw std::invalid_argument("perturb_mask: no instance with label " +
                                        std::to_string(drop->label));
        LabelMask out = mask;
        for (auto& l : out.labels)
            if (l == drop->label) l = 0;
        return out;
    }
    if (const auto* shift = std::get_if<ShiftMask>(&op)) {
        LabelMask out(mask.height, mask.width);
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                const int sy = y - shift->dr, sx = x - shift->dc;
                if (sy < 0 || sy >= mask.height || sx < 0 || sx >= mask.width) continue;
                out.at(y, x) = mask.at(sy, sx);
            }
        }
        return out;
    }
    const auto& merge = std::get<MergeInstances>(op);
    if (merge.a == 0 || merge.b == 0 || !has_label(merge.a) || !has_label(merge.b))
        throw std::invalid_argument("perturb_mask: merge labels must exist");
    LabelMask out = mask;
    for (auto& l : out.labels)
        if (l == merge.b) l = merge.a;
    return out;
}

}  // namespace cellseg

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Patch-embedding grid, patch-major: data[p * dim + d] for patch p.
struct PatchEmbeddings {
    int grid_h = 0;
    int grid_w = 0;
    int dim = 0;
    std::vector<float> data;

    PatchEmbeddings() = default;
    PatchEmbeddings(int gh, int gw, int d)
        : grid_h(gh), grid_w(gw), dim(d),
          data(static_cast<size_t>(gh) * gw * d, 0.0f) {}

    float& at(int patch, int d) { return data[static_cast<size_t>(patch) * dim + d]; }
    float at(int patch, int d) const { return data[static_cast<size_t>(patch) * dim + d]; }
    int n_patches() const { return grid_h * grid_w; }

    /// Planar container layout (channels = dim) -> patch-major.
    static PatchEmbeddings from_planar(const PlanarField& f) {
        PatchEmbeddings e(f.height, f.width, f.channels);
        for (int d = 0; d < f.channels; ++d)
            for (int y = 0; y < f.height; ++y)
                for (int x = 0; x < f.width; ++x)
                    e.at(y * f.width + x, d) = f.at(d, y, x);
        return e;
    }
};

/// Top-3 principal components of the patch covariance.
struct PcaProjection {
    std::array<std::vector<double>, 3> components;  // each of length dim
    std::array<std::vector<double>, 3> projections; // each of length n_patches
    std::array<double, 3> variances{};              // population variance per component
    double captured_variance = 0.0;                 // sum of the three
};

inline PcaProjection pca_project(const PatchEmbeddings& emb) {
    const int n = emb.n_patches();
    const int d = emb.dim;
    if (n < 4) throw std::invalid_argument("pca_project: need at least 4 patches");
    if (d < 3) throw std::invalid_argument("pca_project: need embedding dim >= 3");

    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = emb.at(i, j);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_project: eigendecomposition failed");

    PcaProjection out;
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);  // descending eigenvalue
        // deterministic sign: largest-magnitude loading positive
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
        if (v(arg) < 0) v = -v;

        const Eigen::VectorXd proj = x * v;
        out.components[k].assign(v.data(), v.data() + d);
        out.projections[k].assign(proj.data(), proj.data() + n);
        const double pm = proj.mean();
        out.variances[k] = (proj.array() - pm).square().sum() / static_cast<double>(n);
        out.captured_variance += out.variances[k];
    }
    return out;
}

/// Map the top-3 components to RGB: standardize each projection, clamp at
/// +-clamp_sigma, and scale linearly to [0, 255] (zero maps to 128).
inline RgbImage pca_rgb(const PatchEmbeddings& emb, double clamp_sigma = 2.5) {
    if (clamp_sigma <= 0) throw std::invalid_argument("pca_rgb: clamp must be positive");
    const PcaProjection pca = pca_project(emb);
    RgbImage img(emb.grid_h, emb.grid_w);
    const int n = emb.n_patches();
    for (int k = 0; k < 3; ++k) {
        const double sd = std::sqrt(pca.variances[k]);
        for (int i = 0; i < n; ++i) {
            double u = 0.0;  // zero-variance component -> all-zero channel
            if (sd >= 1e-12) u = std::clamp(pca.projections[k][i] / sd, -clamp_sigma, clamp_sigma);
            const long byte = std::lround((u + clamp_sigma) / (2.0 * clamp_sigma) * 255.0);
            img.data[static_cast<size_t>(i) * 3 + k] =
                static_cast<uint8_t>(std::clamp(byte, 0L, 255L));
        }
    }
    return img;
}

/// Nearest-neighbor upscaling of the patch grid for overlay on the source image.
inline RgbImage upsample_nearest(const RgbImage& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("upsample_nearest: bad size");
    RgbImage out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(static_cast<int>(static_cast<int64_t>(y) * img.height / out_h),
                                img.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(static_cast<int>(static_cast<int64_t>(x) * img.width / out_w),
                                    img.width - 1);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

}  // namespace cellseg

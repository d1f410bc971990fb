#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cellseg/embedviz.hpp"

namespace testutil {

/// Cyclic Jacobi eigenvalue iteration on a dense symmetric matrix, descending
/// order. Deliberately independent of the library's eigensolver.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = 0.5 * (a[q * n + q] - a[p * n + p]) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a[i * n + i];
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

/// Population covariance computed with plain loops from raw embeddings.
inline std::vector<double> covariance_of(const cellseg::PatchEmbeddings& e) {
    const int n = e.n_patches(), d = e.dim;
    std::vector<double> mean(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mean[j] += e.at(i, j);
    for (auto& m : mean) m /= n;
    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                cov[static_cast<size_t>(a) * d + b] +=
                    (e.at(i, a) - mean[a]) * (e.at(i, b) - mean[b]);
    for (auto& c : cov) c /= n;
    return cov;
}

}  // namespace testutil

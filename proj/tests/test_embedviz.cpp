#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cellseg/embedviz.hpp"
#include "cellseg/synth.hpp"
#include "oracles.hpp"

using namespace cellseg;
using testutil::covariance_of;
using testutil::jacobi_eigenvalues;

namespace {

PatchEmbeddings random_embeddings(int gh, int gw, int d, uint64_t seed) {
    PatchEmbeddings e(gh, gw, d);
    GaussianStream rng(seed);
    for (auto& v : e.data) v = static_cast<float>(rng.next());
    return e;
}

}  // namespace

TEST_CASE("pca_rgb: all-identical embeddings give uniform mid-gray") {
    PatchEmbeddings e(4, 5, 8);
    for (int i = 0; i < e.n_patches(); ++i)
        for (int d = 0; d < 8; ++d) e.at(i, d) = 0.25f * d;
    const RgbImage img = pca_rgb(e);
    REQUIRE(img.height == 4);
    REQUIRE(img.width == 5);
    for (uint8_t v : img.data) CHECK(v == 128);
}

TEST_CASE("pca_rgb: two separated clusters split the red channel") {
    // clusters at +c and -c along one embedding direction
    PatchEmbeddings e(4, 4, 6);
    for (int i = 0; i < 16; ++i) e.at(i, 2) = i < 8 ? 3.0f : -3.0f;
    const RgbImage img = pca_rgb(e);
    std::set<uint8_t> reds, greens, blues;
    for (int i = 0; i < 16; ++i) {
        reds.insert(img.data[i * 3 + 0]);
        greens.insert(img.data[i * 3 + 1]);
        blues.insert(img.data[i * 3 + 2]);
    }
    REQUIRE(reds.size() == 2);  // bimodal: one value per cluster
    CHECK(*reds.rbegin() - *reds.begin() > 80);
    CHECK(greens == std::set<uint8_t>{128});  // zero-variance components
    CHECK(blues == std::set<uint8_t>{128});
}

TEST_CASE("pca_project: captured variance equals top-3 eigenvalue sum") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        const int dim = 8 + static_cast<int>(seed) * 10;  // up to 58
        const PatchEmbeddings e = random_embeddings(8, 8, dim, seed);
        const PcaProjection p = pca_project(e);
        const auto eig = jacobi_eigenvalues(covariance_of(e), dim);
        const double oracle = eig[0] + eig[1] + eig[2];
        CHECK(std::abs(p.captured_variance - oracle) <= 1e-6 * std::abs(oracle));
    }
}

TEST_CASE("pca_project: standardized components are uncorrelated") {
    const PatchEmbeddings e = random_embeddings(10, 10, 24, 77);
    const PcaProjection p = pca_project(e);
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            double corr = 0.0;
            for (int i = 0; i < e.n_patches(); ++i)
                corr += p.projections[a][i] * p.projections[b][i];
            corr /= e.n_patches() * std::sqrt(p.variances[a] * p.variances[b]);
            CHECK(std::abs(corr) < 1e-6);
        }
    }
}

TEST_CASE("pca_rgb: deterministic bytes") {
    const PatchEmbeddings e = random_embeddings(6, 7, 16, 3);
    const RgbImage a = pca_rgb(e);
    const RgbImage b = pca_rgb(e);
    CHECK(a.data == b.data);
}

TEST_CASE("pca_project: rotation of the embedding space only flips signs") {
    const int d = 12;
    const PatchEmbeddings e = random_embeddings(8, 8, d, 15);

    // random rotation via QR of a gaussian matrix
    Eigen::MatrixXd g(d, d);
    GaussianStream rng(99);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.next();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();

    PatchEmbeddings rotated(8, 8, d);
    for (int i = 0; i < e.n_patches(); ++i) {
        Eigen::VectorXd v(d);
        for (int j = 0; j < d; ++j) v(j) = e.at(i, j);
        const Eigen::VectorXd r = q * v;
        for (int j = 0; j < d; ++j) rotated.at(i, j) = static_cast<float>(r(j));
    }

    const PcaProjection pa = pca_project(e);
    const PcaProjection pb = pca_project(rotated);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(pa.variances[k] - pb.variances[k]) <=
              1e-6 * std::max(1.0, pa.variances[k]));
        int anchor = 0;
        for (int i = 1; i < e.n_patches(); ++i)
            if (std::abs(pa.projections[k][i]) > std::abs(pa.projections[k][anchor])) anchor = i;
        const double flip =
            (pa.projections[k][anchor] * pb.projections[k][anchor] >= 0.0) ? 1.0 : -1.0;
        for (int i = 0; i < e.n_patches(); ++i)
            CHECK(pa.projections[k][i] ==
                  Catch::Approx(flip * pb.projections[k][i]).margin(1e-5));
    }
}

TEST_CASE("pca: input validation") {
    CHECK_THROWS_AS(pca_project(PatchEmbeddings(1, 3, 8)), std::invalid_argument);
    CHECK_THROWS_AS(pca_project(PatchEmbeddings(4, 4, 2)), std::invalid_argument);
    CHECK_THROWS_AS(pca_rgb(PatchEmbeddings(4, 4, 8), 0.0), std::invalid_argument);
}

TEST_CASE("patch embeddings from planar container") {
    PlanarField f(5, 3, 4);  // dim 5, grid 3x4
    SplitMix64 rng(6);
    for (auto& v : f.data) v = static_cast<float>(rng.next_double());
    const PatchEmbeddings e = PatchEmbeddings::from_planar(f);
    CHECK(e.grid_h == 3);
    CHECK(e.grid_w == 4);
    CHECK(e.dim == 5);
    CHECK(e.at(1 * 4 + 2, 3) == f.at(3, 1, 2));
}

TEST_CASE("upsample_nearest: integer scaling replicates blocks") {
    RgbImage img(2, 2);
    img.at(0, 0, 0) = 10;
    img.at(0, 1, 0) = 20;
    img.at(1, 0, 0) = 30;
    img.at(1, 1, 0) = 40;
    const RgbImage up = upsample_nearest(img, 4, 4);
    CHECK(up.at(0, 0, 0) == 10);
    CHECK(up.at(1, 1, 0) == 10);
    CHECK(up.at(0, 2, 0) == 20);
    CHECK(up.at(3, 3, 0) == 40);
}

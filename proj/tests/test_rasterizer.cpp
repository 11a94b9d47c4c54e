#include "gradcheck.hpp"
#include "swag/errors.hpp"
#include "swag/rasterizer.hpp"

#include <gtest/gtest.h>

using namespace swag;
using namespace swag::testing;

namespace {

Splat2D make_splat(double x, double y, double var, double depth, std::uint32_t index) {
    Splat2D s;
    s.mean2d = {x, y};
    s.cov2d = var * Eigen::Matrix2d::Identity();
    s.depth = depth;
    s.gaussian_index = index;
    return s;
}

// Independent per-pixel compositing oracle.
Eigen::Vector3d composite_pixel(const SplatScene &s, const Eigen::Vector2d &pixel, const Eigen::Vector3d &bg) {
    std::vector<std::size_t> order(s.splats.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s.splats[a].depth != s.splats[b].depth) {
            return s.splats[a].depth < s.splats[b].depth;
        }
        return s.splats[a].gaussian_index < s.splats[b].gaussian_index;
    });
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double t = 1.0;
    for (const std::size_t i : order) {
        const Eigen::Vector2d d = pixel - s.splats[i].mean2d;
        double a = std::min(s.opacities[i] * std::exp(-0.5 * d.dot(s.splats[i].cov2d.inverse() * d)), 0.99);
        if (a < 1.0 / 255.0) {
            continue;
        }
        c += t * a * s.colors[i];
        t *= 1.0 - a;
    }
    return c + t * bg;
}

} // namespace

TEST(SplatAlpha, Examples) {
    const Eigen::Vector2d m(3.5, 4.5);
    EXPECT_DOUBLE_EQ(splat_alpha(0.8, m, Eigen::Matrix2d::Identity(), m), 0.8);
    EXPECT_NEAR(splat_alpha(1.0, m, Eigen::Matrix2d::Identity(), m + Eigen::Vector2d(1, 0)), std::exp(-0.5), 1e-15);
    EXPECT_DOUBLE_EQ(splat_alpha(1.0, m, Eigen::Matrix2d::Identity(), m), kAlphaClamp);
    EXPECT_EQ(splat_alpha(0.0, m, Eigen::Matrix2d::Identity(), m), 0.0);
    EXPECT_EQ(splat_alpha(0.9, m, Eigen::Matrix2d::Identity(), m + Eigen::Vector2d(4, 0)), 0.0);
}

TEST(Rasterizer, EmptySceneIsBackground) {
    const Camera cam = test_camera(20, 12);
    RasterSettings settings;
    settings.background = {0.1, 0.2, 0.3};
    for (const auto &out : {rasterize_forward({}, {}, {}, cam, settings), rasterize_reference({}, {}, {}, cam, settings)}) {
        for (int y = 0; y < 12; ++y) {
            for (int x = 0; x < 20; ++x) {
                EXPECT_EQ(out.color.pixel(x, y), settings.background);
            }
        }
        for (const double t : out.final_transmittance) {
            EXPECT_EQ(t, 1.0);
        }
    }
}

TEST(Rasterizer, SingleSaturatedSplat) {
    const Camera cam = test_camera(16, 16);
    RasterSettings settings;
    settings.background = {0.0, 1.0, 0.5};
    const std::vector<Splat2D> splats{make_splat(5.5, 6.5, 2.0, 1.0, 0)};
    const std::vector<Eigen::Vector3d> colors{{1.0, 0.2, 0.4}};
    const std::vector<double> opacity{1.0};
    const Eigen::Vector3d want = 0.99 * colors[0] + 0.01 * settings.background;
    const RenderOutput tiled = rasterize_forward(splats, colors, opacity, cam, settings);
    const RenderOutput ref = rasterize_reference(splats, colors, opacity, cam, settings);
    EXPECT_LT((tiled.color.pixel(5, 6) - want).norm(), 1e-15);
    EXPECT_LT((ref.color.pixel(5, 6) - want).norm(), 1e-15);
}

TEST(Rasterizer, TwoCoincidentHalfSplats) {
    const Camera cam = test_camera(16, 16);
    RasterSettings settings;
    settings.background = {0.3, 0.3, 0.9};
    const std::vector<Splat2D> splats{make_splat(8.5, 8.5, 3.0, 2.0, 1), make_splat(8.5, 8.5, 3.0, 1.0, 0)};
    const std::vector<Eigen::Vector3d> colors{{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}};
    const std::vector<double> opacity{0.5, 0.5};
    const RenderOutput out = rasterize_forward(splats, colors, opacity, cam, settings);
    // The nearer splat (index 1 in the list) blends first.
    const Eigen::Vector3d want = 0.5 * colors[1] + 0.25 * colors[0] + 0.25 * settings.background;
    EXPECT_LT((out.color.pixel(8, 8) - want).norm(), 1e-15);
}

TEST(Rasterizer, EqualDepthTieBreaksOnIndex) {
    const Camera cam = test_camera(8, 8);
    const std::vector<Splat2D> splats{make_splat(4.5, 4.5, 2.0, 1.0, 7), make_splat(4.5, 4.5, 2.0, 1.0, 3)};
    const std::vector<Eigen::Vector3d> colors{{1, 0, 0}, {0, 0, 1}};
    const std::vector<double> opacity{0.6, 0.6};
    const RenderOutput out = rasterize_forward(splats, colors, opacity, cam);
    EXPECT_NEAR(out.color.at(4, 4, 2), 0.6, 1e-15);
    EXPECT_NEAR(out.color.at(4, 4, 0), 0.24, 1e-15);
}

TEST(Rasterizer, MatchesIndependentOracle) {
    const SplatScene s = random_splats(41, 30, 24, 20);
    const Camera cam = test_camera(24, 20);
    RasterSettings settings;
    settings.background = {0.25, 0.5, 0.75};
    settings.early_termination = false;
    const RenderOutput out = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 24; ++x) {
            const Eigen::Vector3d want = composite_pixel(s, {x + 0.5, y + 0.5}, settings.background);
            EXPECT_LT((out.color.pixel(x, y) - want).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Rasterizer, TiledMatchesReference) {
    const Camera cam = test_camera(32, 32);
    RasterSettings settings;
    settings.early_termination = false;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SplatScene s = random_splats(seed, 10 + int(seed) * 9, 32, 32, seed % 2 == 0);
        for (const int tile : {4, 16}) {
            settings.tile_size = tile;
            const RenderOutput a = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
            const RenderOutput b = rasterize_reference(s.splats, s.colors, s.opacities, cam, settings);
            for (std::size_t i = 0; i < a.color.data.size(); ++i) {
                ASSERT_LE(std::abs(a.color.data[i] - b.color.data[i]), 1e-6);
            }
        }
    }
}

TEST(Rasterizer, OutputStaysInUnitRange) {
    const Camera cam = test_camera(32, 32);
    RasterSettings settings;
    settings.background = {1.0, 0.0, 0.5};
    const SplatScene s = random_splats(77, 100, 32, 32);
    const RenderOutput out = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
    for (const double v : out.color.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Rasterizer, DeterministicAcrossRuns) {
    const Camera cam = test_camera(40, 24);
    const SplatScene s = random_splats(5, 60, 40, 24);
    const RenderOutput a = rasterize_forward(s.splats, s.colors, s.opacities, cam);
    const RenderOutput b = rasterize_forward(s.splats, s.colors, s.opacities, cam);
    EXPECT_EQ(a.color.data, b.color.data);
}

TEST(RasterizerBackward, ZeroUpstreamGivesZeroGradients) {
    const Camera cam = test_camera(16, 16);
    const SplatScene s = random_splats(9, 12, 16, 16);
    const RasterSettings settings;
    const RenderOutput fwd = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
    const SplatGradients g = rasterize_backward(s.splats, s.colors, s.opacities, cam, settings, fwd, Image(16, 16));
    for (std::size_t i = 0; i < s.splats.size(); ++i) {
        EXPECT_EQ(g.d_mean2d[i].norm(), 0.0);
        EXPECT_EQ(g.d_cov2d[i].norm(), 0.0);
        EXPECT_EQ(g.d_color[i].norm(), 0.0);
        EXPECT_EQ(g.d_opacity[i], 0.0);
    }
}

TEST(RasterizerBackward, ColorGradientAtCenterIsAlpha) {
    const Camera cam = test_camera(8, 8);
    const std::vector<Splat2D> splats{make_splat(3.5, 3.5, 2.0, 1.0, 0)};
    const std::vector<Eigen::Vector3d> colors{{0.2, 0.5, 0.7}};
    const std::vector<double> opacity{0.7};
    const RasterSettings settings;
    const RenderOutput fwd = rasterize_forward(splats, colors, opacity, cam, settings);
    Image up(8, 8);
    up.at(3, 3, 1) = 1.0;
    const SplatGradients g = rasterize_backward(splats, colors, opacity, cam, settings, fwd, up);
    EXPECT_NEAR(g.d_color[0][1], 0.7, 1e-15);
    EXPECT_EQ(g.d_color[0][0], 0.0);
}

TEST(RasterizerBackward, MatchesFiniteDifferences) {
    const GradCheck c = rasterizer_gradcheck(3, 20, 16, 16);
    EXPECT_LT(c.max_rel, 1e-4) << c.worst;
    EXPECT_EQ(c.checked, 20 * 9);
}

TEST(RasterizerBackward, RejectsMismatchedForward) {
    const Camera cam = test_camera(16, 16);
    const SplatScene s = random_splats(9, 12, 16, 16);
    const SplatScene other = random_splats(10, 5, 16, 16);
    const RasterSettings settings;
    const RenderOutput fwd = rasterize_forward(other.splats, other.colors, other.opacities, cam, settings);
    EXPECT_THROW(rasterize_backward(s.splats, s.colors, s.opacities, cam, settings, fwd, Image(16, 16)),
                 MismatchedForward);
    const RenderOutput good = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
    EXPECT_THROW(rasterize_backward(s.splats, s.colors, s.opacities, cam, settings, good, Image(8, 8)),
                 MismatchedForward);
}

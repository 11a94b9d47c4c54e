#pragma once

// Finite-difference gradient checks shared by the unit and acceptance tests.

#include "swag/appearance.hpp"
#include "swag/metrics.hpp"
#include "swag/rasterizer.hpp"
#include "swag/render.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace swag::testing {

struct GradCheck {
    double max_rel = 0.0;
    int checked = 0;
    std::string worst;

    void add(const std::string &what, double analytic, double numeric, double floor) {
        const double r = rel_error(analytic, numeric, floor);
        ++checked;
        if (r > max_rel) {
            max_rel = r;
            char buf[96];
            std::snprintf(buf, sizeof(buf), " analytic=%.6e fd=%.6e", analytic, numeric);
            worst = what + buf;
        }
    }
    void merge(const GradCheck &o) {
        checked += o.checked;
        if (o.max_rel > max_rel) {
            max_rel = o.max_rel;
            worst = o.worst;
        }
    }
};

/**
 * Central difference of `f` along one scalar parameter, set through `set`.
 * The forward map has isolated jumps (the 1/255 opacity cutoff), so the step
 * is shrunk until two step sizes agree to within `floor` (roundoff level).
 */
inline double robust_difference(const std::function<double()> &f, const std::function<void(double)> &set, double x,
                                double h, double floor) {
    const auto central = [&](double step) {
        set(x + step);
        const double p = f();
        set(x - step);
        const double m = f();
        set(x);
        return (p - m) / (2 * step);
    };
    double d = central(h);
    for (int attempt = 0; attempt < 4; ++attempt) {
        const double half = central(h / 2);
        if (rel_error(d, half, floor) < 1e-4) {
            return half;
        }
        h /= 10;
        d = central(h);
    }
    return d;
}

// Gradient of a weighted pixel sum through the rasterizer, against finite differences.
inline GradCheck rasterizer_gradcheck(std::uint64_t seed, int count, int w, int h) {
    SplatScene s = random_splats(seed, count, w, h);
    Camera cam = test_camera(w, h);
    RasterSettings settings;
    settings.background = {0.2, 0.4, 0.1};
    settings.tile_size = 8;
    const Image weights = random_image(hash_key(seed, 1), w, h);

    const auto loss = [&]() {
        const RenderOutput out = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
        double total = 0.0;
        for (std::size_t i = 0; i < out.color.data.size(); ++i) {
            total += weights.data[i] * out.color.data[i];
        }
        return total;
    };
    const RenderOutput fwd = rasterize_forward(s.splats, s.colors, s.opacities, cam, settings);
    const SplatGradients g = rasterize_backward(s.splats, s.colors, s.opacities, cam, settings, fwd, weights);

    GradCheck check;
    const double step = 1e-5;
    const double floor = 1e-6;
    for (int i = 0; i < count; ++i) {
        const std::string tag = "splat " + std::to_string(i);
        for (int k = 0; k < 2; ++k) {
            double &p = s.splats[std::size_t(i)].mean2d[k];
            check.add(tag + " mean" + std::to_string(k), g.d_mean2d[std::size_t(i)][k],
                      robust_difference(loss, [&](double v) { p = v; }, p, step, floor), floor);
        }
        for (int r = 0; r < 2; ++r) {
            for (int c = r; c < 2; ++c) {
                Eigen::Matrix2d &m = s.splats[std::size_t(i)].cov2d;
                const double base = m(r, c);
                // Perturb the symmetric pair together.
                const double analytic = r == c ? g.d_cov2d[std::size_t(i)](r, c)
                                               : g.d_cov2d[std::size_t(i)](r, c) + g.d_cov2d[std::size_t(i)](c, r);
                const double fd = robust_difference(
                    loss,
                    [&](double v) {
                        m(r, c) = v;
                        m(c, r) = v;
                    },
                    base, step, floor);
                check.add(tag + " cov" + std::to_string(r) + std::to_string(c), analytic, fd, floor);
            }
        }
        for (int k = 0; k < 3; ++k) {
            double &p = s.colors[std::size_t(i)][k];
            check.add(tag + " color" + std::to_string(k), g.d_color[std::size_t(i)][k],
                      robust_difference(loss, [&](double v) { p = v; }, p, step, floor), floor);
        }
        double &o = s.opacities[std::size_t(i)];
        check.add(tag + " opacity", g.d_opacity[std::size_t(i)],
                  robust_difference(loss, [&](double v) { o = v; }, o, step, floor), floor);
    }
    return check;
}

struct EndToEndSetup {
    GaussianCloud cloud;
    AppearanceModel model;
    std::vector<double> embedding;
    Camera cam;
    RenderOptions options;
    Image target;
};

// Small scene with randomized network weights so every parameter group carries gradient.
inline EndToEndSetup end_to_end_setup(std::uint64_t seed, Variant variant, int count, int size) {
    EndToEndSetup s;
    s.cloud = random_cloud(seed, count, 1, 0.45);
    Aabb box;
    box.min = Eigen::Vector3d::Constant(-1.0);
    box.max = Eigen::Vector3d::Constant(1.0);
    s.model = AppearanceModel::create(1, box, hash_key(seed, 2));
    CounterRng rng(hash_key(seed, 3));
    for (double &p : s.model.mlp.params()) {
        p = rng.uniform(-0.25, 0.25);
    }
    for (double &e : s.model.embeddings) {
        e = rng.uniform(-0.5, 0.5);
    }
    s.embedding = s.model.embeddings;
    s.cam = test_camera(size, size, Eigen::Vector3d(0.4, -2.6, 0.5));
    s.options.condition.variant = variant;
    s.options.condition.sample = SampleMode::Train;
    s.options.condition.noise_key = hash_key(seed, 4);
    s.options.condition.sh_degree = 1;
    s.options.raster.background = {0.1, 0.1, 0.3};
    s.target = random_image(hash_key(seed, 5), size, size);
    return s;
}

inline double end_to_end_loss(const EndToEndSetup &s) {
    const RenderContext ctx = render(s.cloud, s.model, s.embedding, s.cam, s.options);
    return photometric_loss(ctx.output.color, s.target, kDefaultSsimWeight).value;
}

// Full loss gradient (rasterizer, conditioning, projection, SSIM) against finite differences.
inline GradCheck end_to_end_gradcheck(EndToEndSetup &s, int mlp_samples = 150, int hash_samples = 80) {
    const RenderContext ctx = render(s.cloud, s.model, s.embedding, s.cam, s.options);
    const LossResult loss = photometric_loss(ctx.output.color, s.target, kDefaultSsimWeight);
    ParamGrads g;
    render_backward(s.cloud, s.model, s.cam, ctx, loss.grad, g);

    const auto f = [&]() { return end_to_end_loss(s); };
    GradCheck check;
    const double step = 1e-5;
    const double floor = 1e-6;
    const auto check_vector = [&](const std::string &name, std::vector<double> &params,
                                  const std::vector<double> &grads, const std::vector<std::size_t> &which) {
        for (const std::size_t i : which) {
            double &p = params[i];
            check.add(name + "[" + std::to_string(i) + "]", grads[i],
                      robust_difference(f, [&](double v) { p = v; }, p, step, floor), floor);
        }
    };
    const auto all = [](std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = i;
        }
        return idx;
    };
    check_vector("center", s.cloud.centers, g.d_centers, all(s.cloud.centers.size()));
    check_vector("log_scale", s.cloud.log_scales, g.d_log_scales, all(s.cloud.log_scales.size()));
    check_vector("rotation", s.cloud.rotations, g.d_rotations, all(s.cloud.rotations.size()));
    check_vector("opacity", s.cloud.opacity_logits, g.d_opacity_logits, all(s.cloud.opacity_logits.size()));
    check_vector("sh", s.cloud.sh, g.d_sh, all(s.cloud.sh.size()));
    if (uses_mlp(s.options.condition.variant)) {
        CounterRng rng(99);
        std::vector<std::size_t> pick;
        for (int i = 0; i < mlp_samples; ++i) {
            pick.push_back(rng.below(s.model.mlp.param_count()));
        }
        // The output layer is where most of the signal lives; include all of it.
        const std::size_t tail = std::size_t(s.model.mlp.out_dim()) * (std::size_t(s.model.mlp.hidden_dim()) + 1);
        for (std::size_t i = s.model.mlp.param_count() - tail; i < s.model.mlp.param_count(); ++i) {
            pick.push_back(i);
        }
        check_vector("mlp", s.model.mlp.params(), g.d_mlp, pick);
        if (uses_appearance(s.options.condition.variant)) {
            check_vector("embedding", s.embedding, g.d_embedding, all(s.embedding.size()));
        }
        int n = 0;
        for (const auto &[key, total] : g.d_hash.reduce()) {
            if (n++ >= hash_samples) {
                break;
            }
            for (int c = 0; c < kHashFeatures; ++c) {
                const HashFeature orig = s.model.grid.feature(key);
                const double fd = robust_difference(
                    f,
                    [&](double v) {
                        HashFeature h = orig;
                        h[std::size_t(c)] = v;
                        s.model.grid.set_feature(key, h);
                    },
                    orig[std::size_t(c)], step, floor);
                s.model.grid.set_feature(key, orig);
                check.add("hash " + std::to_string(key), total[std::size_t(c)], fd, floor);
            }
        }
    }
    return check;
}

} // namespace swag::testing

#include "swag/rasterizer.hpp"
#include "swag/errors.hpp"
#include "swag/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swag {

namespace {

struct PreparedSplat {
    Eigen::Vector2d mean;
    double conic_a = 0, conic_b = 0, conic_c = 0;
    double opacity = 0;
    bool active = false;
};

PreparedSplat prepare(const Splat2D &s, double opacity) {
    PreparedSplat p;
    p.mean = s.mean2d;
    p.opacity = opacity;
    const double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
    const double det = a * c - b * b;
    if (!(det > 0) || !(opacity >= kAlphaSkip) || !std::isfinite(det)) {
        return p;
    }
    p.conic_a = c / det;
    p.conic_b = -b / det;
    p.conic_c = a / det;
    p.active = true;
    return p;
}

// Opacity exponent at pixel center (px, py).
inline double power_at(const PreparedSplat &p, double px, double py) {
    const double dx = px - p.mean.x();
    const double dy = py - p.mean.y();
    return -0.5 * (p.conic_a * dx * dx + p.conic_c * dy * dy) - p.conic_b * dx * dy;
}

bool depth_less(const Splat2D &a, const Splat2D &b, std::uint32_t ia, std::uint32_t ib) {
    if (a.depth != b.depth) {
        return a.depth < b.depth;
    }
    if (a.gaussian_index != b.gaussian_index) {
        return a.gaussian_index < b.gaussian_index;
    }
    return ia < ib;
}

void check_inputs(std::size_t n, std::size_t colors, std::size_t opacities) {
    if (colors != n || opacities != n) {
        throw DimensionMismatch("splat, color and opacity lists differ in length");
    }
}

struct TileGeometry {
    int tiles_x, tiles_y, tile;
};

TileGeometry tile_geometry(const Camera &cam, int tile_size) {
    const int t = std::max(1, tile_size);
    return {(cam.width + t - 1) / t, (cam.height + t - 1) / t, t};
}

std::vector<std::vector<std::uint32_t>> bin_splats(std::span<const Splat2D> splats,
                                                   const std::vector<PreparedSplat> &prep, const TileGeometry &geo,
                                                   const Camera &cam) {
    std::vector<std::vector<std::uint32_t>> lists(std::size_t(geo.tiles_x) * geo.tiles_y);
    for (std::uint32_t i = 0; i < splats.size(); ++i) {
        if (!prep[i].active) {
            continue;
        }
        const double r = binning_radius(splats[i].cov2d, prep[i].opacity);
        const Eigen::Vector2d &m = splats[i].mean2d;
        // Pixel indices whose centers (x + 0.5) lie inside [m - r, m + r].
        const int x0 = std::max(0, int(std::ceil(m.x() - r - 0.5)));
        const int x1 = std::min(cam.width - 1, int(std::floor(m.x() + r - 0.5)));
        const int y0 = std::max(0, int(std::ceil(m.y() - r - 0.5)));
        const int y1 = std::min(cam.height - 1, int(std::floor(m.y() + r - 0.5)));
        if (x0 > x1 || y0 > y1) {
            continue;
        }
        for (int ty = y0 / geo.tile; ty <= y1 / geo.tile; ++ty) {
            for (int tx = x0 / geo.tile; tx <= x1 / geo.tile; ++tx) {
                lists[std::size_t(ty) * geo.tiles_x + tx].push_back(i);
            }
        }
    }
    for (auto &list : lists) {
        std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
            return depth_less(splats[a], splats[b], a, b);
        });
    }
    return lists;
}

// One blended contribution at a pixel, as needed by the backward pass.
struct Contribution {
    std::uint32_t slot; // position in the tile list
    double alpha;
    double gauss;
    bool clamped;
};

} // namespace

double splat_alpha(double alpha, const Eigen::Vector2d &mean2d, const Eigen::Matrix2d &cov2d,
                   const Eigen::Vector2d &pixel) {
    const Eigen::Vector2d d = pixel - mean2d;
    const double power = -0.5 * d.dot(cov2d.inverse() * d);
    if (power > 0) {
        return 0.0;
    }
    const double a = std::min(kAlphaClamp, alpha * std::exp(power));
    return a < kAlphaSkip ? 0.0 : a;
}

double binning_radius(const Eigen::Matrix2d &cov2d, double opacity) {
    const double sigma = std::sqrt(std::max(0.0, max_eigenvalue(cov2d)));
    const double k = opacity > kAlphaSkip ? std::sqrt(2.0 * std::log(opacity / kAlphaSkip)) : 0.0;
    return sigma * std::max(3.0, k) + 1.0;
}

RenderOutput rasterize_forward(std::span<const Splat2D> splats, std::span<const Eigen::Vector3d> colors,
                               std::span<const double> opacities, const Camera &cam, const RasterSettings &settings) {
    check_inputs(splats.size(), colors.size(), opacities.size());
    const TileGeometry geo = tile_geometry(cam, settings.tile_size);

    std::vector<PreparedSplat> prep(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        prep[i] = prepare(splats[i], opacities[i]);
    }

    RenderOutput out;
    out.color = Image(cam.width, cam.height);
    out.final_transmittance.assign(out.color.pixel_count(), 1.0);
    out.contrib_count.assign(out.color.pixel_count(), 0);
    out.tiles_x = geo.tiles_x;
    out.tiles_y = geo.tiles_y;
    out.splat_count = splats.size();
    out.tile_lists = bin_splats(splats, prep, geo, cam);

    parallel_for(out.tile_lists.size(), [&](std::size_t tile_id) {
        const auto &list = out.tile_lists[tile_id];
        const int tx = int(tile_id % geo.tiles_x);
        const int ty = int(tile_id / geo.tiles_x);
        const int x_end = std::min(cam.width, (tx + 1) * geo.tile);
        const int y_end = std::min(cam.height, (ty + 1) * geo.tile);
        for (int y = ty * geo.tile; y < y_end; ++y) {
            for (int x = tx * geo.tile; x < x_end; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double t = 1.0;
                Eigen::Vector3d c = Eigen::Vector3d::Zero();
                int count = 0;
                for (std::uint32_t idx : list) {
                    const PreparedSplat &p = prep[idx];
                    const double power = power_at(p, px, py);
                    if (power > 0) {
                        continue;
                    }
                    const double alpha = std::min(kAlphaClamp, p.opacity * std::exp(power));
                    if (alpha < kAlphaSkip) {
                        continue;
                    }
                    const double next_t = t * (1.0 - alpha);
                    if (settings.early_termination && next_t < kTransmittanceStop) {
                        break;
                    }
                    c += (alpha * t) * colors[idx];
                    t = next_t;
                    ++count;
                }
                const std::size_t pix = std::size_t(y) * cam.width + x;
                out.color.set_pixel(x, y, c + t * settings.background);
                out.final_transmittance[pix] = t;
                out.contrib_count[pix] = count;
            }
        }
    });
    return out;
}

SplatGradients rasterize_backward(std::span<const Splat2D> splats, std::span<const Eigen::Vector3d> colors,
                                  std::span<const double> opacities, const Camera &cam,
                                  const RasterSettings &settings, const RenderOutput &forward,
                                  const Image &d_image) {
    check_inputs(splats.size(), colors.size(), opacities.size());
    const TileGeometry geo = tile_geometry(cam, settings.tile_size);
    if (forward.color.width != cam.width || forward.color.height != cam.height || d_image.width != cam.width ||
        d_image.height != cam.height || forward.tiles_x != geo.tiles_x || forward.tiles_y != geo.tiles_y ||
        forward.tile_lists.size() != std::size_t(geo.tiles_x) * geo.tiles_y ||
        forward.splat_count != splats.size() || forward.final_transmittance.size() != forward.color.pixel_count()) {
        throw MismatchedForward("forward buffers do not match the backward inputs");
    }

    std::vector<PreparedSplat> prep(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        prep[i] = prepare(splats[i], opacities[i]);
    }

    struct Partial {
        Eigen::Vector2d d_mean = Eigen::Vector2d::Zero();
        double d_conic_a = 0, d_conic_b = 0, d_conic_c = 0;
        Eigen::Vector3d d_color = Eigen::Vector3d::Zero();
        double d_opacity = 0;
    };
    std::vector<std::vector<Partial>> partials(forward.tile_lists.size());

    parallel_for(forward.tile_lists.size(), [&](std::size_t tile_id) {
        const auto &list = forward.tile_lists[tile_id];
        auto &acc = partials[tile_id];
        acc.assign(list.size(), Partial{});
        if (list.empty()) {
            return;
        }
        const int tx = int(tile_id % geo.tiles_x);
        const int ty = int(tile_id / geo.tiles_x);
        const int x_end = std::min(cam.width, (tx + 1) * geo.tile);
        const int y_end = std::min(cam.height, (ty + 1) * geo.tile);
        std::vector<Contribution> contribs;
        std::vector<double> trans;
        for (int y = ty * geo.tile; y < y_end; ++y) {
            for (int x = tx * geo.tile; x < x_end; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                const Eigen::Vector3d g_pix = d_image.pixel(x, y);
                if (g_pix.isZero(0.0)) {
                    continue;
                }
                // Replay the forward to recover the blended contributions.
                contribs.clear();
                trans.clear();
                double t = 1.0;
                for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
                    const PreparedSplat &p = prep[list[slot]];
                    const double power = power_at(p, px, py);
                    if (power > 0) {
                        continue;
                    }
                    const double gauss = std::exp(power);
                    const double raw = p.opacity * gauss;
                    const double alpha = std::min(kAlphaClamp, raw);
                    if (alpha < kAlphaSkip) {
                        continue;
                    }
                    const double next_t = t * (1.0 - alpha);
                    if (settings.early_termination && next_t < kTransmittanceStop) {
                        break;
                    }
                    contribs.push_back({slot, alpha, gauss, raw > kAlphaClamp});
                    trans.push_back(t);
                    t = next_t;
                }
                // Suffix = everything blended behind contribution k, incl. background.
                Eigen::Vector3d suffix = t * settings.background;
                for (std::size_t k = contribs.size(); k-- > 0;) {
                    const Contribution &ck = contribs[k];
                    const std::uint32_t idx = list[ck.slot];
                    const double tk = trans[k];
                    Partial &pk = acc[ck.slot];
                    pk.d_color += (ck.alpha * tk) * g_pix;
                    const double d_alpha = g_pix.dot(tk * colors[idx] - suffix / (1.0 - ck.alpha));
                    suffix += (ck.alpha * tk) * colors[idx];
                    if (ck.clamped) {
                        continue;
                    }
                    const PreparedSplat &p = prep[idx];
                    pk.d_opacity += d_alpha * ck.gauss;
                    const double d_power = d_alpha * p.opacity * ck.gauss;
                    const double dx = px - p.mean.x();
                    const double dy = py - p.mean.y();
                    pk.d_mean.x() += d_power * (p.conic_a * dx + p.conic_b * dy);
                    pk.d_mean.y() += d_power * (p.conic_b * dx + p.conic_c * dy);
                    pk.d_conic_a += -0.5 * dx * dx * d_power;
                    pk.d_conic_b += -dx * dy * d_power;
                    pk.d_conic_c += -0.5 * dy * dy * d_power;
                }
            }
        }
    });

    // Reduce per-tile partials in tile order; independent of thread count.
    const std::size_t n = splats.size();
    std::vector<Eigen::Vector2d> d_mean(n, Eigen::Vector2d::Zero());
    std::vector<Eigen::Vector3d> d_conic(n, Eigen::Vector3d::Zero());
    SplatGradients grads;
    grads.d_color.assign(n, Eigen::Vector3d::Zero());
    grads.d_opacity.assign(n, 0.0);
    for (std::size_t tile_id = 0; tile_id < partials.size(); ++tile_id) {
        const auto &list = forward.tile_lists[tile_id];
        for (std::size_t slot = 0; slot < partials[tile_id].size(); ++slot) {
            const Partial &p = partials[tile_id][slot];
            const std::uint32_t idx = list[slot];
            d_mean[idx] += p.d_mean;
            d_conic[idx] += Eigen::Vector3d(p.d_conic_a, p.d_conic_b, p.d_conic_c);
            grads.d_color[idx] += p.d_color;
            grads.d_opacity[idx] += p.d_opacity;
        }
    }

    grads.d_mean2d = std::move(d_mean);
    grads.d_cov2d.assign(n, Eigen::Matrix2d::Zero());
    for (std::size_t i = 0; i < n; ++i) {
        if (!prep[i].active) {
            continue;
        }
        // conic = cov^-1  =>  dL/dcov = -conic * G * conic, with G the full
        // symmetric gradient w.r.t. the conic (off-diagonal split in half).
        const PreparedSplat &p = prep[i];
        Eigen::Matrix2d conic;
        conic << p.conic_a, p.conic_b, p.conic_b, p.conic_c;
        Eigen::Matrix2d g;
        g << d_conic[i][0], 0.5 * d_conic[i][1], 0.5 * d_conic[i][1], d_conic[i][2];
        grads.d_cov2d[i] = -conic * g * conic;
    }
    return grads;
}

RenderOutput rasterize_reference(std::span<const Splat2D> splats, std::span<const Eigen::Vector3d> colors,
                                 std::span<const double> opacities, const Camera &cam, const RasterSettings &settings) {
    check_inputs(splats.size(), colors.size(), opacities.size());
    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return depth_less(splats[a], splats[b], a, b); });

    std::vector<Eigen::Matrix2d> inverse(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        inverse[i] = splats[i].cov2d.inverse();
    }

    RenderOutput out;
    out.color = Image(cam.width, cam.height);
    out.final_transmittance.assign(out.color.pixel_count(), 1.0);
    out.contrib_count.assign(out.color.pixel_count(), 0);
    out.splat_count = splats.size();
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Eigen::Vector2d pixel(x + 0.5, y + 0.5);
            double t = 1.0;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            int count = 0;
            for (std::uint32_t i : order) {
                if (!(splats[i].cov2d.determinant() > 0)) {
                    continue;
                }
                const Eigen::Vector2d d = pixel - splats[i].mean2d;
                const double power = -0.5 * d.dot(inverse[i] * d);
                if (power > 0) {
                    continue;
                }
                const double alpha = std::min(kAlphaClamp, opacities[i] * std::exp(power));
                if (alpha < kAlphaSkip) {
                    continue;
                }
                c += alpha * t * colors[i];
                t *= 1.0 - alpha;
                ++count;
            }
            out.color.set_pixel(x, y, c + t * settings.background);
            out.final_transmittance[std::size_t(y) * cam.width + x] = t;
            out.contrib_count[std::size_t(y) * cam.width + x] = count;
        }
    }
    return out;
}

} // namespace swag

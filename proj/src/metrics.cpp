#include "swag/metrics.hpp"
#include "swag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace swag {

namespace {

enum class Border { ZeroSame, Valid, Clipped };

struct Plane {
    int w = 0;
    int h = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int w_, int h_) : w(w_), h(h_), v(std::size_t(w_) * h_, 0.0) {}
    double &at(int x, int y) { return v[std::size_t(y) * w + x]; }
    double at(int x, int y) const { return v[std::size_t(y) * w + x]; }
};

Plane channel(const Image &img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            p.at(x, y) = img.at(x, y, c);
        }
    }
    return p;
}

// 1D filter along x (axis 0) or y (axis 1).
Plane filter_axis(const Plane &in, int axis, Border border) {
    static const auto k = ssim_kernel();
    constexpr int r = kSsimWindow / 2;
    const int len = axis == 0 ? in.w : in.h;
    Border mode = border;
    if (mode == Border::Valid && len < kSsimWindow) {
        mode = Border::Clipped;
    }
    const int out_len = mode == Border::Valid ? len - 2 * r : len;
    Plane out = axis == 0 ? Plane(out_len, in.h) : Plane(in.w, out_len);
    const int other = axis == 0 ? in.h : in.w;
    for (int o = 0; o < other; ++o) {
        for (int i = 0; i < out_len; ++i) {
            const int center = mode == Border::Valid ? i + r : i;
            double sum = 0.0;
            double wsum = 0.0;
            for (int t = -r; t <= r; ++t) {
                const int s = center + t;
                if (s < 0 || s >= len) {
                    continue;
                }
                const double v = axis == 0 ? in.at(s, o) : in.at(o, s);
                sum += k[t + r] * v;
                wsum += k[t + r];
            }
            if (mode == Border::Clipped) {
                sum /= wsum;
            }
            if (axis == 0) {
                out.at(i, o) = sum;
            } else {
                out.at(o, i) = sum;
            }
        }
    }
    return out;
}

Plane filter2d(const Plane &in, Border border) { return filter_axis(filter_axis(in, 0, border), 1, border); }

Plane product(const Plane &a, const Plane &b) {
    Plane out(a.w, a.h);
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        out.v[i] = a.v[i] * b.v[i];
    }
    return out;
}

struct SsimStats {
    Plane mu_x, mu_y, var_x, var_y, cov_xy;
};

SsimStats window_stats(const Plane &x, const Plane &y, Border border) {
    SsimStats s;
    s.mu_x = filter2d(x, border);
    s.mu_y = filter2d(y, border);
    s.var_x = filter2d(product(x, x), border);
    s.var_y = filter2d(product(y, y), border);
    s.cov_xy = filter2d(product(x, y), border);
    for (std::size_t i = 0; i < s.mu_x.v.size(); ++i) {
        const double mx = s.mu_x.v[i], my = s.mu_y.v[i];
        s.var_x.v[i] -= mx * mx;
        s.var_y.v[i] -= my * my;
        s.cov_xy.v[i] -= mx * my;
    }
    return s;
}

inline double ssim_value(double mx, double my, double vx, double vy, double cxy) {
    return ((2 * mx * my + kSsimC1) * (2 * cxy + kSsimC2)) /
           ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
}

double mean_ssim(const Image &a, const Image &b, Border border) {
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < 3; ++c) {
        const SsimStats s = window_stats(channel(a, c), channel(b, c), border);
        for (std::size_t i = 0; i < s.mu_x.v.size(); ++i) {
            total += ssim_value(s.mu_x.v[i], s.mu_y.v[i], s.var_x.v[i], s.var_y.v[i], s.cov_xy.v[i]);
        }
        count += s.mu_x.v.size();
    }
    return count > 0 ? total / double(count) : 1.0;
}

void check_same(const Image &a, const Image &b) {
    if (!a.same_shape(b) || a.data.size() != b.data.size()) {
        throw DimensionMismatch("images differ in size");
    }
}

} // namespace

std::array<double, kSsimWindow> ssim_kernel() {
    std::array<double, kSsimWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double &v : k) {
        v /= sum;
    }
    return k;
}

double mse(const Image &a, const Image &b) {
    check_same(a, b);
    if (a.data.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return sum / double(a.data.size());
}

double psnr(const Image &a, const Image &b) {
    const double m = mse(a, b);
    if (m <= 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, -10.0 * std::log10(m));
}

double ssim(const Image &a, const Image &b) {
    check_same(a, b);
    return mean_ssim(a, b, Border::Valid);
}

double ssim_same(const Image &a, const Image &b) {
    check_same(a, b);
    return mean_ssim(a, b, Border::ZeroSame);
}

LossResult photometric_loss(const Image &render, const Image &target, double ssim_weight) {
    check_same(render, target);
    LossResult r;
    r.grad = Image(render.width, render.height);
    const std::size_t n = render.data.size();
    if (n == 0) {
        r.ssim = 1.0;
        return r;
    }
    const double inv_n = 1.0 / double(n);

    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = render.data[i] - target.data[i];
        l1 += std::abs(d);
        const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        r.grad.data[i] = (1.0 - ssim_weight) * sign * inv_n;
    }
    r.l1 = l1 * inv_n;

    double ssim_total = 0.0;
    // d(loss)/d(mean SSIM) = -w/2; mean SSIM averages n values.
    const double scale = -0.5 * ssim_weight * inv_n;
    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(render, c);
        const Plane y = channel(target, c);
        const SsimStats s = window_stats(x, y, Border::ZeroSame);
        Plane da(x.w, x.h), db(x.w, x.h), dc(x.w, x.h);
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const double mx = s.mu_x.v[i], my = s.mu_y.v[i];
            const double a1 = 2 * mx * my + kSsimC1;
            const double a2 = 2 * s.cov_xy.v[i] + kSsimC2;
            const double b1 = mx * mx + my * my + kSsimC1;
            const double b2 = s.var_x.v[i] + s.var_y.v[i] + kSsimC2;
            const double value = a1 * a2 / (b1 * b2);
            ssim_total += value;
            // Grouped so every term vanishes exactly when the two windows agree.
            const double d_mu = 2 * a2 * (my * b1 - mx * a1) / (b1 * b1 * b2);
            const double d_var = -value / b2;
            const double d_cov = 2 * (a1 / b1) / b2;
            da.v[i] = d_mu + d_cov * (mx * (a2 / b2) - my);
            db.v[i] = d_var;
            dc.v[i] = d_cov;
        }
        // The symmetric zero-padded filter is its own adjoint.
        const Plane fa = filter2d(da, Border::ZeroSame);
        const Plane fb = filter2d(db, Border::ZeroSame);
        const Plane fc = filter2d(dc, Border::ZeroSame);
        for (int yy = 0; yy < x.h; ++yy) {
            for (int xx = 0; xx < x.w; ++xx) {
                const double g = fa.at(xx, yy) + 2 * x.at(xx, yy) * fb.at(xx, yy) + y.at(xx, yy) * fc.at(xx, yy);
                r.grad.at(xx, yy, c) += scale * g;
            }
        }
    }
    r.ssim = ssim_total * inv_n;
    r.value = (1.0 - ssim_weight) * r.l1 + ssim_weight * (1.0 - r.ssim) * 0.5;
    return r;
}

} // namespace swag

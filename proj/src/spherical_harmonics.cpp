#include "swag/spherical_harmonics.hpp"
#include "swag/scene_model.hpp"

#include <algorithm>

namespace swag {

namespace {
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277, -0.5900435899266435};
} // namespace

void sh_basis(const Eigen::Vector3d &d, int degree, double *out) {
    const double x = d.x(), y = d.y(), z = d.z();
    out[0] = kC0;
    if (degree < 1) {
        return;
    }
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (degree < 2) {
        return;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    if (degree < 3) {
        return;
    }
    out[9] = kC3[0] * y * (3 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4 * zz - xx - yy);
    out[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    out[13] = kC3[4] * x * (4 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3 * yy);
}

void sh_basis_gradient(const Eigen::Vector3d &d, int degree, double *g) {
    const double x = d.x(), y = d.y(), z = d.z();
    auto set = [g](int k, double gx, double gy, double gz) {
        g[3 * k] = gx;
        g[3 * k + 1] = gy;
        g[3 * k + 2] = gz;
    };
    set(0, 0, 0, 0);
    if (degree < 1) {
        return;
    }
    set(1, 0, -kC1, 0);
    set(2, 0, 0, kC1);
    set(3, -kC1, 0, 0);
    if (degree < 2) {
        return;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    set(4, kC2[0] * y, kC2[0] * x, 0);
    set(5, 0, kC2[1] * z, kC2[1] * y);
    set(6, -2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z);
    set(7, kC2[3] * z, 0, kC2[3] * x);
    set(8, 2 * kC2[4] * x, -2 * kC2[4] * y, 0);
    if (degree < 3) {
        return;
    }
    set(9, kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0);
    set(10, kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y);
    set(11, kC3[2] * (-2 * x * y), kC3[2] * (4 * zz - xx - 3 * yy), kC3[2] * 8 * y * z);
    set(12, kC3[3] * (-6 * x * z), kC3[3] * (-6 * y * z), kC3[3] * (6 * zz - 3 * xx - 3 * yy));
    set(13, kC3[4] * (4 * zz - 3 * xx - yy), kC3[4] * (-2 * x * y), kC3[4] * 8 * x * z);
    set(14, kC3[5] * 2 * x * z, kC3[5] * (-2 * y * z), kC3[5] * (xx - yy));
    set(15, kC3[6] * (3 * xx - 3 * yy), kC3[6] * (-6 * x * y), 0);
}

Eigen::Vector3d evaluate_sh(const double *coeffs, const Eigen::Vector3d &view_dir, int degree) {
    double basis[16];
    sh_basis(view_dir, degree, basis);
    Eigen::Vector3d rgb(0.5, 0.5, 0.5);
    const int n = sh_coeff_count(degree);
    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < 3; ++c) {
            rgb[c] += basis[k] * coeffs[3 * k + c];
        }
    }
    return rgb.cwiseMax(0.0);
}

Eigen::Vector3d evaluate_sh_backward(const double *coeffs, const Eigen::Vector3d &view_dir, int degree,
                                     const Eigen::Vector3d &d_color, double *d_coeffs) {
    double basis[16];
    double grad[48];
    sh_basis(view_dir, degree, basis);
    sh_basis_gradient(view_dir, degree, grad);
    const int n = sh_coeff_count(degree);

    Eigen::Vector3d raw(0.5, 0.5, 0.5);
    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < 3; ++c) {
            raw[c] += basis[k] * coeffs[3 * k + c];
        }
    }
    Eigen::Vector3d d_raw = d_color;
    for (int c = 0; c < 3; ++c) {
        if (raw[c] < 0) {
            d_raw[c] = 0;
        }
    }

    Eigen::Vector3d d_dir = Eigen::Vector3d::Zero();
    for (int k = 0; k < n; ++k) {
        double dot = 0;
        for (int c = 0; c < 3; ++c) {
            d_coeffs[3 * k + c] += basis[k] * d_raw[c];
            dot += coeffs[3 * k + c] * d_raw[c];
        }
        d_dir += dot * Eigen::Vector3d(grad[3 * k], grad[3 * k + 1], grad[3 * k + 2]);
    }
    return d_dir;
}

} // namespace swag

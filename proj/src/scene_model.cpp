#include "swag/scene_model.hpp"
#include "swag/errors.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace swag {

double GaussianCloud::opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }

void GaussianCloud::resize(std::size_t n) {
    centers.resize(3 * n, 0.0);
    log_scales.resize(3 * n, 0.0);
    const std::size_t old = rotations.size() / 4;
    rotations.resize(4 * n, 0.0);
    for (std::size_t i = old; i < n; ++i) {
        rotations[4 * i] = 1.0;
    }
    opacity_logits.resize(n, 0.0);
    sh.resize(n * sh_stride(), 0.0);
}

void GaussianCloud::push_back_from(const GaussianCloud &src, std::size_t i) {
    centers.insert(centers.end(), &src.centers[3 * i], &src.centers[3 * i] + 3);
    log_scales.insert(log_scales.end(), &src.log_scales[3 * i], &src.log_scales[3 * i] + 3);
    rotations.insert(rotations.end(), &src.rotations[4 * i], &src.rotations[4 * i] + 4);
    opacity_logits.push_back(src.opacity_logits[i]);
    const double *block = src.sh_block(i);
    sh.insert(sh.end(), block, block + src.sh_stride());
}

namespace {
template <typename T> void filter_strided(std::vector<T> &v, const std::vector<bool> &keep, std::size_t stride) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) {
            continue;
        }
        if (out != i) {
            std::copy_n(v.begin() + i * stride, stride, v.begin() + out * stride);
        }
        ++out;
    }
    v.resize(out * stride);
}
} // namespace

void GaussianCloud::filter(const std::vector<bool> &keep) {
    filter_strided(centers, keep, 3);
    filter_strided(log_scales, keep, 3);
    filter_strided(rotations, keep, 4);
    filter_strided(opacity_logits, keep, 1);
    filter_strided(sh, keep, sh_stride());
}

void GaussianCloud::normalize_rotations() {
    for (std::size_t i = 0; i < size(); ++i) {
        auto q = rotation(i);
        const double n = q.norm();
        if (n > 0) {
            q /= n;
        } else {
            q = Eigen::Vector4d(1, 0, 0, 0);
        }
    }
}

bool GaussianCloud::consistent() const {
    const std::size_t n = size();
    return centers.size() == 3 * n && log_scales.size() == 3 * n && rotations.size() == 4 * n &&
           sh.size() == n * sh_stride();
}

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d &raw) {
    const Eigen::Vector4d q = raw.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), //
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),  //
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Vector4d quaternion_to_rotation_backward(const Eigen::Vector4d &raw, const Eigen::Matrix3d &g) {
    const double norm = raw.norm();
    const Eigen::Vector4d q = raw / norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d dq;
    dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                 w * g(2, 1) - 2 * x * g(2, 2));
    dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                 z * g(2, 1) - 2 * y * g(2, 2));
    dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
                 x * g(2, 0) + y * g(2, 1));
    // Project through the normalization q/|q|.
    return (dq - q * q.dot(dq)) / norm;
}

Eigen::Matrix3d compute_covariance(const Eigen::Vector3d &log_scale, const Eigen::Vector4d &rotation) {
    const Eigen::Matrix3d r = quaternion_to_rotation(rotation);
    const Eigen::Matrix3d m = r * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

CovarianceGrad compute_covariance_backward(const Eigen::Vector3d &log_scale, const Eigen::Vector4d &rotation,
                                           const Eigen::Matrix3d &d_cov) {
    const Eigen::Matrix3d r = quaternion_to_rotation(rotation);
    const Eigen::Vector3d s = log_scale.array().exp();
    const Eigen::Matrix3d m = r * s.asDiagonal();
    // Sigma = M M^T, so dL/dM = (G + G^T) M.
    const Eigen::Matrix3d d_m = (d_cov + d_cov.transpose()) * m;
    CovarianceGrad out;
    Eigen::Matrix3d d_r;
    for (int k = 0; k < 3; ++k) {
        out.d_log_scale[k] = r.col(k).dot(d_m.col(k)) * s[k];
        d_r.col(k) = d_m.col(k) * s[k];
    }
    out.d_rotation = quaternion_to_rotation_backward(rotation, d_r);
    return out;
}

double eval_gaussian_world(const Eigen::Matrix3d &covariance, const Eigen::Vector3d &center,
                           const Eigen::Vector3d &point) {
    const Eigen::Matrix3d reg = covariance + 1e-9 * Eigen::Matrix3d::Identity();
    if (!reg.allFinite()) {
        throw DegenerateCovariance("covariance has non-finite entries");
    }
    Eigen::LDLT<Eigen::Matrix3d> ldlt(reg);
    const double max_diag = reg.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-15 * std::max(max_diag, 1.0)) {
        throw DegenerateCovariance("covariance is numerically singular");
    }
    const Eigen::Vector3d d = point - center;
    return std::exp(-0.5 * d.dot(ldlt.solve(d)));
}

} // namespace swag

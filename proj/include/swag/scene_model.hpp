#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <vector>

namespace swag {

constexpr int kMaxShDegree = 3;

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/**
 * Structure-of-arrays storage for a set of anisotropic 3D Gaussians.
 *
 * All arrays are flat and indexed by Gaussian: centers/log_scales hold 3
 * values per Gaussian, rotations 4 (w, x, y, z), opacity_logits 1, and sh
 * holds sh_coeff_count(sh_degree) * 3 values laid out coefficient-major,
 * channel-minor. Scales live in log space and opacities in logit space so the
 * optimizer works on unconstrained values.
 */
struct GaussianCloud {
    int sh_degree = kMaxShDegree;
    std::vector<double> centers;
    std::vector<double> log_scales;
    std::vector<double> rotations;
    std::vector<double> opacity_logits;
    std::vector<double> sh;

    std::size_t size() const { return opacity_logits.size(); }
    int coeffs_per_gaussian() const { return sh_coeff_count(sh_degree); }
    std::size_t sh_stride() const { return std::size_t(coeffs_per_gaussian()) * 3; }

    Eigen::Map<Eigen::Vector3d> center(std::size_t i) { return Eigen::Map<Eigen::Vector3d>(&centers[3 * i]); }
    Eigen::Map<const Eigen::Vector3d> center(std::size_t i) const {
        return Eigen::Map<const Eigen::Vector3d>(&centers[3 * i]);
    }
    Eigen::Map<Eigen::Vector3d> log_scale(std::size_t i) { return Eigen::Map<Eigen::Vector3d>(&log_scales[3 * i]); }
    Eigen::Map<const Eigen::Vector3d> log_scale(std::size_t i) const {
        return Eigen::Map<const Eigen::Vector3d>(&log_scales[3 * i]);
    }
    Eigen::Map<Eigen::Vector4d> rotation(std::size_t i) { return Eigen::Map<Eigen::Vector4d>(&rotations[4 * i]); }
    Eigen::Map<const Eigen::Vector4d> rotation(std::size_t i) const {
        return Eigen::Map<const Eigen::Vector4d>(&rotations[4 * i]);
    }
    const double *sh_block(std::size_t i) const { return &sh[i * sh_stride()]; }
    double *sh_block(std::size_t i) { return &sh[i * sh_stride()]; }

    double opacity(std::size_t i) const;

    void resize(std::size_t n);
    // Appends Gaussian `i` of `src` (same SH degree).
    void push_back_from(const GaussianCloud &src, std::size_t i);
    // Keeps Gaussians whose mask entry is true, preserving order.
    void filter(const std::vector<bool> &keep);
    // Renormalizes every quaternion to unit length.
    void normalize_rotations();
    bool consistent() const;
};

inline double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Rotation matrix of a quaternion (w, x, y, z). The quaternion is normalized first.
Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d &q);

// Gradient w.r.t. the raw (unnormalized) quaternion given dL/dR.
Eigen::Vector4d quaternion_to_rotation_backward(const Eigen::Vector4d &q, const Eigen::Matrix3d &d_rotation);

/// Sigma = R diag(s)^2 R^T with s = exp(log_scale).
Eigen::Matrix3d compute_covariance(const Eigen::Vector3d &log_scale, const Eigen::Vector4d &rotation);

struct CovarianceGrad {
    Eigen::Vector3d d_log_scale;
    Eigen::Vector4d d_rotation;
};

// Backpropagates a symmetric dL/dSigma into log-scale and quaternion gradients.
CovarianceGrad compute_covariance_backward(const Eigen::Vector3d &log_scale, const Eigen::Vector4d &rotation,
                                           const Eigen::Matrix3d &d_covariance);

/// exp(-1/2 (y-x)^T Sigma^-1 (y-x)). Throws DegenerateCovariance when Sigma
/// stays singular after adding 1e-9 to the diagonal.
double eval_gaussian_world(const Eigen::Matrix3d &covariance, const Eigen::Vector3d &center,
                           const Eigen::Vector3d &point);

} // namespace swag

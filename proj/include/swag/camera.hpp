#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>

namespace swag {

/// Pinhole camera. Pixel (i, j) has its center at (i + 0.5, j + 0.5).
struct Camera {
    Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    double z_near = 0.01;

    Eigen::Matrix3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Eigen::Vector3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    // Camera center in world coordinates.
    Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

    // Throws std::invalid_argument on a non-orthonormal rotation or bad intrinsics.
    void validate() const;

    static Camera look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target, const Eigen::Vector3d &up,
                          double focal, int width, int height);
};

struct Splat2D {
    Eigen::Vector2d mean2d;
    Eigen::Matrix2d cov2d;
    double depth = 0.0;
    std::uint32_t gaussian_index = 0;
};

constexpr double kCovarianceDilation = 0.3;
constexpr double kGuardBand = 1.3;

/// EWA projection of one Gaussian. Returns nullopt when culled (behind the
/// near plane or outside the 1.3x image guard band).
std::optional<Splat2D> project_gaussian(const Eigen::Vector3d &center, const Eigen::Matrix3d &covariance,
                                        const Camera &cam, std::uint32_t index = 0);

struct ProjectionGrad {
    Eigen::Vector3d d_center;
    Eigen::Matrix3d d_covariance;
};

// Backpropagates splat gradients (d_cov2d is the full-matrix gradient of the
// symmetric 2x2) into world-space center and covariance.
ProjectionGrad project_gaussian_backward(const Eigen::Vector3d &center, const Eigen::Matrix3d &covariance,
                                         const Camera &cam, const Eigen::Vector2d &d_mean2d,
                                         const Eigen::Matrix2d &d_cov2d);

/// 3 * sqrt(max eigenvalue): the 3-sigma screen extent of a splat.
double splat_radius(const Eigen::Matrix2d &cov2d);

double max_eigenvalue(const Eigen::Matrix2d &cov2d);

} // namespace swag

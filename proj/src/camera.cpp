#include "swag/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace swag {

void Camera::validate() const {
    const Eigen::Matrix3d r = rotation();
    if (!((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6)) {
        throw std::invalid_argument("camera rotation is not orthonormal");
    }
    if (!(fx > 0 && fy > 0) || width < 1 || height < 1) {
        throw std::invalid_argument("camera intrinsics out of range");
    }
}

Camera Camera::look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target, const Eigen::Vector3d &up,
                       double focal, int width, int height) {
    // OpenCV convention: +z forward, +y down.
    const Eigen::Vector3d fwd = (target - eye).normalized();
    const Eigen::Vector3d right = fwd.cross(up).normalized();
    const Eigen::Vector3d down = fwd.cross(right);
    Eigen::Matrix3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = fwd.transpose();
    Camera cam;
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    cam.fx = cam.fy = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.width = width;
    cam.height = height;
    return cam;
}

namespace {

Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d &t, const Camera &cam) {
    const double iz = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz, //
        0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    return j;
}

} // namespace

std::optional<Splat2D> project_gaussian(const Eigen::Vector3d &center, const Eigen::Matrix3d &covariance,
                                        const Camera &cam, std::uint32_t index) {
    const Eigen::Matrix3d rot = cam.rotation();
    const Eigen::Vector3d t = rot * center + cam.translation();
    if (!(t.z() > cam.z_near)) {
        return std::nullopt;
    }
    const Eigen::Vector2d mean(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
    const double half_w = 0.5 * kGuardBand * cam.width;
    const double half_h = 0.5 * kGuardBand * cam.height;
    if (std::abs(mean.x() - 0.5 * cam.width) > half_w || std::abs(mean.y() - 0.5 * cam.height) > half_h) {
        return std::nullopt;
    }
    const Eigen::Matrix<double, 2, 3> t_mat = projection_jacobian(t, cam) * rot;
    Splat2D s;
    s.mean2d = mean;
    s.cov2d = t_mat * covariance * t_mat.transpose();
    s.cov2d(0, 0) += kCovarianceDilation;
    s.cov2d(1, 1) += kCovarianceDilation;
    s.depth = t.z();
    s.gaussian_index = index;
    return s;
}

ProjectionGrad project_gaussian_backward(const Eigen::Vector3d &center, const Eigen::Matrix3d &covariance,
                                         const Camera &cam, const Eigen::Vector2d &d_mean2d,
                                         const Eigen::Matrix2d &d_cov2d) {
    const Eigen::Matrix3d rot = cam.rotation();
    const Eigen::Vector3d t = rot * center + cam.translation();
    const Eigen::Matrix<double, 2, 3> jac = projection_jacobian(t, cam);
    const Eigen::Matrix<double, 2, 3> t_mat = jac * rot;

    const Eigen::Matrix2d g = 0.5 * (d_cov2d + d_cov2d.transpose());
    ProjectionGrad out;
    out.d_covariance = t_mat.transpose() * g * t_mat;
    const Eigen::Matrix<double, 2, 3> d_t_mat = 2.0 * g * t_mat * covariance;
    const Eigen::Matrix<double, 2, 3> d_jac = d_t_mat * rot.transpose();

    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    Eigen::Vector3d d_t;
    d_t.x() = d_mean2d.x() * cam.fx * iz - d_jac(0, 2) * cam.fx * iz2;
    d_t.y() = d_mean2d.y() * cam.fy * iz - d_jac(1, 2) * cam.fy * iz2;
    d_t.z() = -d_mean2d.x() * cam.fx * t.x() * iz2 - d_mean2d.y() * cam.fy * t.y() * iz2 //
              - d_jac(0, 0) * cam.fx * iz2 + d_jac(0, 2) * 2.0 * cam.fx * t.x() * iz3  //
              - d_jac(1, 1) * cam.fy * iz2 + d_jac(1, 2) * 2.0 * cam.fy * t.y() * iz3;
    out.d_center = rot.transpose() * d_t;
    return out;
}

double max_eigenvalue(const Eigen::Matrix2d &c) {
    const double mid = 0.5 * (c(0, 0) + c(1, 1));
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    return mid + std::sqrt(std::max(0.0, mid * mid - det));
}

double splat_radius(const Eigen::Matrix2d &cov2d) { return 3.0 * std::sqrt(std::max(0.0, max_eigenvalue(cov2d))); }

} // namespace swag

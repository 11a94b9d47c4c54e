#pragma once

#include "swag/camera.hpp"
#include "swag/data_io.hpp"
#include "swag/random.hpp"
#include "swag/rasterizer.hpp"
#include "swag/scene_model.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

namespace swag::testing {

inline double rel_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double central_difference(const std::function<double(double)> &f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Camera test_camera(int w, int h, const Eigen::Vector3d &eye = {0.0, -3.0, 0.4}) {
    return Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 1.06 * w, w, h);
}

// Random screen-space splats fully inside a w x h image.
struct SplatScene {
    std::vector<Splat2D> splats;
    std::vector<Eigen::Vector3d> colors;
    std::vector<double> opacities;
};

inline SplatScene random_splats(std::uint64_t seed, int count, int w, int h, bool distinct_depths = true) {
    CounterRng rng(seed);
    SplatScene s;
    for (int i = 0; i < count; ++i) {
        Splat2D sp;
        sp.mean2d = {rng.uniform(1.0, w - 1.0), rng.uniform(1.0, h - 1.0)};
        const double a = rng.uniform(0.8, 6.0);
        const double b = rng.uniform(0.8, 6.0);
        const double t = rng.uniform(0.0, 3.14159);
        Eigen::Matrix2d r;
        r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
        sp.cov2d = r * Eigen::Vector2d(a, b).asDiagonal() * r.transpose();
        sp.depth = distinct_depths ? rng.uniform(1.0, 5.0) : 2.0;
        sp.gaussian_index = std::uint32_t(i);
        s.splats.push_back(sp);
        s.colors.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
        s.opacities.push_back(rng.uniform(0.05, 0.95));
    }
    return s;
}

// Small world-space cloud in front of test_camera.
inline GaussianCloud random_cloud(std::uint64_t seed, int count, int sh_degree = 1, double spread = 0.5) {
    CounterRng rng(seed);
    GaussianCloud c;
    c.sh_degree = sh_degree;
    c.resize(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        c.center(i) = Eigen::Vector3d(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                                      rng.uniform(-spread, spread));
        c.log_scale(i) = Eigen::Vector3d(std::log(rng.uniform(0.12, 0.3)), std::log(rng.uniform(0.12, 0.3)),
                                         std::log(rng.uniform(0.12, 0.3)));
        c.rotation(i) = Eigen::Vector4d(rng.uniform(0.5, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                        rng.uniform(-0.5, 0.5));
        c.opacity_logits[i] = rng.uniform(-1.0, 1.5);
        double *sh = c.sh_block(i);
        for (std::size_t k = 0; k < c.sh_stride(); ++k) {
            sh[k] = k < 3 ? rng.uniform(-1.0, 1.0) : rng.uniform(-0.2, 0.2);
        }
    }
    return c;
}

inline Image random_image(std::uint64_t seed, int w, int h) {
    CounterRng rng(seed);
    Image img(w, h);
    for (double &v : img.data) {
        v = rng.uniform();
    }
    return img;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("swag_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

} // namespace swag::testing

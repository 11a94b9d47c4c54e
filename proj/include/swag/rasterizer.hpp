#pragma once

#include "swag/camera.hpp"
#include "swag/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace swag {

constexpr double kAlphaClamp = 0.99;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kTransmittanceStop = 1e-4;

struct RasterSettings {
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    int tile_size = 16;
    bool early_termination = true;
};

/// Forward result. `tile_lists` keeps the depth-sorted splat indices per tile
/// so the backward pass replays exactly the same blending order.
struct RenderOutput {
    Image color;
    std::vector<double> final_transmittance;
    std::vector<int> contrib_count;

    int tiles_x = 0;
    int tiles_y = 0;
    std::size_t splat_count = 0;
    std::vector<std::vector<std::uint32_t>> tile_lists;
};

struct SplatGradients {
    std::vector<Eigen::Vector2d> d_mean2d;
    std::vector<Eigen::Matrix2d> d_cov2d; // full-matrix gradient of the symmetric covariance
    std::vector<Eigen::Vector3d> d_color;
    std::vector<double> d_opacity;
};

/// Per-pixel opacity of a splat: min(alpha * exp(-1/2 d^T cov^-1 d), 0.99),
/// or 0 when that value falls below the 1/255 skip threshold.
double splat_alpha(double alpha, const Eigen::Vector2d &mean2d, const Eigen::Matrix2d &cov2d,
                   const Eigen::Vector2d &pixel);

// Screen radius used for tile binning. Every pixel outside it receives an
// opacity below the skip threshold, so binning never changes the image.
double binning_radius(const Eigen::Matrix2d &cov2d, double opacity);

RenderOutput rasterize_forward(std::span<const Splat2D> splats, std::span<const Eigen::Vector3d> colors,
                               std::span<const double> opacities, const Camera &cam,
                               const RasterSettings &settings = {});

/// Exact adjoint of rasterize_forward. Throws MismatchedForward when `forward`
/// or `d_color` do not belong to these inputs.
SplatGradients rasterize_backward(std::span<const Splat2D> splats, std::span<const Eigen::Vector3d> colors,
                                  std::span<const double> opacities, const Camera &cam,
                                  const RasterSettings &settings, const RenderOutput &forward,
                                  const Image &d_color);

/// Test oracle: global depth sort and a full loop over splats per pixel,
/// without tiling or early termination.
RenderOutput rasterize_reference(std::span<const Splat2D> splats, std::span<const Eigen::Vector3d> colors,
                                 std::span<const double> opacities, const Camera &cam,
                                 const RasterSettings &settings = {});

} // namespace swag

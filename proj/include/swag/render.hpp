#pragma once

#include "swag/appearance.hpp"
#include "swag/camera.hpp"
#include "swag/rasterizer.hpp"
#include "swag/scene_model.hpp"

#include <span>
#include <vector>

namespace swag {

struct RenderOptions {
    ConditionOptions condition;
    RasterSettings raster;
    // Gaussians with a true entry are not rendered (static-only renders).
    std::vector<bool> exclude;
};

/// Everything produced by one forward render that the backward pass needs.
struct RenderContext {
    std::vector<std::uint32_t> visible;
    std::vector<Eigen::Matrix3d> covariances; // aligned with visible
    std::vector<Splat2D> splats;              // aligned with visible
    ConditioningResult conditioning;          // aligned with visible
    std::vector<double> embedding;
    RenderOptions options;
    RenderOutput output;

    const Image &color_output() const { return output.color; }
};

RenderContext render(const GaussianCloud &cloud, const AppearanceModel &model, std::span<const double> embedding,
                     const Camera &cam, const RenderOptions &options);

/// Gradients of a scalar loss with respect to every trainable parameter.
struct ParamGrads {
    std::vector<double> d_centers;
    std::vector<double> d_log_scales;
    std::vector<double> d_rotations;
    std::vector<double> d_opacity_logits;
    std::vector<double> d_sh;
    std::vector<double> d_mlp;
    HashGradient d_hash;
    std::vector<double> d_embedding;

    // Screen-space positional gradient norm per Gaussian in NDC units, and
    // whether the Gaussian was visible. Used by densification.
    std::vector<double> mean2d_grad_norm;
    std::vector<bool> visible;

    void reset(const GaussianCloud &cloud, const AppearanceModel &model);
};

/// Backpropagates dL/d(image) through rasterization, conditioning and
/// projection. `grads` is reset and then filled.
void render_backward(const GaussianCloud &cloud, const AppearanceModel &model, const Camera &cam,
                     const RenderContext &ctx, const Image &d_image, ParamGrads &grads);

} // namespace swag

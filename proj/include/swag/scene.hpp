#pragma once

#include "swag/appearance.hpp"
#include "swag/camera.hpp"
#include "swag/render.hpp"
#include "swag/scene_model.hpp"

#include <string>
#include <vector>

namespace swag {

/// A renderable scene: Gaussians, the appearance model and the training
/// cameras it was fitted to. Embedding k belongs to cameras[k].
struct Scene {
    GaussianCloud cloud;
    AppearanceModel model;
    Variant variant = Variant::Swag;
    int sh_degree = 0; // active degree
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    std::vector<Camera> cameras;
    std::vector<std::string> image_names;
    std::vector<double> transient_variance; // empty until computed

    int find_image(const std::string &name) const;

    RenderOptions render_options(SampleMode mode = SampleMode::Eval, std::uint64_t noise_key = 0) const;

    /// Eval-mode render with an explicit embedding; `exclude` drops Gaussians.
    Image render_image(std::span<const double> embedding, const Camera &cam,
                       const std::vector<bool> &exclude = {}) const;
};

/// Var[sampled opacity variation] per Gaussian over all training cameras,
/// evaluated deterministically (u = 0.5).
std::vector<double> compute_transient_variance(const Scene &scene);

} // namespace swag

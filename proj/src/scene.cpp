#include "swag/scene.hpp"
#include "swag/errors.hpp"
#include "swag/transient.hpp"

namespace swag {

int Scene::find_image(const std::string &name) const {
    for (std::size_t i = 0; i < image_names.size(); ++i) {
        if (image_names[i] == name) {
            return int(i);
        }
    }
    throw UnknownImage("no training image named '" + name + "'");
}

RenderOptions Scene::render_options(SampleMode mode, std::uint64_t noise_key) const {
    RenderOptions opts;
    opts.condition.variant = variant;
    opts.condition.sample = mode;
    opts.condition.noise_key = noise_key;
    opts.condition.sh_degree = sh_degree;
    opts.raster.background = background;
    return opts;
}

Image Scene::render_image(std::span<const double> embedding, const Camera &cam,
                          const std::vector<bool> &exclude) const {
    RenderOptions opts = render_options();
    opts.exclude = exclude;
    return render(cloud, model, embedding, cam, opts).color_output();
}

std::vector<double> compute_transient_variance(const Scene &scene) {
    const std::size_t n = scene.cloud.size();
    if (!uses_transient(scene.variant) || scene.cameras.size() < 2) {
        return std::vector<double>(n, 0.0);
    }
    std::vector<std::vector<double>> sampled;
    sampled.reserve(scene.cameras.size());
    ConditionOptions opts;
    opts.variant = scene.variant;
    opts.sample = SampleMode::Eval;
    opts.sh_degree = scene.sh_degree;
    for (std::size_t k = 0; k < scene.cameras.size(); ++k) {
        ConditioningResult r = condition_scene(scene.cloud, scene.model, int(k), scene.cameras[k], opts);
        sampled.push_back(std::move(r.delta_alpha_sampled));
    }
    return accumulate_opacity_stats(sampled);
}

} // namespace swag

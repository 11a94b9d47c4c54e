#include "swag/render.hpp"
#include "swag/errors.hpp"
#include "swag/parallel.hpp"

namespace swag {

RenderContext render(const GaussianCloud &cloud, const AppearanceModel &model, std::span<const double> embedding,
                     const Camera &cam, const RenderOptions &options) {
    if (!options.exclude.empty() && options.exclude.size() != cloud.size()) {
        throw DimensionMismatch("exclusion mask does not match the Gaussian count");
    }
    RenderContext ctx;
    ctx.options = options;
    ctx.embedding.assign(embedding.begin(), embedding.end());

    const std::size_t n = cloud.size();
    std::vector<std::optional<Splat2D>> projected(n);
    std::vector<Eigen::Matrix3d> cov(n);
    parallel_for((n + 255) / 256, [&](std::size_t block) {
        const std::size_t end = std::min(n, block * 256 + 256);
        for (std::size_t g = block * 256; g < end; ++g) {
            if (!options.exclude.empty() && options.exclude[g]) {
                continue;
            }
            cov[g] = compute_covariance(cloud.log_scale(g), cloud.rotation(g));
            projected[g] = project_gaussian(cloud.center(g), cov[g], cam, std::uint32_t(g));
        }
    });
    for (std::size_t g = 0; g < n; ++g) {
        if (projected[g]) {
            ctx.visible.push_back(std::uint32_t(g));
            ctx.covariances.push_back(cov[g]);
            ctx.splats.push_back(*projected[g]);
        }
    }

    if (!ctx.visible.empty()) {
        ctx.conditioning = condition_scene(cloud, model, embedding, cam, options.condition, ctx.visible);
    }
    ctx.output = rasterize_forward(ctx.splats, ctx.conditioning.colors, ctx.conditioning.effective_opacity, cam,
                                   options.raster);
    return ctx;
}

void ParamGrads::reset(const GaussianCloud &cloud, const AppearanceModel &model) {
    d_centers.assign(cloud.centers.size(), 0.0);
    d_log_scales.assign(cloud.log_scales.size(), 0.0);
    d_rotations.assign(cloud.rotations.size(), 0.0);
    d_opacity_logits.assign(cloud.size(), 0.0);
    d_sh.assign(cloud.sh.size(), 0.0);
    d_mlp.assign(model.mlp.param_count(), 0.0);
    d_hash.clear();
    d_embedding.assign(kEmbeddingDim, 0.0);
    mean2d_grad_norm.assign(cloud.size(), 0.0);
    visible.assign(cloud.size(), false);
}

void render_backward(const GaussianCloud &cloud, const AppearanceModel &model, const Camera &cam,
                     const RenderContext &ctx, const Image &d_image, ParamGrads &grads) {
    grads.reset(cloud, model);
    const std::size_t m = ctx.visible.size();
    if (m == 0) {
        return;
    }
    const ConditioningResult &cond = ctx.conditioning;
    const SplatGradients sg = rasterize_backward(ctx.splats, cond.colors, cond.effective_opacity, cam,
                                                 ctx.options.raster, ctx.output, d_image);

    ConditioningGrads cg;
    cg.reset(cloud, model);
    condition_scene_backward(cloud, model, ctx.embedding, cam, ctx.options.condition, cond, sg.d_color,
                             sg.d_opacity, cg);
    grads.d_centers = std::move(cg.d_centers);
    grads.d_sh = std::move(cg.d_sh);
    grads.d_opacity_logits = std::move(cg.d_opacity_logits);
    grads.d_mlp = std::move(cg.d_mlp);
    grads.d_hash = std::move(cg.d_hash);
    grads.d_embedding = std::move(cg.d_embedding);

    const double half_w = 0.5 * cam.width;
    const double half_h = 0.5 * cam.height;
    parallel_for((m + 255) / 256, [&](std::size_t block) {
        const std::size_t end = std::min(m, block * 256 + 256);
        for (std::size_t j = block * 256; j < end; ++j) {
            const std::uint32_t g = ctx.visible[j];
            const ProjectionGrad pg = project_gaussian_backward(cloud.center(g), ctx.covariances[j], cam,
                                                                sg.d_mean2d[j], sg.d_cov2d[j]);
            Eigen::Map<Eigen::Vector3d>(&grads.d_centers[3 * g]) += pg.d_center;
            const CovarianceGrad cv =
                compute_covariance_backward(cloud.log_scale(g), cloud.rotation(g), pg.d_covariance);
            Eigen::Map<Eigen::Vector3d>(&grads.d_log_scales[3 * g]) += cv.d_log_scale;
            Eigen::Map<Eigen::Vector4d>(&grads.d_rotations[4 * g]) += cv.d_rotation;
            grads.mean2d_grad_norm[g] = Eigen::Vector2d(sg.d_mean2d[j].x() * half_w, sg.d_mean2d[j].y() * half_h).norm();
        }
    });
    for (std::uint32_t g : ctx.visible) {
        grads.visible[g] = true;
    }
}

} // namespace swag

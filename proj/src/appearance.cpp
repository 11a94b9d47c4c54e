#include "swag/appearance.hpp"
#include "swag/errors.hpp"
#include "swag/parallel.hpp"
#include "swag/random.hpp"
#include "swag/spherical_harmonics.hpp"
#include "swag/transient.hpp"

#include <cmath>
#include <numeric>

namespace swag {

namespace {
// Fixed chunking keeps every reduction independent of the thread count.
constexpr std::size_t kChunk = 64;
constexpr int kColorOffset = 0;
constexpr int kEncodingOffset = 3;
} // namespace

std::string variant_name(Variant v) {
    switch (v) {
    case Variant::Swag:
        return "swag";
    case Variant::SwagA:
        return "swag-a";
    case Variant::SwagT:
        return "swag-t";
    case Variant::Plain:
        return "3dgs";
    }
    return "swag";
}

Variant parse_variant(const std::string &name) {
    if (name == "swag") {
        return Variant::Swag;
    }
    if (name == "swag-a") {
        return Variant::SwagA;
    }
    if (name == "swag-t") {
        return Variant::SwagT;
    }
    if (name == "3dgs") {
        return Variant::Plain;
    }
    throw std::invalid_argument("unknown mode '" + name + "'");
}

std::span<const double> AppearanceModel::embedding(int image) const {
    if (image < 0 || image >= image_count()) {
        throw UnknownImage("image index " + std::to_string(image) + " out of range");
    }
    return {embeddings.data() + std::size_t(image) * kEmbeddingDim, kEmbeddingDim};
}

std::span<double> AppearanceModel::embedding(int image) {
    if (image < 0 || image >= image_count()) {
        throw UnknownImage("image index " + std::to_string(image) + " out of range");
    }
    return {embeddings.data() + std::size_t(image) * kEmbeddingDim, kEmbeddingDim};
}

std::vector<double> interpolate_embedding(std::span<const double> a, std::span<const double> b, double t) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("embedding sizes differ");
    }
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = t == 0.0 ? a[i] : (t == 1.0 ? b[i] : (1.0 - t) * a[i] + t * b[i]);
    }
    return out;
}

std::vector<double> AppearanceModel::mean_embedding() const {
    std::vector<double> mean(kEmbeddingDim, 0.0);
    const int n = image_count();
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < kEmbeddingDim; ++k) {
            mean[k] += embeddings[std::size_t(i) * kEmbeddingDim + k];
        }
    }
    if (n > 0) {
        for (double &m : mean) {
            m /= n;
        }
    }
    return mean;
}

Eigen::VectorXd default_output_bias() {
    Eigen::VectorXd bias = Eigen::VectorXd::Zero(4);
    bias[3] = std::exp(-3.0);
    return bias;
}

AppearanceModel AppearanceModel::create(int image_count, const Aabb &aabb, std::uint64_t seed,
                                        const HashGridConfig &grid_config) {
    AppearanceModel model;
    model.aabb = aabb;
    HashGridConfig cfg = grid_config;
    cfg.seed = hash_key(seed, 0x6A5Dull);
    model.grid = HashGrid(cfg);
    model.mlp = Mlp(3 + model.grid.output_dim() + kEmbeddingDim, 64, 4);
    model.mlp.initialize(seed, default_output_bias());
    model.embeddings.assign(std::size_t(std::max(0, image_count)) * kEmbeddingDim, 0.0);
    return model;
}

double concrete_uniform(std::uint64_t noise_key, std::uint32_t index) {
    return uniform_open(hash_key(noise_key, 0xC0C0ull, index));
}

ConditioningResult condition_scene(const GaussianCloud &cloud, const AppearanceModel &model, int image,
                                   const Camera &cam, const ConditionOptions &options,
                                   std::span<const std::uint32_t> subset) {
    return condition_scene(cloud, model, model.embedding(image), cam, options, subset);
}

ConditioningResult condition_scene(const GaussianCloud &cloud, const AppearanceModel &model,
                                   std::span<const double> embedding, const Camera &cam,
                                   const ConditionOptions &options, std::span<const std::uint32_t> subset) {
    const bool need_mlp = uses_mlp(options.variant);
    if (need_mlp && embedding.size() != kEmbeddingDim) {
        throw DimensionMismatch("embedding must have 24 entries");
    }
    const int degree = std::min(options.sh_degree, cloud.sh_degree);

    ConditioningResult r;
    if (subset.empty()) {
        r.indices.resize(cloud.size());
        std::iota(r.indices.begin(), r.indices.end(), 0u);
    } else {
        r.indices.assign(subset.begin(), subset.end());
    }
    const std::size_t n = r.indices.size();
    r.base_colors.resize(n);
    r.colors.resize(n);
    r.delta_alpha_loc.assign(n, 0.0);
    r.delta_alpha_sampled.assign(n, 0.0);
    r.effective_opacity.resize(n);
    r.uniforms.assign(n, kEvalUniform);
    r.view_dirs.resize(n);
    r.view_dist.resize(n);
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    if (need_mlp) {
        r.mlp_caches.resize(chunks);
        r.mlp_outputs.resize(chunks);
    }

    const Eigen::Vector3d eye = cam.center();
    const int enc_dim = model.grid.output_dim();
    const int emb_offset = kEncodingOffset + enc_dim;

    parallel_for(chunks, [&](std::size_t chunk) {
        const std::size_t begin = chunk * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (std::size_t j = begin; j < end; ++j) {
            const std::uint32_t g = r.indices[j];
            const Eigen::Vector3d diff = cloud.center(g) - eye;
            r.view_dist[j] = diff.norm();
            r.view_dirs[j] = diff / r.view_dist[j];
            r.base_colors[j] = evaluate_sh(cloud.sh_block(g), r.view_dirs[j], degree);
        }
        if (!need_mlp) {
            for (std::size_t j = begin; j < end; ++j) {
                r.colors[j] = r.base_colors[j];
                r.effective_opacity[j] = cloud.opacity(r.indices[j]);
            }
            return;
        }
        Eigen::MatrixXd input(model.mlp.in_dim(), Eigen::Index(end - begin));
        for (std::size_t j = begin; j < end; ++j) {
            const auto col = Eigen::Index(j - begin);
            input.block<3, 1>(kColorOffset, col) = r.base_colors[j];
            model.grid.encode(cloud.center(r.indices[j]), model.aabb, input.col(col).data() + kEncodingOffset);
            for (int k = 0; k < kEmbeddingDim; ++k) {
                input(emb_offset + k, col) = embedding[k];
            }
        }
        Eigen::MatrixXd out = model.mlp.forward(input, &r.mlp_caches[chunk]);
        for (std::size_t j = begin; j < end; ++j) {
            const auto col = Eigen::Index(j - begin);
            const std::uint32_t g = r.indices[j];
            if (uses_appearance(options.variant)) {
                r.colors[j] = Eigen::Vector3d(sigmoid(out(0, col)), sigmoid(out(1, col)), sigmoid(out(2, col)));
            } else {
                r.colors[j] = r.base_colors[j];
            }
            r.delta_alpha_loc[j] = out(3, col);
            if (uses_transient(options.variant)) {
                const double u =
                    options.sample == SampleMode::Train ? concrete_uniform(options.noise_key, g) : kEvalUniform;
                r.uniforms[j] = u;
                r.delta_alpha_sampled[j] = sample_concrete(out(3, col), model.temperature, u);
            }
            r.effective_opacity[j] = effective_opacity(cloud.opacity(g), r.delta_alpha_sampled[j]);
        }
        r.mlp_outputs[chunk] = std::move(out);
    });
    return r;
}

void ConditioningGrads::reset(const GaussianCloud &cloud, const AppearanceModel &model) {
    d_sh.assign(cloud.sh.size(), 0.0);
    d_opacity_logits.assign(cloud.size(), 0.0);
    d_centers.assign(cloud.centers.size(), 0.0);
    d_mlp.assign(model.mlp.param_count(), 0.0);
    d_hash.clear();
    d_embedding.assign(kEmbeddingDim, 0.0);
}

void condition_scene_backward(const GaussianCloud &cloud, const AppearanceModel &model,
                              std::span<const double> embedding, const Camera &cam, const ConditionOptions &options,
                              const ConditioningResult &r, std::span<const Eigen::Vector3d> d_colors,
                              std::span<const double> d_eff, ConditioningGrads &grads) {
    const std::size_t n = r.indices.size();
    if (d_colors.size() != n || d_eff.size() != n) {
        throw DimensionMismatch("conditioning gradients are not aligned with the result");
    }
    if (grads.d_sh.size() != cloud.sh.size() || grads.d_mlp.size() != model.mlp.param_count()) {
        grads.reset(cloud, model);
    }
    (void)embedding;
    (void)cam;
    const int degree = std::min(options.sh_degree, cloud.sh_degree);
    const bool need_mlp = uses_mlp(options.variant);
    const int enc_dim = model.grid.output_dim();
    const int emb_offset = kEncodingOffset + enc_dim;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;

    struct ChunkPartial {
        std::vector<double> d_mlp;
        HashGradient d_hash;
        Eigen::VectorXd d_embedding;
    };
    std::vector<ChunkPartial> partials(need_mlp ? chunks : 0);

    // Per-Gaussian writes (SH, opacity, centers) touch disjoint slots.
    parallel_for(chunks, [&](std::size_t chunk) {
        const std::size_t begin = chunk * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        std::vector<Eigen::Vector3d> d_base(end - begin, Eigen::Vector3d::Zero());

        // Effective opacity = max(alpha - sampled, 0).
        std::vector<double> d_sampled(end - begin, 0.0);
        for (std::size_t j = begin; j < end; ++j) {
            const std::uint32_t g = r.indices[j];
            const double alpha = cloud.opacity(g);
            if (alpha - r.delta_alpha_sampled[j] > 0.0) {
                grads.d_opacity_logits[g] += d_eff[j] * alpha * (1.0 - alpha);
                d_sampled[j - begin] = -d_eff[j];
            }
        }

        if (need_mlp) {
            const auto cols = Eigen::Index(end - begin);
            const Eigen::MatrixXd &out = r.mlp_outputs[chunk];
            Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(model.mlp.out_dim(), cols);
            for (std::size_t j = begin; j < end; ++j) {
                const auto col = Eigen::Index(j - begin);
                if (uses_appearance(options.variant)) {
                    for (int c = 0; c < 3; ++c) {
                        const double s = r.colors[j][c];
                        d_out(c, col) = d_colors[j][c] * s * (1.0 - s);
                    }
                } else {
                    d_base[j - begin] += d_colors[j];
                }
                if (uses_transient(options.variant)) {
                    d_out(3, col) = d_sampled[j - begin] *
                                    sample_concrete_grad(out(3, col), model.temperature, r.uniforms[j]);
                }
            }
            ChunkPartial &part = partials[chunk];
            part.d_mlp.assign(model.mlp.param_count(), 0.0);
            const Eigen::MatrixXd d_in = model.mlp.backward(r.mlp_caches[chunk], d_out, part.d_mlp.data());
            part.d_embedding = d_in.middleRows(emb_offset, kEmbeddingDim).rowwise().sum();
            for (std::size_t j = begin; j < end; ++j) {
                const auto col = Eigen::Index(j - begin);
                const std::uint32_t g = r.indices[j];
                d_base[j - begin] += d_in.block<3, 1>(kColorOffset, col);
                const Eigen::Vector3d d_x = model.grid.encode_backward(
                    cloud.center(g), model.aabb, d_in.col(col).data() + kEncodingOffset, part.d_hash);
                Eigen::Map<Eigen::Vector3d>(&grads.d_centers[3 * g]) += d_x;
            }
        } else {
            for (std::size_t j = begin; j < end; ++j) {
                d_base[j - begin] += d_colors[j];
            }
        }

        for (std::size_t j = begin; j < end; ++j) {
            const std::uint32_t g = r.indices[j];
            const Eigen::Vector3d &dir = r.view_dirs[j];
            const Eigen::Vector3d d_dir = evaluate_sh_backward(cloud.sh_block(g), dir, degree, d_base[j - begin],
                                                               &grads.d_sh[g * cloud.sh_stride()]);
            // dir = (x - eye) / |x - eye|
            const Eigen::Vector3d d_x = (d_dir - dir * dir.dot(d_dir)) / r.view_dist[j];
            Eigen::Map<Eigen::Vector3d>(&grads.d_centers[3 * g]) += d_x;
        }
    });
    (void)enc_dim;

    for (const ChunkPartial &part : partials) {
        for (std::size_t k = 0; k < part.d_mlp.size(); ++k) {
            grads.d_mlp[k] += part.d_mlp[k];
        }
        grads.d_hash.merge(part.d_hash);
        for (int k = 0; k < kEmbeddingDim; ++k) {
            grads.d_embedding[k] += part.d_embedding[k];
        }
    }
}

} // namespace swag

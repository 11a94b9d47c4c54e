#pragma once

#include "swag/camera.hpp"
#include "swag/hash_grid.hpp"
#include "swag/mlp.hpp"
#include "swag/scene_model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swag {

/// Which parts of the in-the-wild model are active.
enum class Variant {
    Swag,  // appearance MLP colors + transient opacity
    SwagA, // appearance only (opacity variation forced to 0)
    SwagT, // transient only (SH colors used directly)
    Plain, // neither: vanilla Gaussian splatting
};

inline bool uses_appearance(Variant v) { return v == Variant::Swag || v == Variant::SwagA; }
inline bool uses_transient(Variant v) { return v == Variant::Swag || v == Variant::SwagT; }
inline bool uses_mlp(Variant v) { return v != Variant::Plain; }

std::string variant_name(Variant v);
Variant parse_variant(const std::string &name);

enum class SampleMode { Train, Eval };

constexpr int kEmbeddingDim = 24;
constexpr double kDefaultTemperature = 0.1;
constexpr double kEvalUniform = 0.5;

/// Per-image embeddings, the hash grid over Gaussian centers and the MLP
/// mapping (color, emb(x), l_I) to (image color, opacity-variation location).
struct AppearanceModel {
    Aabb aabb;
    HashGrid grid;
    Mlp mlp;
    std::vector<double> embeddings; // image_count x kEmbeddingDim
    double temperature = kDefaultTemperature;

    int image_count() const { return int(embeddings.size() / kEmbeddingDim); }
    std::span<const double> embedding(int image) const;
    std::span<double> embedding(int image);
    std::vector<double> mean_embedding() const;

    static AppearanceModel create(int image_count, const Aabb &aabb, std::uint64_t seed,
                                  const HashGridConfig &grid_config = {});
};

// (1 - t) a + t b, returning a or b exactly at t = 0 and t = 1.
std::vector<double> interpolate_embedding(std::span<const double> a, std::span<const double> b, double t);

// MLP output bias: gray colors and a small opacity-variation location.
Eigen::VectorXd default_output_bias();

struct ConditionOptions {
    Variant variant = Variant::Swag;
    SampleMode sample = SampleMode::Eval;
    std::uint64_t noise_key = 0; // keys the per-Gaussian uniform draws in train mode
    int sh_degree = kMaxShDegree;
};

/// Uniform draw used for Gaussian `index` under `noise_key`.
double concrete_uniform(std::uint64_t noise_key, std::uint32_t index);

/// Per-Gaussian conditioning for one image. Entries are aligned with
/// `indices` (the Gaussians that were conditioned).
struct ConditioningResult {
    std::vector<std::uint32_t> indices;
    std::vector<Eigen::Vector3d> base_colors;
    std::vector<Eigen::Vector3d> colors;
    std::vector<double> delta_alpha_loc;
    std::vector<double> delta_alpha_sampled;
    std::vector<double> effective_opacity;
    std::vector<double> uniforms;

    // Backward caches.
    std::vector<Eigen::Vector3d> view_dirs;
    std::vector<double> view_dist;
    std::vector<Mlp::Cache> mlp_caches;
    std::vector<Eigen::MatrixXd> mlp_outputs;
};

ConditioningResult condition_scene(const GaussianCloud &cloud, const AppearanceModel &model,
                                   std::span<const double> embedding, const Camera &cam,
                                   const ConditionOptions &options, std::span<const std::uint32_t> subset = {});

/// Same as above using the learned embedding of training image `image`;
/// throws UnknownImage for an out-of-range index.
ConditioningResult condition_scene(const GaussianCloud &cloud, const AppearanceModel &model, int image,
                                   const Camera &cam, const ConditionOptions &options,
                                   std::span<const std::uint32_t> subset = {});

struct ConditioningGrads {
    std::vector<double> d_sh;             // like GaussianCloud::sh
    std::vector<double> d_opacity_logits; // per Gaussian
    std::vector<double> d_centers;        // per Gaussian x 3
    std::vector<double> d_mlp;            // like Mlp::params()
    HashGradient d_hash;
    std::vector<double> d_embedding; // kEmbeddingDim

    void reset(const GaussianCloud &cloud, const AppearanceModel &model);
};

/// Accumulates gradients of the conditioning given dL/d(color) and
/// dL/d(effective opacity) per conditioned Gaussian.
void condition_scene_backward(const GaussianCloud &cloud, const AppearanceModel &model,
                              std::span<const double> embedding, const Camera &cam, const ConditionOptions &options,
                              const ConditioningResult &result, std::span<const Eigen::Vector3d> d_colors,
                              std::span<const double> d_effective_opacity, ConditioningGrads &grads);

} // namespace swag

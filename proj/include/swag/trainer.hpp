#pragma once

#include "swag/data_io.hpp"
#include "swag/metrics.hpp"
#include "swag/optimizer.hpp"
#include "swag/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace swag {

struct TrainConfig {
    Variant variant = Variant::Swag;
    int iterations = 3000;
    int densify_start = 100;
    int densify_interval = 200;
    int densify_end = 1500;
    int opacity_reset_interval = 0; // 0 disables
    int sh_degree = 2;
    int sh_increase_interval = 1000;

    double lr_position_init = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_sh = 2.5e-3;
    double lr_sh_rest = 2.5e-3 / 20.0;
    double lr_opacity = 5e-2;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_embedding = 2.5e-3;
    double lr_hash = 2.5e-3;
    double lr_mlp = 2.5e-3;
    double eps_gaussian = 1e-15;
    double eps_network = 1e-8;

    double ssim_weight = kDefaultSsimWeight;
    double prune_opacity = 0.005;
    double densify_grad = 2e-4;
    double split_divisor = 1.6;
    double clone_extent_fraction = 0.01;
    int max_gaussians = 50000;
    double initial_opacity = 0.1;
    double temperature = kDefaultTemperature;

    int downscale = 1;
    std::uint64_t seed = 0;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();

    int fit_iterations = 200;
    double lr_fit = 2.5e-3;

    /// Desk-scale schedule: densify every 200 steps until half the run.
    static TrainConfig desk(int iterations = 3000);
    /// Full-scale schedule of the original method.
    static TrainConfig full();

    // Throws std::invalid_argument on inconsistent settings.
    void validate() const;

    std::string to_json() const;
    // Fields missing from `text` keep their value in `base`.
    static TrainConfig from_json(const std::string &text, const TrainConfig &base);
    static TrainConfig from_json(const std::string &text) { return from_json(text, TrainConfig{}); }
};

struct TrainState {
    TrainConfig config;
    Scene scene;
    std::int64_t iteration = 0;
    double scene_extent = 1.0;

    // Adam moments; the clouds mirror the layout of scene.cloud.
    GaussianCloud m, v;
    std::vector<double> mlp_m, mlp_v;
    std::vector<double> emb_m, emb_v;
    SparseAdamState hash_adam;

    // Densification statistics.
    std::vector<double> grad_accum;
    std::vector<double> grad_count;
};

struct StepStats {
    std::int64_t iteration = 0;
    int image = 0;
    double loss = 0.0;
    double psnr = 0.0;
    std::size_t gaussians = 0;
};

/// Gaussians from the dataset points, isotropic scales from the mean distance
/// to the 3 nearest neighbours, fresh appearance model and optimizer state.
/// Throws EmptyDataset or BadInitialization.
TrainState initialize_state(const TrainConfig &config, const Dataset &data);

// Training image used at 1-based iteration `it`: a fresh permutation per epoch.
int image_for_iteration(std::uint64_t seed, std::int64_t it, int train_count);

double position_lr(const TrainConfig &config, std::int64_t it, double extent);

/// One optimization step on training image `k` (index into data.train).
StepStats train_step(TrainState &state, const Dataset &data, int k);

/// Next scheduled step, including densification and SH degree increases.
StepStats train_step(TrainState &state, const Dataset &data);

struct DensifyStats {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

DensifyStats densify_and_prune(TrainState &state);

using StepCallback = std::function<void(const StepStats &)>;

/// Runs scheduled steps until `state.iteration == state.config.iterations`.
void train(TrainState &state, const Dataset &data, const StepCallback &callback = {});

TrainState train(const TrainConfig &config, const Dataset &data, const StepCallback &callback = {});

/**
 * Fits an embedding for an unseen image from its left part only. `left` is
 * the target restricted to columns [0, split_column(cam.width)); the right
 * half is never passed in. Starts from the mean training embedding.
 */
std::vector<double> fit_test_embedding(const Scene &scene, const Camera &cam, const Image &left, int iterations,
                                       double lr);

/// Loss on columns [0, left.width) of `render` with the gradient scattered
/// back to full width; columns to the right get exactly zero gradient.
LossResult left_columns_loss(const Image &render, const Image &left, double ssim_weight);

void save_checkpoint(const std::filesystem::path &path, const TrainState &state);
TrainState load_checkpoint(const std::filesystem::path &path);

} // namespace swag

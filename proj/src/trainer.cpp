#include "swag/trainer.hpp"
#include "swag/errors.hpp"
#include "swag/random.hpp"

#include "binary_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace swag {

using nlohmann::json;

namespace {

constexpr double kShC0 = 0.28209479177387814;

void push_zero(GaussianCloud &c) {
    c.centers.insert(c.centers.end(), 3, 0.0);
    c.log_scales.insert(c.log_scales.end(), 3, 0.0);
    c.rotations.insert(c.rotations.end(), 4, 0.0);
    c.opacity_logits.push_back(0.0);
    c.sh.insert(c.sh.end(), c.sh_stride(), 0.0);
}

GaussianCloud zero_like(const GaussianCloud &c) {
    GaussianCloud z;
    z.sh_degree = c.sh_degree;
    z.centers.assign(c.centers.size(), 0.0);
    z.log_scales.assign(c.log_scales.size(), 0.0);
    z.rotations.assign(c.rotations.size(), 0.0);
    z.opacity_logits.assign(c.opacity_logits.size(), 0.0);
    z.sh.assign(c.sh.size(), 0.0);
    return z;
}

// Mean distance from each point to its k nearest neighbours, via a uniform grid.
std::vector<double> knn_mean_distance(const std::vector<Eigen::Vector3d> &pts, int k) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) {
        return out;
    }
    const int want = std::min<int>(k, int(n) - 1);
    Eigen::Vector3d lo = pts[0], hi = pts[0];
    for (const auto &p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Eigen::Vector3d ext = (hi - lo).cwiseMax(1e-9);
    const double cell = std::max(1e-9, std::cbrt(ext.prod() / double(n)) * 1.5);
    auto cell_of = [&](const Eigen::Vector3d &p) {
        return Eigen::Vector3i(int(std::floor((p.x() - lo.x()) / cell)), int(std::floor((p.y() - lo.y()) / cell)),
                               int(std::floor((p.z() - lo.z()) / cell)));
    };
    auto key_of = [](const Eigen::Vector3i &c) {
        return (std::int64_t(c.x()) * 73856093) ^ (std::int64_t(c.y()) * 19349663) ^ (std::int64_t(c.z()) * 83492791);
    };
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> grid;
    for (std::size_t i = 0; i < n; ++i) {
        grid[key_of(cell_of(pts[i]))].push_back(std::uint32_t(i));
    }
    const Eigen::Vector3i max_cell = cell_of(hi);
    const int max_ring = max_cell.maxCoeff() + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3i c = cell_of(pts[i]);
        std::vector<double> best; // sorted ascending, at most `want`
        for (int r = 0; r <= max_ring; ++r) {
            for (int dx = -r; dx <= r; ++dx) {
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dz = -r; dz <= r; ++dz) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) {
                            continue;
                        }
                        const Eigen::Vector3i q = c + Eigen::Vector3i(dx, dy, dz);
                        auto it = grid.find(key_of(q));
                        if (it == grid.end()) {
                            continue;
                        }
                        for (std::uint32_t j : it->second) {
                            if (j == i || cell_of(pts[j]) != q) {
                                continue;
                            }
                            const double d = (pts[j] - pts[i]).norm();
                            if (int(best.size()) < want || d < best.back()) {
                                best.insert(std::upper_bound(best.begin(), best.end(), d), d);
                                if (int(best.size()) > want) {
                                    best.pop_back();
                                }
                            }
                        }
                    }
                }
            }
            // Anything outside ring r is at least r * cell away.
            if (int(best.size()) == want && best.back() <= r * cell) {
                break;
            }
        }
        out[i] = std::accumulate(best.begin(), best.end(), 0.0) / double(std::max<std::size_t>(1, best.size()));
    }
    return out;
}

double camera_extent(const std::vector<Camera> &cams, const Aabb &aabb) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto &c : cams) {
        mean += c.center();
    }
    mean /= double(cams.size());
    double radius = 0.0;
    for (const auto &c : cams) {
        radius = std::max(radius, (c.center() - mean).norm());
    }
    if (radius < 1e-9) {
        radius = 0.5 * aabb.extent().norm();
    }
    return 1.1 * radius;
}

void check_finite(const std::vector<double> &v, const char *what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite gradient in ") + what);
        }
    }
}

// Adam over a Gaussian SH array with separate rates for the DC and higher coefficients.
void adam_sh(std::vector<double> &p, const std::vector<double> &g, std::vector<double> &m, std::vector<double> &v,
             std::size_t stride, double lr_dc, double lr_rest, std::int64_t step, const AdamParams &adam) {
    const std::size_t n = stride == 0 ? 0 : p.size() / stride;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t o = i * stride;
        adam_update(std::span(p).subspan(o, 3), std::span(g).subspan(o, 3), std::span(m).subspan(o, 3),
                    std::span(v).subspan(o, 3), lr_dc, step, adam);
        if (stride > 3) {
            adam_update(std::span(p).subspan(o + 3, stride - 3), std::span(g).subspan(o + 3, stride - 3),
                        std::span(m).subspan(o + 3, stride - 3), std::span(v).subspan(o + 3, stride - 3), lr_rest,
                        step, adam);
        }
    }
}

} // namespace

TrainConfig TrainConfig::desk(int iterations) {
    TrainConfig c;
    c.iterations = iterations;
    c.densify_interval = 200;
    c.densify_start = std::min(100, iterations);
    c.densify_end = iterations / 2;
    c.opacity_reset_interval = 0;
    c.sh_degree = 2;
    c.max_gaussians = 50000;
    return c;
}

TrainConfig TrainConfig::full() {
    TrainConfig c;
    c.iterations = 60000;
    c.densify_interval = 2000;
    c.densify_start = 500;
    c.densify_end = 30000;
    c.opacity_reset_interval = 3000;
    c.sh_degree = 3;
    c.max_gaussians = 6000000;
    return c;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string &msg) { throw std::invalid_argument("invalid training config: " + msg); };
    if (iterations < 0) {
        fail("iterations must be >= 0");
    }
    if (densify_end > iterations) {
        fail("densify_end must not exceed iterations");
    }
    if (densify_interval < 1 || sh_increase_interval < 1) {
        fail("intervals must be positive");
    }
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        fail("sh_degree must be in [0, 3]");
    }
    for (double lr : {lr_position_init, lr_position_final, lr_sh, lr_sh_rest, lr_opacity, lr_scale, lr_rotation,
                      lr_embedding, lr_hash, lr_mlp, lr_fit}) {
        if (!(lr > 0)) {
            fail("learning rates must be positive");
        }
    }
    if (!(temperature > 0)) {
        fail("temperature must be positive");
    }
    if (ssim_weight < 0 || ssim_weight > 1) {
        fail("ssim_weight must be in [0, 1]");
    }
    if (downscale < 1 || max_gaussians < 1 || fit_iterations < 0) {
        fail("downscale, max_gaussians and fit_iterations out of range");
    }
}

std::string TrainConfig::to_json() const {
    json j;
    j["variant"] = variant_name(variant);
    j["iterations"] = iterations;
    j["densify_start"] = densify_start;
    j["densify_interval"] = densify_interval;
    j["densify_end"] = densify_end;
    j["opacity_reset_interval"] = opacity_reset_interval;
    j["sh_degree"] = sh_degree;
    j["sh_increase_interval"] = sh_increase_interval;
    j["lr_position_init"] = lr_position_init;
    j["lr_position_final"] = lr_position_final;
    j["lr_sh"] = lr_sh;
    j["lr_sh_rest"] = lr_sh_rest;
    j["lr_opacity"] = lr_opacity;
    j["lr_scale"] = lr_scale;
    j["lr_rotation"] = lr_rotation;
    j["lr_embedding"] = lr_embedding;
    j["lr_hash"] = lr_hash;
    j["lr_mlp"] = lr_mlp;
    j["eps_gaussian"] = eps_gaussian;
    j["eps_network"] = eps_network;
    j["ssim_weight"] = ssim_weight;
    j["prune_opacity"] = prune_opacity;
    j["densify_grad"] = densify_grad;
    j["split_divisor"] = split_divisor;
    j["clone_extent_fraction"] = clone_extent_fraction;
    j["max_gaussians"] = max_gaussians;
    j["initial_opacity"] = initial_opacity;
    j["temperature"] = temperature;
    j["downscale"] = downscale;
    j["seed"] = seed;
    j["background"] = {background.x(), background.y(), background.z()};
    j["fit_iterations"] = fit_iterations;
    j["lr_fit"] = lr_fit;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string &text, const TrainConfig &base) {
    TrainConfig c = base;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    try {
        auto get = [&](const char *key, auto &field) {
            if (j.contains(key)) {
                j.at(key).get_to(field);
            }
        };
        if (j.contains("variant")) {
            c.variant = parse_variant(j.at("variant").get<std::string>());
        }
        get("iterations", c.iterations);
        get("densify_start", c.densify_start);
        get("densify_interval", c.densify_interval);
        get("densify_end", c.densify_end);
        get("opacity_reset_interval", c.opacity_reset_interval);
        get("sh_degree", c.sh_degree);
        get("sh_increase_interval", c.sh_increase_interval);
        get("lr_position_init", c.lr_position_init);
        get("lr_position_final", c.lr_position_final);
        get("lr_sh", c.lr_sh);
        get("lr_sh_rest", c.lr_sh_rest);
        get("lr_opacity", c.lr_opacity);
        get("lr_scale", c.lr_scale);
        get("lr_rotation", c.lr_rotation);
        get("lr_embedding", c.lr_embedding);
        get("lr_hash", c.lr_hash);
        get("lr_mlp", c.lr_mlp);
        get("eps_gaussian", c.eps_gaussian);
        get("eps_network", c.eps_network);
        get("ssim_weight", c.ssim_weight);
        get("prune_opacity", c.prune_opacity);
        get("densify_grad", c.densify_grad);
        get("split_divisor", c.split_divisor);
        get("clone_extent_fraction", c.clone_extent_fraction);
        get("max_gaussians", c.max_gaussians);
        get("initial_opacity", c.initial_opacity);
        get("temperature", c.temperature);
        get("downscale", c.downscale);
        get("seed", c.seed);
        if (j.contains("background")) {
            const auto b = j.at("background").get<std::vector<double>>();
            if (b.size() != 3) {
                throw std::invalid_argument("background must have 3 entries");
            }
            c.background = Eigen::Vector3d(b[0], b[1], b[2]);
        }
        get("fit_iterations", c.fit_iterations);
        get("lr_fit", c.lr_fit);
    } catch (const json::exception &e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
    return c;
}

TrainState initialize_state(const TrainConfig &config, const Dataset &data) {
    config.validate();
    if (data.train.empty()) {
        throw EmptyDataset("dataset has no training images");
    }
    if (data.points.empty()) {
        throw BadInitialization("dataset has no initialization points");
    }
    for (const auto &p : data.points) {
        if (!p.allFinite()) {
            throw BadInitialization("initialization point is not finite");
        }
    }

    TrainState state;
    state.config = config;
    Scene &sc = state.scene;
    sc.variant = config.variant;
    sc.background = config.background;
    sc.sh_degree = 0;
    for (int k = 0; k < int(data.train.size()); ++k) {
        sc.cameras.push_back(data.train_image(k).camera);
        sc.image_names.push_back(data.train_image(k).name);
    }

    const std::size_t n = data.points.size();
    GaussianCloud &cloud = sc.cloud;
    cloud.sh_degree = config.sh_degree;
    cloud.resize(n);
    const std::vector<double> dist = knn_mean_distance(data.points, 3);
    const double fallback = 0.01 * std::max(1e-6, data.aabb.extent().norm());
    for (std::size_t i = 0; i < n; ++i) {
        cloud.center(i) = data.points[i];
        const double d = dist[i] > 1e-7 ? dist[i] : fallback;
        cloud.log_scale(i).setConstant(std::log(d));
        cloud.rotation(i) = Eigen::Vector4d(1, 0, 0, 0);
        cloud.opacity_logits[i] = logit(config.initial_opacity);
        const Eigen::Vector3d col =
            i < data.point_colors.size() ? data.point_colors[i] : Eigen::Vector3d::Constant(0.5);
        for (int c = 0; c < 3; ++c) {
            cloud.sh_block(i)[c] = (col[c] - 0.5) / kShC0;
        }
    }

    const Aabb aabb = data.aabb.valid() ? data.aabb : bounding_box(data.points);
    sc.model = AppearanceModel::create(int(data.train.size()), aabb, config.seed);
    sc.model.temperature = config.temperature;

    state.scene_extent = camera_extent(sc.cameras, aabb);
    state.m = zero_like(cloud);
    state.v = zero_like(cloud);
    state.mlp_m.assign(sc.model.mlp.param_count(), 0.0);
    state.mlp_v = state.mlp_m;
    state.emb_m.assign(sc.model.embeddings.size(), 0.0);
    state.emb_v = state.emb_m;
    state.grad_accum.assign(n, 0.0);
    state.grad_count.assign(n, 0.0);
    return state;
}

int image_for_iteration(std::uint64_t seed, std::int64_t it, int train_count) {
    if (train_count <= 0) {
        throw EmptyDataset("no training images");
    }
    const std::uint64_t epoch = std::uint64_t(it - 1) / std::uint64_t(train_count);
    const int pos = int(std::uint64_t(it - 1) % std::uint64_t(train_count));
    std::vector<std::pair<std::uint64_t, int>> order(train_count);
    for (int i = 0; i < train_count; ++i) {
        order[i] = {hash_key(seed, 0xE90Cull, epoch, std::uint64_t(i)), i};
    }
    std::sort(order.begin(), order.end());
    return order[pos].second;
}

double position_lr(const TrainConfig &config, std::int64_t it, double extent) {
    const double t = config.iterations > 0 ? std::clamp(double(it) / config.iterations, 0.0, 1.0) : 1.0;
    return extent * std::exp((1.0 - t) * std::log(config.lr_position_init) + t * std::log(config.lr_position_final));
}

StepStats train_step(TrainState &state, const Dataset &data, int k) {
    const TrainConfig &cfg = state.config;
    Scene &sc = state.scene;
    if (k < 0 || k >= int(sc.cameras.size())) {
        throw UnknownImage("training image index " + std::to_string(k) + " out of range");
    }
    const ImageRecord &rec = data.train_image(k);
    const std::int64_t it = state.iteration + 1;

    const RenderOptions opts = sc.render_options(SampleMode::Train, hash_key(cfg.seed, 0x7A1Eull, std::uint64_t(it)));
    const RenderContext ctx = render(sc.cloud, sc.model, sc.model.embedding(k), sc.cameras[k], opts);
    const LossResult loss = photometric_loss(ctx.output.color, rec.image, cfg.ssim_weight);
    if (!std::isfinite(loss.value)) {
        throw NumericError("loss is not finite at iteration " + std::to_string(it));
    }
    ParamGrads g;
    render_backward(sc.cloud, sc.model, sc.cameras[k], ctx, loss.grad, g);
    check_finite(g.d_centers, "centers");
    check_finite(g.d_log_scales, "scales");
    check_finite(g.d_rotations, "rotations");
    check_finite(g.d_opacity_logits, "opacities");
    check_finite(g.d_sh, "colors");
    check_finite(g.d_mlp, "network");

    const AdamParams ga{0.9, 0.999, cfg.eps_gaussian};
    const AdamParams na{0.9, 0.999, cfg.eps_network};
    GaussianCloud &c = sc.cloud;
    adam_update(c.centers, g.d_centers, state.m.centers, state.v.centers, position_lr(cfg, it, state.scene_extent),
                it, ga);
    adam_update(c.log_scales, g.d_log_scales, state.m.log_scales, state.v.log_scales, cfg.lr_scale, it, ga);
    adam_update(c.rotations, g.d_rotations, state.m.rotations, state.v.rotations, cfg.lr_rotation, it, ga);
    adam_update(c.opacity_logits, g.d_opacity_logits, state.m.opacity_logits, state.v.opacity_logits,
                cfg.lr_opacity, it, ga);
    adam_sh(c.sh, g.d_sh, state.m.sh, state.v.sh, c.sh_stride(), cfg.lr_sh, cfg.lr_sh_rest, it, ga);
    c.normalize_rotations();

    if (uses_mlp(sc.variant)) {
        adam_update(sc.model.mlp.params(), g.d_mlp, state.mlp_m, state.mlp_v, cfg.lr_mlp, it, na);
        std::vector<double> d_emb(sc.model.embeddings.size(), 0.0);
        std::copy(g.d_embedding.begin(), g.d_embedding.end(), d_emb.begin() + std::ptrdiff_t(k) * kEmbeddingDim);
        adam_update(sc.model.embeddings, d_emb, state.emb_m, state.emb_v, cfg.lr_embedding, it, na);
        sparse_adam_update(sc.model.grid, g.d_hash, state.hash_adam, cfg.lr_hash, it, na);
    }

    for (std::size_t i = 0; i < c.size(); ++i) {
        if (g.visible[i]) {
            state.grad_accum[i] += g.mean2d_grad_norm[i];
            state.grad_count[i] += 1.0;
        }
    }
    state.iteration = it;

    StepStats stats;
    stats.iteration = it;
    stats.image = k;
    stats.loss = loss.value;
    stats.psnr = psnr(ctx.output.color, rec.image);
    stats.gaussians = c.size();
    return stats;
}

StepStats train_step(TrainState &state, const Dataset &data) {
    const TrainConfig &cfg = state.config;
    const std::int64_t it = state.iteration + 1;
    const int k = image_for_iteration(cfg.seed, it, int(state.scene.cameras.size()));
    StepStats stats = train_step(state, data, k);
    if (it >= cfg.densify_start && it < cfg.densify_end && it % cfg.densify_interval == 0) {
        densify_and_prune(state);
        stats.gaussians = state.scene.cloud.size();
    }
    if (cfg.opacity_reset_interval > 0 && it < cfg.densify_end && it % cfg.opacity_reset_interval == 0) {
        const double cap = logit(0.01);
        for (std::size_t i = 0; i < state.scene.cloud.size(); ++i) {
            double &o = state.scene.cloud.opacity_logits[i];
            o = std::min(o, cap);
            state.m.opacity_logits[i] = 0.0;
            state.v.opacity_logits[i] = 0.0;
        }
    }
    if (it % cfg.sh_increase_interval == 0 && state.scene.sh_degree < cfg.sh_degree) {
        ++state.scene.sh_degree;
    }
    return stats;
}

DensifyStats densify_and_prune(TrainState &state) {
    const TrainConfig &cfg = state.config;
    GaussianCloud &c = state.scene.cloud;
    const std::size_t n = c.size();
    const double size_limit = cfg.clone_extent_fraction * state.scene_extent;

    std::vector<bool> clone(n, false), split(n, false);
    std::size_t added = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = state.grad_count[i] > 0 ? state.grad_accum[i] / state.grad_count[i] : 0.0;
        if (mean <= cfg.densify_grad) {
            continue;
        }
        const double max_scale = std::exp(c.log_scale(i).maxCoeff());
        if (max_scale < size_limit) {
            clone[i] = true;
        } else {
            split[i] = true;
        }
        ++added;
    }
    DensifyStats stats;
    if (n + added > std::size_t(cfg.max_gaussians)) {
        std::fill(clone.begin(), clone.end(), false);
        std::fill(split.begin(), split.end(), false);
    }

    GaussianCloud nc, nm, nv;
    nc.sh_degree = nm.sh_degree = nv.sh_degree = c.sh_degree;
    for (std::size_t i = 0; i < n; ++i) {
        if (!split[i]) {
            nc.push_back_from(c, i);
            nm.push_back_from(state.m, i);
            nv.push_back_from(state.v, i);
        }
    }
    auto sample_offset = [&](std::size_t i, std::uint64_t child, const Eigen::Vector3d &scale) {
        CounterRng rng(hash_key(cfg.seed, 0xDE45ull, std::uint64_t(state.iteration), hash_key(i, child)));
        const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        return Eigen::Vector3d(quaternion_to_rotation(c.rotation(i)) * scale.cwiseProduct(z));
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (!clone[i]) {
            continue;
        }
        nc.push_back_from(c, i);
        nc.center(nc.size() - 1) += sample_offset(i, 0, c.log_scale(i).array().exp().matrix());
        push_zero(nm);
        push_zero(nv);
        ++stats.cloned;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!split[i]) {
            continue;
        }
        const Eigen::Vector3d scale = c.log_scale(i).array().exp().matrix();
        for (std::uint64_t child = 0; child < 2; ++child) {
            nc.push_back_from(c, i);
            const std::size_t j = nc.size() - 1;
            nc.center(j) += sample_offset(i, child + 1, scale);
            nc.log_scale(j) = (scale / cfg.split_divisor).array().log().matrix();
            push_zero(nm);
            push_zero(nv);
        }
        ++stats.split;
    }

    std::vector<bool> keep(nc.size(), true);
    std::size_t kept = 0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < nc.size(); ++i) {
        keep[i] = nc.opacity(i) >= cfg.prune_opacity;
        kept += keep[i];
        if (nc.opacity_logits[i] > nc.opacity_logits[best]) {
            best = i;
        }
    }
    if (kept == 0 && nc.size() > 0) {
        keep[best] = true;
        kept = 1;
    }
    stats.pruned = nc.size() - kept;
    nc.filter(keep);
    nm.filter(keep);
    nv.filter(keep);

    c = std::move(nc);
    state.m = std::move(nm);
    state.v = std::move(nv);
    state.grad_accum.assign(c.size(), 0.0);
    state.grad_count.assign(c.size(), 0.0);
    return stats;
}

void train(TrainState &state, const Dataset &data, const StepCallback &callback) {
    while (state.iteration < state.config.iterations) {
        const StepStats stats = train_step(state, data);
        if (callback) {
            callback(stats);
        }
    }
}

TrainState train(const TrainConfig &config, const Dataset &data, const StepCallback &callback) {
    TrainState state = initialize_state(config, data);
    train(state, data, callback);
    return state;
}

LossResult left_columns_loss(const Image &render, const Image &left, double ssim_weight) {
    if (left.height != render.height || left.width > render.width) {
        throw DimensionMismatch("left-half target does not fit the render");
    }
    const Image crop = crop_columns(render, 0, left.width);
    LossResult part = photometric_loss(crop, left, ssim_weight);
    Image full(render.width, render.height);
    for (int y = 0; y < left.height; ++y) {
        for (int x = 0; x < left.width; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                full.at(x, y, ch) = part.grad.at(x, y, ch);
            }
        }
    }
    part.grad = std::move(full);
    return part;
}

std::vector<double> fit_test_embedding(const Scene &scene, const Camera &cam, const Image &left, int iterations,
                                       double lr) {
    if (left.width != split_column(cam.width) || left.height != cam.height) {
        throw DimensionMismatch("left-half target must cover columns [0, ceil(W/2))");
    }
    std::vector<double> emb = scene.model.mean_embedding();
    if (!uses_mlp(scene.variant)) {
        return emb;
    }
    std::vector<double> m(kEmbeddingDim, 0.0), v(kEmbeddingDim, 0.0);
    const AdamParams adam{0.9, 0.999, 1e-8};
    const RenderOptions opts = scene.render_options(SampleMode::Eval);
    for (int it = 1; it <= iterations; ++it) {
        const RenderContext ctx = render(scene.cloud, scene.model, emb, cam, opts);
        const LossResult loss = left_columns_loss(ctx.output.color, left, kDefaultSsimWeight);
        ParamGrads g;
        render_backward(scene.cloud, scene.model, cam, ctx, loss.grad, g);
        check_finite(g.d_embedding, "embedding");
        adam_update(emb, g.d_embedding, m, v, lr, it, adam);
    }
    return emb;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'W', 'A', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

json camera_json(const Camera &c) {
    std::vector<double> w(c.world_to_camera.data(), c.world_to_camera.data() + 16);
    return {{"world_to_camera", w}, {"fx", c.fx},         {"fy", c.fy},         {"cx", c.cx},
            {"cy", c.cy},           {"width", c.width}, {"height", c.height}, {"z_near", c.z_near}};
}

Camera camera_from_json(const json &j) {
    Camera c;
    const auto w = j.at("world_to_camera").get<std::vector<double>>();
    if (w.size() != 16) {
        throw CorruptArray("camera matrix must have 16 entries");
    }
    std::copy(w.begin(), w.end(), c.world_to_camera.data());
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    c.width = j.at("width");
    c.height = j.at("height");
    c.z_near = j.at("z_near");
    return c;
}

void write_cloud(detail::BinaryWriter &w, const GaussianCloud &c) {
    w.array(c.centers);
    w.array(c.log_scales);
    w.array(c.rotations);
    w.array(c.opacity_logits);
    w.array(c.sh);
}

GaussianCloud read_cloud(detail::BinaryReader &r, std::size_t n, int degree, const std::string &what) {
    GaussianCloud c;
    c.sh_degree = degree;
    c.centers = r.array<double>(3 * n, what);
    c.log_scales = r.array<double>(3 * n, what);
    c.rotations = r.array<double>(4 * n, what);
    c.opacity_logits = r.array<double>(n, what);
    c.sh = r.array<double>(n * c.sh_stride(), what);
    return c;
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const TrainState &state) {
    const Scene &sc = state.scene;
    json meta;
    meta["config"] = json::parse(state.config.to_json());
    meta["iteration"] = state.iteration;
    meta["scene_extent"] = state.scene_extent;
    meta["gaussians"] = sc.cloud.size();
    meta["max_sh_degree"] = sc.cloud.sh_degree;
    meta["sh_degree"] = sc.sh_degree;
    meta["variant"] = variant_name(sc.variant);
    meta["background"] = {sc.background.x(), sc.background.y(), sc.background.z()};
    meta["temperature"] = sc.model.temperature;
    meta["aabb"] = {sc.model.aabb.min.x(), sc.model.aabb.min.y(), sc.model.aabb.min.z(),
                    sc.model.aabb.max.x(), sc.model.aabb.max.y(), sc.model.aabb.max.z()};
    const HashGridConfig &hc = sc.model.grid.config();
    meta["hash"] = {{"levels", hc.levels},         {"base_resolution", hc.base_resolution},
                    {"max_resolution", hc.max_resolution}, {"table_size", hc.table_size},
                    {"seed", hc.seed},             {"init_range", hc.init_range}};
    meta["mlp"] = {sc.model.mlp.in_dim(), sc.model.mlp.hidden_dim(), sc.model.mlp.out_dim()};
    meta["images"] = sc.image_names;
    json cams = json::array();
    for (const auto &c : sc.cameras) {
        cams.push_back(camera_json(c));
    }
    meta["cameras"] = cams;

    const std::vector<std::uint64_t> keys = sc.model.grid.written_keys();
    const std::vector<std::uint64_t> mkeys = state.hash_adam.active_keys();
    meta["hash_entries"] = keys.size();
    meta["hash_moments"] = mkeys.size();
    meta["variance"] = sc.transient_variance.size();

    const std::string text = meta.dump();
    detail::BinaryWriter w(path.string());
    w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.pod(kCheckpointVersion);
    w.pod(std::uint64_t(text.size()));
    w.bytes(text.data(), text.size());
    write_cloud(w, sc.cloud);
    write_cloud(w, state.m);
    write_cloud(w, state.v);
    w.array(sc.model.mlp.params());
    w.array(state.mlp_m);
    w.array(state.mlp_v);
    w.array(sc.model.embeddings);
    w.array(state.emb_m);
    w.array(state.emb_v);
    w.array(keys);
    for (std::uint64_t k : keys) {
        const HashFeature &f = sc.model.grid.feature(k);
        w.bytes(f.data(), sizeof(double) * kHashFeatures);
    }
    w.array(mkeys);
    for (std::uint64_t k : mkeys) {
        const HashMoments &mo = state.hash_adam.moments(k);
        w.bytes(mo.data(), sizeof(double) * mo.size());
    }
    w.array(state.grad_accum);
    w.array(state.grad_count);
    w.array(sc.transient_variance);
    w.finish();
}

TrainState load_checkpoint(const std::filesystem::path &path) {
    detail::BinaryReader r(path.string());
    char magic[8];
    r.bytes(magic, sizeof(magic), "header");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw CorruptArray(path.string() + ": not a checkpoint file");
    }
    const auto version = r.pod<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw VersionMismatch(path.string() + ": checkpoint version " + std::to_string(version) +
                              " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto len = r.pod<std::uint64_t>("manifest length");
    const std::string text = r.string(std::size_t(std::min<std::uint64_t>(len, r.remaining() + 1)), "manifest");
    TrainState state;
    try {
        const json meta = json::parse(text);
        state.config = TrainConfig::from_json(meta.at("config").dump());
        state.iteration = meta.at("iteration");
        state.scene_extent = meta.at("scene_extent");
        Scene &sc = state.scene;
        const std::size_t n = meta.at("gaussians");
        const int max_degree = meta.at("max_sh_degree");
        if (max_degree < 0 || max_degree > kMaxShDegree) {
            throw CorruptArray("bad SH degree");
        }
        sc.sh_degree = meta.at("sh_degree");
        sc.variant = parse_variant(meta.at("variant"));
        const auto bg = meta.at("background").get<std::vector<double>>();
        sc.background = Eigen::Vector3d(bg.at(0), bg.at(1), bg.at(2));
        const auto box = meta.at("aabb").get<std::vector<double>>();
        HashGridConfig hc;
        const json &h = meta.at("hash");
        hc.levels = h.at("levels");
        hc.base_resolution = h.at("base_resolution");
        hc.max_resolution = h.at("max_resolution");
        hc.table_size = h.at("table_size");
        hc.seed = h.at("seed");
        hc.init_range = h.at("init_range");
        const auto dims = meta.at("mlp").get<std::vector<int>>();
        sc.model.aabb.min = Eigen::Vector3d(box.at(0), box.at(1), box.at(2));
        sc.model.aabb.max = Eigen::Vector3d(box.at(3), box.at(4), box.at(5));
        sc.model.grid = HashGrid(hc);
        sc.model.mlp = Mlp(dims.at(0), dims.at(1), dims.at(2));
        sc.model.temperature = meta.at("temperature");
        sc.image_names = meta.at("images").get<std::vector<std::string>>();
        for (const auto &c : meta.at("cameras")) {
            sc.cameras.push_back(camera_from_json(c));
        }
        const std::size_t images = sc.cameras.size();

        sc.cloud = read_cloud(r, n, max_degree, "gaussians");
        state.m = read_cloud(r, n, max_degree, "moments");
        state.v = read_cloud(r, n, max_degree, "moments");
        sc.model.mlp.params() = r.array<double>(sc.model.mlp.param_count(), "network");
        state.mlp_m = r.array<double>(sc.model.mlp.param_count(), "network moments");
        state.mlp_v = r.array<double>(sc.model.mlp.param_count(), "network moments");
        sc.model.embeddings = r.array<double>(images * kEmbeddingDim, "embeddings");
        state.emb_m = r.array<double>(images * kEmbeddingDim, "embedding moments");
        state.emb_v = r.array<double>(images * kEmbeddingDim, "embedding moments");
        const std::size_t entries = meta.at("hash_entries");
        const auto keys = r.array<std::uint64_t>(entries, "hash keys");
        for (std::uint64_t k : keys) {
            if (k >= sc.model.grid.total_entries()) {
                throw CorruptArray(path.string() + ": hash key out of range");
            }
            HashFeature f;
            r.bytes(f.data(), sizeof(double) * kHashFeatures, "hash features");
            sc.model.grid.set_feature(k, f);
        }
        const std::size_t moments = meta.at("hash_moments");
        const auto mkeys = r.array<std::uint64_t>(moments, "hash moment keys");
        for (std::uint64_t k : mkeys) {
            if (k >= sc.model.grid.total_entries()) {
                throw CorruptArray(path.string() + ": hash key out of range");
            }
            HashMoments &mo = state.hash_adam.activate(k, sc.model.grid.total_entries());
            r.bytes(mo.data(), sizeof(double) * mo.size(), "hash moments");
        }
        state.grad_accum = r.array<double>(n, "densification statistics");
        state.grad_count = r.array<double>(n, "densification statistics");
        sc.transient_variance = r.array<double>(meta.at("variance").get<std::size_t>(), "variances");
    } catch (const json::exception &e) {
        throw CorruptArray(path.string() + ": bad checkpoint manifest: " + e.what());
    } catch (const std::invalid_argument &e) {
        throw CorruptArray(path.string() + ": " + e.what());
    }
    if (r.remaining() != 0) {
        throw CorruptArray(path.string() + ": trailing bytes after the last array");
    }
    return state;
}

} // namespace swag

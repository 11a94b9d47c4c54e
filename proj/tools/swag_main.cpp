// swag: train, render, evaluate and export in-the-wild Gaussian splatting scenes.

#include "swag/bundle.hpp"
#include "swag/data_io.hpp"
#include "swag/errors.hpp"
#include "swag/evaluation.hpp"
#include "swag/parallel.hpp"
#include "swag/trainer.hpp"
#include "swag/transient.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace swag;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingFile("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << text << "\n";
}

int parse_int(const std::string &s, const std::string &what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) {
            return v;
        }
    } catch (const std::exception &) {
    }
    throw UsageError("bad " + what + " '" + s + "'");
}

// Training image index from an index or an image name.
int resolve_image(const Scene &scene, const std::string &token) {
    if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) {
        const int k = parse_int(token, "image id");
        if (k >= scene.model.image_count()) {
            throw UnknownImage("image index " + token + " out of range");
        }
        return k;
    }
    return scene.find_image(token);
}

Camera resolve_camera(const Scene &scene, const std::string &token) {
    if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) {
        const int k = parse_int(token, "camera index");
        if (k >= int(scene.cameras.size())) {
            throw UnknownImage("camera index " + token + " out of range");
        }
        return scene.cameras[k];
    }
    json j;
    try {
        j = json::parse(read_text(token));
        Camera cam;
        const auto w = j.at("world_to_camera").get<std::vector<double>>();
        if (w.size() != 16) {
            throw DataError("world_to_camera must have 16 row-major entries");
        }
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                cam.world_to_camera(r, c) = w[std::size_t(4 * r + c)];
            }
        }
        cam.fx = j.at("fx");
        cam.fy = j.at("fy");
        cam.cx = j.at("cx");
        cam.cy = j.at("cy");
        cam.width = j.at("width");
        cam.height = j.at("height");
        cam.z_near = j.value("z_near", 0.01);
        try {
            cam.validate();
        } catch (const std::invalid_argument &e) {
            throw DataError(token + ": " + e.what());
        }
        return cam;
    } catch (const json::exception &e) {
        throw DataError(token + ": bad pose file: " + e.what());
    }
}

// "<id>" or "lerp:<idA>:<idB>:<t>".
std::vector<double> resolve_embedding(const Scene &scene, const std::string &token) {
    if (token.rfind("lerp:", 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(token.substr(5));
        std::string part;
        while (std::getline(ss, part, ':')) {
            parts.push_back(part);
        }
        if (parts.size() != 3) {
            throw UsageError("expected lerp:<idA>:<idB>:<t>");
        }
        double t = 0.0;
        try {
            t = std::stod(parts[2]);
        } catch (const std::exception &) {
            throw UsageError("bad interpolation weight '" + parts[2] + "'");
        }
        if (!(t >= 0.0 && t <= 1.0)) {
            throw UsageError("interpolation weight must be in [0, 1]");
        }
        const auto a = scene.model.embedding(resolve_image(scene, parts[0]));
        const auto b = scene.model.embedding(resolve_image(scene, parts[1]));
        return interpolate_embedding(a, b, t);
    }
    const auto e = scene.model.embedding(resolve_image(scene, token));
    return {e.begin(), e.end()};
}

Scene load_scene(const std::string &path) {
    TrainState state = load_checkpoint(path);
    return std::move(state.scene);
}

void print_report(const EvalReport &report) {
    for (const auto &m : report.images) {
        std::printf("%s psnr=%.4f ssim=%.5f\n", m.name.c_str(), m.psnr, m.ssim);
    }
    std::printf("mean psnr=%.4f ssim=%.5f\n", report.mean_psnr, report.mean_ssim);
}

struct TrainArgs {
    std::string data, mode = "swag", preset = "desk", out, config;
    std::uint64_t seed = 0;
    int iters = -1;
    int downscale = 0;
    int log_every = 100;
};

TrainConfig build_config(const TrainArgs &a, const CLI::App &cmd) {
    TrainConfig cfg;
    if (a.preset == "full") {
        cfg = TrainConfig::full();
    } else {
        cfg = a.iters >= 0 ? TrainConfig::desk(a.iters) : TrainConfig::desk();
    }
    if (!a.config.empty()) {
        try {
            cfg = TrainConfig::from_json(read_text(a.config), cfg);
        } catch (const std::invalid_argument &e) {
            throw DataError(a.config + ": " + e.what());
        }
    }
    if (cmd.count("--mode") > 0 || a.config.empty()) {
        cfg.variant = parse_variant(a.mode);
    }
    if (cmd.count("--seed") > 0) {
        cfg.seed = a.seed;
    }
    if (a.iters >= 0) {
        cfg.iterations = a.iters;
        cfg.densify_end = std::min(cfg.densify_end, a.iters);
        cfg.densify_start = std::min(cfg.densify_start, a.iters);
    }
    if (a.downscale > 0) {
        cfg.downscale = a.downscale;
    }
    cfg.validate();
    return cfg;
}

int run_train(const TrainArgs &a, const CLI::App &cmd) {
    const TrainConfig cfg = build_config(a, cmd);
    const Dataset data = load_dataset(a.data, cfg.downscale);
    std::fprintf(stderr, "training %s on %zu images (%zu test), %zu points\n", variant_name(cfg.variant).c_str(),
                 data.train.size(), data.test.size(), data.points.size());
    const auto start = std::chrono::steady_clock::now();
    TrainState state = train(cfg, data, [&](const StepStats &s) {
        if (a.log_every > 0 && (s.iteration % a.log_every == 0 || s.iteration == cfg.iterations)) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::fprintf(stderr, "it %lld loss %.5f psnr %.2f gaussians %zu (%.1fs)\n",
                         static_cast<long long>(s.iteration), s.loss, s.psnr, s.gaussians, secs);
        }
    });
    state.scene.transient_variance = compute_transient_variance(state.scene);
    save_checkpoint(a.out, state);
    std::fprintf(stderr, "wrote %s\n", a.out.c_str());
    return kExitOk;
}

struct RenderArgs {
    std::string ckpt, camera, embedding, out;
    bool static_only = false;
    double lambda = 0.0;
};

int run_render(const RenderArgs &a) {
    const Scene scene = load_scene(a.ckpt);
    const Camera cam = resolve_camera(scene, a.camera);
    std::vector<double> emb;
    if (!a.embedding.empty()) {
        emb = resolve_embedding(scene, a.embedding);
    } else if (scene.model.image_count() > 0) {
        const bool indexed = std::all_of(a.camera.begin(), a.camera.end(), ::isdigit);
        emb = resolve_embedding(scene, indexed ? a.camera : "0");
    }
    std::vector<bool> exclude;
    if (a.static_only) {
        const std::vector<double> var =
            scene.transient_variance.empty() ? compute_transient_variance(scene) : scene.transient_variance;
        exclude = classify_transient(var, a.lambda);
    }
    write_image(a.out, scene.render_image(emb, cam, exclude));
    return kExitOk;
}

struct EvalArgs {
    std::string ckpt, data, report;
    int fit_iters = -1;
    int downscale = 0;
};

int run_eval(const EvalArgs &a) {
    TrainState state = load_checkpoint(a.ckpt);
    const Dataset data = load_dataset(a.data, a.downscale > 0 ? a.downscale : state.config.downscale);
    EvalOptions opt;
    opt.fit_iterations = a.fit_iters >= 0 ? a.fit_iters : state.config.fit_iterations;
    opt.lr = state.config.lr_fit;
    const EvalReport report = evaluate_test_set(state.scene, data, opt);
    print_report(report);
    if (!a.report.empty()) {
        write_text(a.report, report.to_json());
    }
    return kExitOk;
}

struct ClassifyArgs {
    std::string ckpt, report;
    double lambda = 0.0;
};

int run_classify(const ClassifyArgs &a) {
    const Scene scene = load_scene(a.ckpt);
    const std::vector<double> var =
        scene.transient_variance.empty() ? compute_transient_variance(scene) : scene.transient_variance;
    const TransientCensus census = transient_census(var, a.lambda);
    std::printf("lambda=%g static=%zu transient=%zu fraction=%.4f\n", a.lambda, census.static_count,
                census.transient_count, census.transient_fraction());
    write_text(a.report, census.to_json());
    return kExitOk;
}

struct ExportArgs {
    std::string ckpt, out;
    double lambda = 0.0;
};

int run_export(const ExportArgs &a) {
    Scene scene = load_scene(a.ckpt);
    if (scene.transient_variance.empty()) {
        scene.transient_variance = compute_transient_variance(scene);
    }
    export_bundle(a.out, scene, a.lambda);
    return kExitOk;
}

struct SynthArgs {
    std::string spec = "blobs", perturb = "none", out;
    std::uint64_t seed = 0;
    int cameras = 20;
    int size = 64;
};

int run_synth(const SynthArgs &a) {
    SyntheticSpec spec;
    spec.scene = a.spec;
    spec.cameras = a.cameras;
    spec.width = a.size;
    spec.height = a.size;
    const Dataset data = generate_synthetic(spec, parse_perturbation(a.perturb), a.seed);
    write_colmap(a.out, data);
    std::fprintf(stderr, "wrote %zu images to %s\n", data.images.size(), a.out.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"swag: Gaussian splatting for photo collections with appearance and transient modelling"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (0 = default)")->check(CLI::NonNegativeNumber);

    TrainArgs ta;
    auto *train_cmd = app.add_subcommand("train", "Optimize a scene");
    train_cmd->add_option("--data", ta.data, "COLMAP directory or synthetic:<scene>[:<perturb>[:<seed>]]")
        ->required();
    train_cmd->add_option("--mode", ta.mode, "swag, swag-a, swag-t or 3dgs");
    train_cmd->add_option("--preset", ta.preset, "Schedule preset")->check(CLI::IsMember({"desk", "full"}));
    train_cmd->add_option("--out", ta.out, "Checkpoint path")->required();
    train_cmd->add_option("--seed", ta.seed, "Random seed");
    train_cmd->add_option("--iters", ta.iters, "Iteration count")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--downscale", ta.downscale, "Integer image downscale")->check(CLI::PositiveNumber);
    train_cmd->add_option("--config", ta.config, "JSON file with TrainConfig fields");
    train_cmd->add_option("--log-every", ta.log_every, "Progress interval (0 = silent)");

    RenderArgs ra;
    auto *render_cmd = app.add_subcommand("render", "Render one view");
    render_cmd->add_option("--ckpt", ra.ckpt, "Checkpoint")->required();
    render_cmd->add_option("--camera", ra.camera, "Training camera index or pose JSON file")->required();
    render_cmd->add_option("--embedding", ra.embedding, "Image id, image name or lerp:<idA>:<idB>:<t>");
    render_cmd->add_flag("--static-only", ra.static_only, "Drop Gaussians classified transient");
    render_cmd->add_option("--lambda", ra.lambda, "Transient threshold")->check(CLI::NonNegativeNumber);
    render_cmd->add_option("--out", ra.out, "Output .png or .ppm")->required();

    EvalArgs ea;
    auto *eval_cmd = app.add_subcommand("eval", "Left/right evaluation on the test split");
    eval_cmd->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--data", ea.data, "Dataset source")->required();
    eval_cmd->add_option("--report", ea.report, "JSON metrics output");
    eval_cmd->add_option("--fit-iters", ea.fit_iters, "Embedding fit iterations")->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--downscale", ea.downscale, "Integer image downscale")->check(CLI::PositiveNumber);

    ClassifyArgs ca;
    auto *classify_cmd = app.add_subcommand("classify", "Static/transient census");
    classify_cmd->add_option("--ckpt", ca.ckpt, "Checkpoint")->required();
    classify_cmd->add_option("--lambda", ca.lambda, "Transient threshold")->check(CLI::NonNegativeNumber);
    classify_cmd->add_option("--report", ca.report, "JSON report output")->required();

    ExportArgs xa;
    auto *export_cmd = app.add_subcommand("export", "Write a SceneBundle for the viewer");
    export_cmd->add_option("--ckpt", xa.ckpt, "Checkpoint")->required();
    export_cmd->add_option("--out", xa.out, "Bundle path")->required();
    export_cmd->add_option("--lambda", xa.lambda, "Transient threshold")->check(CLI::NonNegativeNumber);

    SynthArgs sa;
    auto *synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
    synth_cmd->add_option("--spec", sa.spec, "Scene name")->check(CLI::IsMember({"blobs", "cubes"}));
    synth_cmd->add_option("--perturb", sa.perturb, "none, color, occluder or both");
    synth_cmd->add_option("--seed", sa.seed, "Random seed");
    synth_cmd->add_option("--cameras", sa.cameras, "Camera count")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--size", sa.size, "Image width and height")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--out", sa.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        if (argc > 1 && std::string(argv[1]).rfind("-", 0) != 0) {
            std::cerr << app.help();
        }
        return kExitUsage;
    }

    try {
        set_thread_count(threads);
        if (*train_cmd) {
            return run_train(ta, *train_cmd);
        }
        if (*render_cmd) {
            return run_render(ra);
        }
        if (*eval_cmd) {
            return run_eval(ea);
        }
        if (*classify_cmd) {
            return run_classify(ca);
        }
        if (*export_cmd) {
            return run_export(xa);
        }
        if (*synth_cmd) {
            return run_synth(sa);
        }
    } catch (const NumericError &e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

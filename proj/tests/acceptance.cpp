// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. `swag_acceptance 4 6` runs a subset.

#include "gradcheck.hpp"
#include "swag/evaluation.hpp"
#include "swag/parallel.hpp"
#include "swag/trainer.hpp"
#include "swag/transient.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

using namespace swag;
using namespace swag::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char *f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

constexpr std::uint64_t kDataSeed = 7;
constexpr std::uint64_t kTrainSeed = 1;

Dataset scene(Perturbation p) { return generate_synthetic(SyntheticSpec{}, p, kDataSeed); }

TrainState desk_run(Variant v, const Dataset &data, const std::string &label) {
    TrainConfig c = TrainConfig::desk();
    c.variant = v;
    c.seed = kTrainSeed;
    const auto t0 = Clock::now();
    TrainState s = train(c, data);
    s.scene.transient_variance = compute_transient_variance(s.scene);
    std::fprintf(stderr, "  trained %s on %s: %zu gaussians, %.0fs\n", variant_name(v).c_str(), label.c_str(),
                 s.scene.cloud.size(), seconds_since(t0));
    return s;
}

// 1: analytic gradients against central finite differences.
Outcome gradients() {
    GradCheck raster;
    raster.merge(rasterizer_gradcheck(101, 20, 16, 16));
    raster.merge(rasterizer_gradcheck(102, 50, 32, 32));
    GradCheck e2e;
    for (const Variant v : {Variant::Swag, Variant::SwagA, Variant::SwagT, Variant::Plain}) {
        EndToEndSetup s = end_to_end_setup(200 + std::uint64_t(v), v, 5, 16);
        e2e.merge(end_to_end_gradcheck(s));
    }
    EndToEndSetup big = end_to_end_setup(300, Variant::Swag, 30, 24);
    e2e.merge(end_to_end_gradcheck(big, 100, 60));
    Outcome o;
    o.pass = raster.max_rel < 1e-4 && e2e.max_rel < 1e-3;
    o.detail = "rasterizer max rel err " + fmt("%.2e", raster.max_rel) + " over " + std::to_string(raster.checked) +
               " components (< 1e-4); end-to-end " + fmt("%.2e", e2e.max_rel) + " over " +
               std::to_string(e2e.checked) + " (< 1e-3)";
    if (!o.pass) {
        o.detail += "; worst: " + (raster.max_rel >= 1e-4 ? raster.worst : e2e.worst);
    }
    return o;
}

// 2: tiled rasterizer against the full-sort reference.
Outcome blending() {
    const Camera cam = test_camera(32, 32);
    RasterSettings settings;
    settings.early_termination = false;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const int count = 1 + int(hash_key(s, 77) % 100);
        const SplatScene scene = random_splats(hash_key(s, 1), count, 32, 32, s % 3 != 0);
        settings.background = Eigen::Vector3d(0.1 * double(s % 10), 0.5, 1.0 - 0.02 * double(s));
        const RenderOutput a = rasterize_forward(scene.splats, scene.colors, scene.opacities, cam, settings);
        const RenderOutput b = rasterize_reference(scene.splats, scene.colors, scene.opacities, cam, settings);
        for (std::size_t i = 0; i < a.color.data.size(); ++i) {
            worst = std::max(worst, std::abs(a.color.data[i] - b.color.data[i]));
        }
    }
    return {worst <= 1e-6, "50 scenes, max abs diff " + fmt("%.2e", worst) + " (<= 1e-6)"};
}

// 3: relaxed Bernoulli samples against the closed-form CDF.
Outcome concrete() {
    const int n = 100000;
    const double delta = 1.0, temp = 0.1;
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i) {
        samples[std::size_t(i)] = sample_concrete(delta, temp, concrete_uniform(0xACCE55, std::uint32_t(i)));
    }
    std::sort(samples.begin(), samples.end());
    const auto ecdf = [&](double tau) {
        return double(std::upper_bound(samples.begin(), samples.end(), tau) - samples.begin()) / n;
    };
    const auto closed = [&](double tau) {
        return 1.0 / (1.0 + std::exp(-(temp * std::log(tau / (1 - tau)) - std::log(std::abs(delta)))));
    };
    double worst = 0.0;
    for (int q = 0; q < 20; ++q) {
        const double tau = (q + 0.5) / 20.0;
        worst = std::max(worst, std::abs(ecdf(tau) - closed(tau)));
    }
    const double boundary = ecdf(0.01) + (1.0 - ecdf(0.99));
    const double expected = 2.0 * (1.0 - closed(0.99));
    const bool pass = worst <= 0.01 && std::abs(boundary - expected) <= 0.01 && std::abs(expected - 0.774) < 5e-4;
    return {pass, "max CDF deviation " + fmt("%.4f", worst) + " at 20 quantiles (<= 0.01); boundary mass " +
                      fmt("%.4f", boundary) + " vs closed form " + fmt("%.4f", expected) + " (+-0.01)"};
}

// 4: appearance modelling on color-perturbed images.
Outcome appearance() {
    const Dataset data = scene(Perturbation::Color);
    const TrainState full = desk_run(Variant::Swag, data, "color");
    const TrainState no_app = desk_run(Variant::SwagT, data, "color");
    const EvalReport a = evaluate_test_set(full.scene, data);
    const EvalReport t = evaluate_test_set(no_app.scene, data);
    const double gap = a.mean_psnr - t.mean_psnr;
    return {gap >= 5.0, "right-half PSNR swag " + fmt("%.2f", a.mean_psnr) + " dB, swag-t " +
                            fmt("%.2f", t.mean_psnr) + " dB, gap " + fmt("%.2f", gap) + " dB (>= 5)"};
}

// 5: transient Gaussians on occluded and clean scenes.
Outcome transients() {
    const Dataset occ = scene(Perturbation::Occluder);
    const TrainState so = desk_run(Variant::Swag, occ, "occluder");
    const EvalReport all_o = evaluate_training_views(so.scene, occ, false, 0.0, true);
    const EvalReport static_o = evaluate_training_views(so.scene, occ, true, 0.0, true);
    const double frac_o = transient_census(so.scene.transient_variance, 0.0).transient_fraction();

    const Dataset clean = scene(Perturbation::None);
    const TrainState sc = desk_run(Variant::Swag, clean, "clean");
    const EvalReport all_c = evaluate_training_views(sc.scene, clean, false, 0.0, true);
    const EvalReport static_c = evaluate_training_views(sc.scene, clean, true, 0.0, true);
    const double frac_c = transient_census(sc.scene.transient_variance, 0.0).transient_fraction();
    const double change = std::abs(static_c.mean_psnr - all_c.mean_psnr);

    const bool a = static_o.mean_psnr > all_o.mean_psnr;
    const bool b = frac_o < 0.30;
    const bool c = frac_c < 0.05 && change < 0.5;
    return {a && b && c, std::string("occluder: static-only ") + fmt("%.2f", static_o.mean_psnr) + " dB vs all " +
                             fmt("%.2f", all_o.mean_psnr) + " dB vs clean GT" + (a ? "" : " [fail]") +
                             ", transient fraction " + fmt("%.3f", frac_o) + " (< 0.30)" + (b ? "" : " [fail]") +
                             "; clean: transient fraction " + fmt("%.3f", frac_c) + " (< 0.05), PSNR change " +
                             fmt("%.3f", change) + " dB (< 0.5)" + (c ? "" : " [fail]")};
}

// 6: convergence on the clean scene.
Outcome convergence() {
    const Dataset data = scene(Perturbation::None);
    const TrainState s = desk_run(Variant::SwagA, data, "clean");
    const EvalReport r = evaluate_training_views(s.scene, data);
    return {r.mean_psnr >= 30.0, "swag-a training-view PSNR " + fmt("%.2f", r.mean_psnr) + " dB (>= 30)"};
}

// 7: left/right protocol and interpolation endpoints.
Outcome protocol() {
    SyntheticSpec spec;
    spec.cameras = 8;
    spec.width = 32;
    spec.height = 32;
    spec.test_every = 4;
    const Dataset data = generate_synthetic(spec, Perturbation::Color, 3);
    TrainConfig c = TrainConfig::desk(40);
    c.seed = 2;
    const TrainState s = train(c, data);

    bool masked = true;
    std::string why;
    for (const int t : data.test) {
        const ImageRecord &rec = data.images[std::size_t(t)];
        const int split = split_column(rec.image.width);
        Image poisoned = rec.image;
        for (int y = 0; y < poisoned.height; ++y) {
            for (int x = split; x < poisoned.width; ++x) {
                poisoned.set_pixel(x, y, Eigen::Vector3d::Constant(std::nan("")));
            }
        }
        const auto a = fit_test_embedding(s.scene, rec.camera, crop_columns(rec.image, 0, split), 20, 0.0025);
        const auto b = fit_test_embedding(s.scene, rec.camera, crop_columns(poisoned, 0, split), 20, 0.0025);
        if (a != b) {
            masked = false;
            why = " [right half changed the fit]";
        }
        const LossResult l = left_columns_loss(s.scene.render_image(a, rec.camera),
                                               crop_columns(rec.image, 0, split), kDefaultSsimWeight);
        for (int y = 0; y < l.grad.height; ++y) {
            for (int x = split; x < l.grad.width; ++x) {
                for (int ch = 0; ch < 3; ++ch) {
                    if (l.grad.at(x, y, ch) != 0.0) {
                        masked = false;
                        why = " [nonzero right-half gradient]";
                    }
                }
            }
        }
    }

    bool endpoints = true;
    const Scene &sc = s.scene;
    for (int i = 0; i + 1 < sc.model.image_count(); ++i) {
        const auto a = sc.model.embedding(i);
        const auto b = sc.model.embedding(i + 1);
        for (const double t : {0.0, 1.0}) {
            const auto e = interpolate_embedding(a, b, t);
            const Image lerp = sc.render_image(e, sc.cameras[0]);
            const Image anchor = sc.render_image(t == 0.0 ? a : b, sc.cameras[0]);
            endpoints = endpoints && lerp.data == anchor.data;
        }
    }
    return {masked && endpoints, std::string("right half ") + (masked ? "never read" : "leaked") + why +
                                     "; interpolation endpoints " + (endpoints ? "bit-exact" : "differ")};
}

std::string checkpoint_bytes(const TrainState &s, const TempDir &dir, const std::string &name) {
    save_checkpoint(dir / name, s);
    std::ifstream in(dir / name, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8: bit-identical checkpoints across thread counts.
Outcome determinism() {
    TempDir dir("acceptance_det");
    const Dataset data = scene(Perturbation::Both);
    TrainConfig c = TrainConfig::desk(10);
    c.densify_start = 5;
    c.densify_interval = 5;
    c.densify_end = 10;
    c.seed = 11;
    const int saved = thread_count();
    std::set<std::string> distinct;
    for (const int threads : {1, 2, 4}) {
        set_thread_count(threads);
        distinct.insert(checkpoint_bytes(train(c, data), dir, "t" + std::to_string(threads)));
        distinct.insert(checkpoint_bytes(train(c, data), dir, "u" + std::to_string(threads)));
    }
    set_thread_count(saved);
    return {distinct.size() == 1, std::to_string(distinct.size()) + " distinct checkpoint(s) from 6 runs on 1/2/4 threads"};
}

struct Criterion {
    int id;
    const char *name;
    double budget_s;
    Outcome (*run)();
};

} // namespace

int main(int argc, char **argv) {
    const Criterion all[] = {
        {1, "gradient correctness", 120, gradients}, {2, "blending oracle", 60, blending},
        {3, "concrete distribution", 60, concrete},  {4, "appearance ablation", 900, appearance},
        {5, "transient handling", 900, transients},  {6, "convergence smoke", 600, convergence},
        {7, "protocol integrity", 120, protocol},    {8, "determinism", 120, determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        only.insert(std::atoi(argv[i]));
    }
    int failures = 0;
    for (const Criterion &c : all) {
        if (!only.empty() && !only.count(c.id)) {
            continue;
        }
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("criterion %d %s: %s: %s; runtime %.1fs (< %.0fs)%s\n", c.id, pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str(), secs, c.budget_s, in_time ? "" : " [over budget]");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

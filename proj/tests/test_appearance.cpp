#include "gradcheck.hpp"
#include "swag/appearance.hpp"
#include "swag/errors.hpp"
#include "swag/hash_grid.hpp"
#include "swag/mlp.hpp"
#include "swag/transient.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace swag;
using namespace swag::testing;

namespace {

Aabb unit_box() {
    Aabb b;
    b.min = Eigen::Vector3d::Constant(-1.0);
    b.max = Eigen::Vector3d::Constant(1.0);
    return b;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST(HashGrid, DimensionsAndLevels) {
    const HashGrid grid;
    EXPECT_EQ(grid.output_dim(), 24);
    EXPECT_EQ(grid.level_resolution(0), 16);
    EXPECT_EQ(grid.level_resolution(11), 2048);
    EXPECT_TRUE(grid.level_is_dense(0));
    EXPECT_FALSE(grid.level_is_dense(11));
    for (int l = 0; l < 12; ++l) {
        EXPECT_LE(grid.level_size(l), std::uint64_t(1) << 19);
    }
}

TEST(HashGrid, DeterministicEncoding) {
    const HashGrid a(HashGridConfig{.seed = 4});
    const HashGrid b(HashGridConfig{.seed = 4});
    const Eigen::Vector3d x(0.123, -0.456, 0.789);
    std::vector<double> ea(24), eb(24), ea2(24);
    a.encode(x, unit_box(), ea.data());
    a.encode(x, unit_box(), ea2.data());
    b.encode(x, unit_box(), eb.data());
    EXPECT_EQ(ea, ea2);
    EXPECT_EQ(ea, eb);
}

TEST(HashGrid, VertexReadsStoredFeature) {
    HashGrid grid;
    const Aabb box = unit_box();
    // Level 0 has 16 cells across [-1, 1]; vertex (5, 9, 2) sits at -1 + v * 2/16.
    const Eigen::Vector3i v(5, 9, 2);
    const Eigen::Vector3d x = Eigen::Vector3d::Constant(-1.0) + v.cast<double>() * (2.0 / 16.0);
    const std::uint64_t key = grid.entry_index(0, v);
    grid.set_feature(key, {0.25, -0.75});
    std::vector<double> out(24);
    grid.encode(x, box, out.data());
    EXPECT_NEAR(out[0], 0.25, 1e-12);
    EXPECT_NEAR(out[1], -0.75, 1e-12);
}

TEST(HashGrid, InitialFeaturesSmall) {
    const HashGrid grid;
    for (std::uint64_t k = 0; k < 1000; k += 7) {
        const HashFeature f = grid.feature(k * 977);
        EXPECT_LE(std::abs(f[0]), 1e-4);
        EXPECT_LE(std::abs(f[1]), 1e-4);
    }
}

TEST(HashGrid, BackwardMatchesFiniteDifferences) {
    HashGrid grid(HashGridConfig{.seed = 9, .init_range = 0.5});
    const Aabb box = unit_box();
    const Eigen::Vector3d x(0.3117, -0.2243, 0.5071);
    std::vector<double> w(24);
    CounterRng rng(2);
    for (double &v : w) {
        v = rng.uniform(-1, 1);
    }
    const auto loss = [&](const Eigen::Vector3d &p) {
        std::vector<double> out(24);
        grid.encode(p, box, out.data());
        double s = 0.0;
        for (int i = 0; i < 24; ++i) {
            s += w[std::size_t(i)] * out[std::size_t(i)];
        }
        return s;
    };
    HashGradient g;
    const Eigen::Vector3d dx = grid.encode_backward(x, box, w.data(), g);
    const double h = 1e-7;
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d p = x, m = x;
        p[k] += h;
        m[k] -= h;
        EXPECT_LT(rel_error(dx[k], (loss(p) - loss(m)) / (2 * h), 1e-6), 1e-5);
    }
    const auto totals = g.reduce();
    EXPECT_EQ(g.keys.size(), g.values.size());
    EXPECT_EQ(totals.size(), 12u * 8u);
    for (int i = 0; i < 10; ++i) {
        const auto &[key, total] = totals[std::size_t(i) * 9];
        const HashFeature orig = grid.feature(key);
        for (int c = 0; c < 2; ++c) {
            HashFeature p = orig, m = orig;
            p[std::size_t(c)] += 1e-6;
            m[std::size_t(c)] -= 1e-6;
            grid.set_feature(key, p);
            const double lp = loss(x);
            grid.set_feature(key, m);
            const double lm = loss(x);
            grid.set_feature(key, orig);
            EXPECT_LT(rel_error(total[std::size_t(c)], (lp - lm) / 2e-6, 1e-8), 1e-5);
        }
    }
}

TEST(Mlp, ZeroWeightsGiveGrayAndZeroDelta) {
    AppearanceModel model = AppearanceModel::create(2, unit_box(), 1);
    std::fill(model.mlp.params().begin(), model.mlp.params().end(), 0.0);
    GaussianCloud cloud = random_cloud(1, 6, 1);
    ConditionOptions opt;
    opt.sh_degree = 1;
    const ConditioningResult r = condition_scene(cloud, model, 0, test_camera(16, 16), opt);
    for (std::size_t i = 0; i < r.indices.size(); ++i) {
        EXPECT_EQ(r.colors[i], Eigen::Vector3d::Constant(0.5));
        EXPECT_EQ(r.delta_alpha_loc[i], 0.0);
        EXPECT_EQ(r.delta_alpha_sampled[i], 0.0);
        EXPECT_EQ(r.effective_opacity[i], cloud.opacity(r.indices[i]));
    }
}

TEST(Mlp, EmbeddingChangesOutput) {
    Mlp mlp(51, 64, 4);
    CounterRng rng(3);
    for (double &p : mlp.params()) {
        p = rng.uniform(-0.3, 0.3);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(51, 1);
    a.topRows(27).setConstant(0.2);
    Eigen::MatrixXd b = a;
    a.bottomRows(24).setConstant(0.5);
    b.bottomRows(24).setConstant(-0.5);
    EXPECT_GT((mlp.forward(a) - mlp.forward(b)).norm(), 1e-3);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
    Mlp mlp(7, 6, 4);
    CounterRng rng(8);
    for (double &p : mlp.params()) {
        p = rng.uniform(-0.6, 0.6);
    }
    Eigen::MatrixXd in(7, 3);
    for (int i = 0; i < in.size(); ++i) {
        in.data()[i] = rng.uniform(-1, 1);
    }
    Eigen::MatrixXd w(4, 3);
    for (int i = 0; i < w.size(); ++i) {
        w.data()[i] = rng.uniform(-1, 1);
    }
    const auto loss = [&](const Eigen::MatrixXd &x) { return (mlp.forward(x).array() * w.array()).sum(); };
    Mlp::Cache cache;
    mlp.forward(in, &cache);
    std::vector<double> dp(mlp.param_count(), 0.0);
    const Eigen::MatrixXd din = mlp.backward(cache, w, dp.data());
    const double h = 1e-6;
    for (int i = 0; i < in.size(); ++i) {
        Eigen::MatrixXd p = in, m = in;
        p.data()[i] += h;
        m.data()[i] -= h;
        EXPECT_LT(rel_error(din.data()[i], (loss(p) - loss(m)) / (2 * h)), 1e-5);
    }
    for (std::size_t i = 0; i < mlp.param_count(); ++i) {
        const double orig = mlp.params()[i];
        mlp.params()[i] = orig + h;
        const double lp = loss(in);
        mlp.params()[i] = orig - h;
        const double lm = loss(in);
        mlp.params()[i] = orig;
        EXPECT_LT(rel_error(dp[i], (lp - lm) / (2 * h)), 1e-5) << "param " << i;
    }
}

TEST(Mlp, InitializationUsesOutputBias) {
    Mlp mlp;
    Eigen::VectorXd bias = default_output_bias();
    mlp.initialize(5, bias);
    EXPECT_EQ(Eigen::VectorXd(mlp.b3()), bias);
    EXPECT_EQ(mlp.w3().norm(), 0.0);
    EXPECT_GT(mlp.w1().norm(), 0.0);
}

TEST(Concrete, Examples) {
    EXPECT_DOUBLE_EQ(sample_concrete(1.0, 0.1, 0.5), 0.5);
    EXPECT_NEAR(sample_concrete(2.0, 0.1, 0.5), 0.999025, 1e-6);
    EXPECT_NEAR(sample_concrete(2.0, 0.1, 0.5), logistic(std::log(2.0) / 0.1), 1e-15);
    EXPECT_EQ(sample_concrete(0.0, 0.1, 0.3), 0.0);
    EXPECT_EQ(sample_concrete(1e-13, 0.1, 0.9), 0.0);
    EXPECT_NEAR(concrete_cdf(0.01, 1.0, 0.1), 0.3871, 1e-4);
}

TEST(Concrete, StrictlyInsideUnitInterval) {
    for (const double d : {-3.0, -0.01, 1e-6, 0.4, 5.0}) {
        for (const double u : {1e-9, 0.2, 0.5, 0.9, 1 - 1e-9}) {
            const double s = sample_concrete(d, 0.5, u);
            EXPECT_GT(s, 0.0);
            EXPECT_LT(s, 1.0);
        }
    }
}

TEST(Concrete, GradientMatchesFiniteDifferences) {
    for (const double d : {-0.7, 0.05, 0.3, 1.0, 2.5}) {
        for (const double u : {0.1, 0.5, 0.8}) {
            const double s = sample_concrete(d, 0.1, u);
            if (s * (1 - s) < 1e-8) {
                continue; // saturated: differences of s are pure roundoff
            }
            const double fd = central_difference([&](double x) { return sample_concrete(x, 0.1, u); }, d, 1e-7);
            EXPECT_LT(rel_error(sample_concrete_grad(d, 0.1, u), fd, 1e-8), 1e-5);
        }
    }
}

TEST(Concrete, EmpiricalCdfMatchesClosedForm) {
    const int n = 100000;
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i) {
        samples[std::size_t(i)] = sample_concrete(0.6, 0.25, uniform_open(hash_key(123, std::uint64_t(i))));
    }
    std::sort(samples.begin(), samples.end());
    for (int q = 1; q <= 19; ++q) {
        const double tau = q / 20.0;
        const double emp = double(std::upper_bound(samples.begin(), samples.end(), tau) - samples.begin()) / n;
        // Oracle: invert the sample map for u, then P(U <= u*).
        const double x = 0.25 * std::log(tau / (1 - tau)) - std::log(0.6);
        const double want = logistic(x);
        EXPECT_NEAR(emp, want, 0.01);
        EXPECT_NEAR(concrete_cdf(tau, 0.6, 0.25), want, 1e-12);
    }
}

TEST(EffectiveOpacity, Examples) {
    EXPECT_DOUBLE_EQ(effective_opacity(0.9, 0.0), 0.9);
    EXPECT_DOUBLE_EQ(effective_opacity(0.3, 0.5), 0.0);
    EXPECT_NEAR(effective_opacity(0.7, 0.2), 0.5, 1e-15);
}

TEST(OpacityStats, Examples) {
    const std::vector<std::vector<double>> constant{{0.3, 0.1}, {0.3, 0.1}, {0.3, 0.1}};
    for (const double v : accumulate_opacity_stats(constant)) {
        EXPECT_EQ(v, 0.0);
    }
    const std::vector<std::vector<double>> halves{{0.0}, {1.0}, {0.0}, {1.0}};
    EXPECT_DOUBLE_EQ(accumulate_opacity_stats(halves)[0], 0.25);
    const std::vector<std::vector<double>> single{{0.7, 0.2}};
    EXPECT_EQ(accumulate_opacity_stats(single), std::vector<double>(2, 0.0));
}

TEST(ClassifyTransient, Examples) {
    EXPECT_EQ(classify_transient(std::vector<double>(4, 0.0), 0.0), std::vector<bool>(4, false));
    EXPECT_EQ(classify_transient(std::vector<double>{0.0, 0.25, 0.01}, 0.02), (std::vector<bool>{false, true, false}));
    EXPECT_EQ(classify_transient(std::vector<double>{1e-13, 1e-11}, 0.0), (std::vector<bool>{false, true}));
}

TEST(Conditioning, AppearanceOnlyKeepsBaseOpacity) {
    AppearanceModel model = AppearanceModel::create(1, unit_box(), 3);
    CounterRng rng(4);
    for (double &p : model.mlp.params()) {
        p = rng.uniform(-0.5, 0.5);
    }
    const GaussianCloud cloud = random_cloud(2, 10, 1);
    ConditionOptions opt;
    opt.variant = Variant::SwagA;
    opt.sample = SampleMode::Train;
    opt.noise_key = 77;
    opt.sh_degree = 1;
    const ConditioningResult r = condition_scene(cloud, model, 0, test_camera(16, 16), opt);
    for (std::size_t i = 0; i < r.indices.size(); ++i) {
        EXPECT_EQ(r.effective_opacity[i], cloud.opacity(r.indices[i]));
    }
}

TEST(Conditioning, TransientOnlyUsesShColors) {
    AppearanceModel model = AppearanceModel::create(1, unit_box(), 3);
    CounterRng rng(4);
    for (double &p : model.mlp.params()) {
        p = rng.uniform(-0.5, 0.5);
    }
    const GaussianCloud cloud = random_cloud(2, 10, 1);
    ConditionOptions opt;
    opt.variant = Variant::SwagT;
    opt.sh_degree = 1;
    const ConditioningResult r = condition_scene(cloud, model, 0, test_camera(16, 16), opt);
    bool any_reduced = false;
    for (std::size_t i = 0; i < r.indices.size(); ++i) {
        EXPECT_EQ(r.colors[i], r.base_colors[i]);
        any_reduced = any_reduced || r.effective_opacity[i] < cloud.opacity(r.indices[i]);
    }
    EXPECT_TRUE(any_reduced);
}

TEST(Conditioning, TrainModeSeededAndEvalFixed) {
    AppearanceModel model = AppearanceModel::create(1, unit_box(), 3);
    CounterRng rng(4);
    for (double &p : model.mlp.params()) {
        p = rng.uniform(-0.5, 0.5);
    }
    const GaussianCloud cloud = random_cloud(2, 100, 1);
    ConditionOptions opt;
    opt.sample = SampleMode::Train;
    opt.noise_key = 5;
    opt.sh_degree = 1;
    const Camera cam = test_camera(16, 16);
    const ConditioningResult a = condition_scene(cloud, model, 0, cam, opt);
    const ConditioningResult b = condition_scene(cloud, model, 0, cam, opt);
    EXPECT_EQ(a.delta_alpha_sampled, b.delta_alpha_sampled);
    EXPECT_EQ(a.uniforms, b.uniforms);
    opt.noise_key = 6;
    EXPECT_NE(condition_scene(cloud, model, 0, cam, opt).uniforms, a.uniforms);
    opt.sample = SampleMode::Eval;
    for (const double u : condition_scene(cloud, model, 0, cam, opt).uniforms) {
        EXPECT_EQ(u, kEvalUniform);
    }
}

TEST(Conditioning, UnknownImageThrows) {
    const AppearanceModel model = AppearanceModel::create(2, unit_box(), 3);
    const GaussianCloud cloud = random_cloud(2, 3, 1);
    EXPECT_THROW(condition_scene(cloud, model, 2, test_camera(8, 8), ConditionOptions{}), UnknownImage);
    EXPECT_THROW(condition_scene(cloud, model, -1, test_camera(8, 8), ConditionOptions{}), UnknownImage);
}

TEST(Variants, NamesRoundTrip) {
    for (const Variant v : {Variant::Swag, Variant::SwagA, Variant::SwagT, Variant::Plain}) {
        EXPECT_EQ(parse_variant(variant_name(v)), v);
    }
    EXPECT_THROW(parse_variant("nerf"), std::invalid_argument);
}

class EndToEndGradient : public ::testing::TestWithParam<Variant> {};

TEST_P(EndToEndGradient, MatchesFiniteDifferences) {
    EndToEndSetup s = end_to_end_setup(31, GetParam(), 5, 16);
    const GradCheck c = end_to_end_gradcheck(s, 60, 30);
    EXPECT_LT(c.max_rel, 1e-3) << c.worst;
    EXPECT_GT(c.checked, 100);
}

INSTANTIATE_TEST_SUITE_P(AllVariants, EndToEndGradient,
                         ::testing::Values(Variant::Swag, Variant::SwagA, Variant::SwagT, Variant::Plain),
                         [](const auto &info) {
                             std::string n = variant_name(info.param);
                             std::replace(n.begin(), n.end(), '-', '_');
                             return n;
                         });

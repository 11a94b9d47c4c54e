#include "swag/data_io.hpp"
#include "test_support.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

using namespace swag;
using namespace swag::testing;
namespace fs = std::filesystem;

namespace {

int run(const std::string &args, const fs::path &log) {
    const std::string cmd = std::string(SWAG_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Shared tiny dataset and checkpoint, built once.
class Cli : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("cli");
        const fs::path log = *dir_ / "setup.log";
        ASSERT_EQ(run("synth --spec blobs --perturb both --seed 3 --cameras 6 --size 24 --out " +
                          (*dir_ / "data").string(),
                      log),
                  0)
            << slurp(log);
        ASSERT_EQ(run("train --data " + (*dir_ / "data").string() + " --mode swag --iters 20 --seed 1 --out " +
                          (*dir_ / "a.ckpt").string(),
                      log),
                  0)
            << slurp(log);
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static fs::path path(const std::string &name) { return *dir_ / name; }
    static TempDir *dir_;
};

TempDir *Cli::dir_ = nullptr;

} // namespace

TEST_F(Cli, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run("frobnicate", path("log")), 1);
    EXPECT_NE(slurp(path("log")).find("Usage"), std::string::npos);
    EXPECT_EQ(run("", path("log")), 1);
    EXPECT_EQ(run("train --mode swag", path("log")), 1);
    EXPECT_EQ(run("--help", path("log")), 0);
}

TEST_F(Cli, SynthWritesLoadableDataset) {
    const Dataset d = load_colmap(path("data"));
    EXPECT_EQ(d.images.size(), 6u);
    EXPECT_EQ(d.train.size(), 4u);
    ASSERT_TRUE(d.images[1].clean.has_value());
    EXPECT_NE(d.images[1].image.data, d.images[1].clean->data);
}

TEST_F(Cli, TrainIsDeterministic) {
    ASSERT_EQ(run("train --data " + path("data").string() + " --mode swag --iters 20 --seed 1 --out " +
                      path("b.ckpt").string(),
                  path("log")),
              0);
    EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
}

TEST_F(Cli, InterpolationEndpointsAreExact) {
    ASSERT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera 1 --embedding 0 --out " +
                      path("e0.png").string(),
                  path("log")),
              0)
        << slurp(path("log"));
    ASSERT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera 1 --embedding lerp:0:2:0 --out " +
                      path("l0.png").string(),
                  path("log")),
              0);
    ASSERT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera 1 --embedding lerp:0:2:1 --out " +
                      path("l1.png").string(),
                  path("log")),
              0);
    ASSERT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera 1 --embedding 2 --out " +
                      path("e2.png").string(),
                  path("log")),
              0);
    EXPECT_EQ(slurp(path("e0.png")), slurp(path("l0.png")));
    EXPECT_EQ(slurp(path("e2.png")), slurp(path("l1.png")));
    EXPECT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera 1 --embedding lerp:0:2:1.5 --out " +
                      path("bad.png").string(),
                  path("log")),
              1);
}

TEST_F(Cli, StaticOnlyRenderAndPoseFile) {
    nlohmann::json pose;
    const Camera cam = test_camera(20, 16);
    std::vector<double> w;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            w.push_back(cam.world_to_camera(r, c));
        }
    }
    pose = {{"world_to_camera", w}, {"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx},
            {"cy", cam.cy},         {"width", 20},  {"height", 16}};
    std::ofstream(path("pose.json")) << pose.dump();
    ASSERT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera " + path("pose.json").string() +
                      " --static-only --lambda 0 --out " + path("static.png").string(),
                  path("log")),
              0)
        << slurp(path("log"));
    const Image img = read_image(path("static.png"));
    EXPECT_EQ(img.width, 20);
    EXPECT_EQ(img.height, 16);
}

TEST_F(Cli, EvalClassifyExport) {
    ASSERT_EQ(run("eval --ckpt " + path("a.ckpt").string() + " --data " + path("data").string() +
                      " --fit-iters 3 --report " + path("eval.json").string(),
                  path("log")),
              0)
        << slurp(path("log"));
    const auto report = nlohmann::json::parse(slurp(path("eval.json")));
    EXPECT_EQ(report.at("images").size(), 2u);
    EXPECT_GT(report.at("mean_psnr").get<double>(), 5.0);

    ASSERT_EQ(run("classify --ckpt " + path("a.ckpt").string() + " --lambda 0 --report " +
                      path("census.json").string(),
                  path("log")),
              0);
    const auto census = nlohmann::json::parse(slurp(path("census.json")));
    std::size_t total = 0;
    for (const std::size_t c : census.at("histogram").at("counts").get<std::vector<std::size_t>>()) {
        total += c;
    }
    EXPECT_EQ(total, census.at("static").get<std::size_t>() + census.at("transient").get<std::size_t>());

    ASSERT_EQ(run("export --ckpt " + path("a.ckpt").string() + " --out " + path("scene.swag").string(), path("log")),
              0);
    EXPECT_EQ(slurp(path("scene.swag")).substr(0, 8), "SWAGBNDL");
}

TEST_F(Cli, DataErrorsExitTwo) {
    EXPECT_EQ(run("train --data /nonexistent/dir --out " + path("x.ckpt").string(), path("log")), 2);
    EXPECT_EQ(run("render --ckpt " + path("missing.ckpt").string() + " --camera 0 --out " + path("x.png").string(),
                  path("log")),
              2);
    EXPECT_EQ(run("render --ckpt " + path("a.ckpt").string() + " --camera 0 --embedding nosuch.png --out " +
                      path("x.png").string(),
                  path("log")),
              2);
    EXPECT_FALSE(fs::exists(path("x.ckpt")));
}

TEST_F(Cli, BadFlagValuesExitOne) {
    EXPECT_EQ(run("train --data " + path("data").string() + " --mode nerf --out " + path("x.ckpt").string(),
                  path("log")),
              1);
    EXPECT_EQ(run("train --data " + path("data").string() + " --preset huge --out " + path("x.ckpt").string(),
                  path("log")),
              1);
    EXPECT_EQ(run("synth --perturb fog --out " + path("fog").string(), path("log")), 1);
}

TEST_F(Cli, ConfigFilePrecedence) {
    std::ofstream(path("cfg.json")) << R"({"iterations": 3, "seed": 1, "variant": "swag-a"})";
    ASSERT_EQ(run("train --data " + path("data").string() + " --config " + path("cfg.json").string() +
                      " --iters 2 --out " + path("cfg.ckpt").string(),
                  path("log")),
              0)
        << slurp(path("log"));
    const std::string bytes = slurp(path("cfg.ckpt"));
    EXPECT_NE(bytes.find("\"iteration\":2"), std::string::npos);
    EXPECT_NE(bytes.find("\"variant\":\"swag-a\""), std::string::npos);
}

TEST_F(Cli, NonFiniteTrainingExitsThree) {
    std::ofstream(path("nan.json")) << R"({"lr_sh": 1e308, "lr_opacity": 1e308})";
    EXPECT_EQ(run("train --data " + path("data").string() + " --mode 3dgs --config " + path("nan.json").string() +
                      " --iters 5 --out " + path("nan.ckpt").string(),
                  path("log")),
              3)
        << slurp(path("log"));
}

#pragma once

#include "swag/camera.hpp"
#include "swag/hash_grid.hpp"
#include "swag/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace swag {

struct ImageRecord {
    int id = 0;
    std::string name;
    Camera camera;
    Image image;
    std::optional<Image> clean; // unperturbed reference, synthetic data only
};

/// Posed images with an initialization point cloud. `train` and `test`
/// index into `images`; training embedding k belongs to images[train[k]].
struct Dataset {
    std::vector<ImageRecord> images;
    std::vector<int> train;
    std::vector<int> test;
    std::vector<Eigen::Vector3d> points;
    std::vector<Eigen::Vector3d> point_colors;
    Aabb aabb;

    const ImageRecord &train_image(int k) const { return images.at(train.at(k)); }
    const ImageRecord &test_image(int k) const { return images.at(test.at(k)); }
};

// Bounding box of `points` padded by `margin` times its extent on every side.
// Degenerate or empty input yields a unit box around the available points.
Aabb bounding_box(const std::vector<Eigen::Vector3d> &points, double margin = 0.05);

Image read_image(const std::filesystem::path &path);
void write_image(const std::filesystem::path &path, const Image &img);

// Box-filter downscale by an integer factor; intrinsics follow.
Image downscale_image(const Image &img, int factor);
Camera downscale_camera(const Camera &cam, int factor);
void downscale_dataset(Dataset &data, int factor);

/**
 * Reads a COLMAP text reconstruction (cameras.txt, images.txt, points3D.txt)
 * plus the images/ folder. Only PINHOLE and SIMPLE_PINHOLE cameras are
 * accepted. If split.txt exists (lines "train <name>" / "test <name>") it
 * defines the split; otherwise every 8th image by sorted name is a test image.
 * A clean/ folder, when present, supplies unperturbed references.
 */
Dataset load_colmap(const std::filesystem::path &dir);

// Writes `data` in the layout load_colmap reads, including split.txt and clean/.
void write_colmap(const std::filesystem::path &dir, const Dataset &data);

enum class Perturbation { None, Color, Occluder, Both };

Perturbation parse_perturbation(const std::string &name);
std::string perturbation_name(Perturbation p);

struct SyntheticSpec {
    std::string scene = "blobs"; // "blobs" or "cubes"
    int cameras = 20;
    int width = 64;
    int height = 64;
    int test_every = 5;
};

/// Built-in procedural scene rendered from a ring of cameras. Every image
/// carries its clean reference; perturbations touch training images only.
Dataset generate_synthetic(const SyntheticSpec &spec, Perturbation perturbation, std::uint64_t seed);

/// Opens `source`, either a COLMAP directory or "synthetic:<scene>[:<perturbation>[:<seed>]]".
Dataset load_dataset(const std::string &source, int downscale = 1);

} // namespace swag

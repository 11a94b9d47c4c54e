#pragma once

#include "swag/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace swag {

constexpr std::uint32_t kBundleVersion = 1;

/**
 * SceneBundle layout: the 8-byte magic "SWAGBNDL", a little-endian u32
 * format version, a u32 manifest length, the UTF-8 JSON manifest, then the
 * data section. The manifest's "arrays" list gives name, dtype ("f32" or
 * "u32"), shape, byte offset into the data section and byte length of every
 * array. All values are little-endian.
 *
 * Besides the Gaussian and network parameters the bundle carries the hash
 * encoding of every Gaussian center ("emb_x", N x 24), so a consumer can
 * evaluate the MLP without implementing the hash grid. MLP weight matrices
 * are stored row-major with shape [out, in].
 */
void export_bundle(const std::filesystem::path &path, const Scene &scene, double lambda);

struct BundleContents {
    Scene scene;
    double lambda = 0.0;
    std::vector<bool> transient_mask;
    std::vector<double> emb_x; // N x 24, as stored
    std::string manifest;
};

/// Throws VersionMismatch for an unknown format version and CorruptArray for
/// any truncated, inconsistent or malformed content.
BundleContents import_bundle(const std::filesystem::path &path);

// Shorthand returning only the renderable scene.
inline Scene load_bundle_scene(const std::filesystem::path &path) { return import_bundle(path).scene; }

} // namespace swag

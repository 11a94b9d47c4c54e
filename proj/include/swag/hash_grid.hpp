#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace swag {

struct Aabb {
    Eigen::Vector3d min = Eigen::Vector3d::Zero();
    Eigen::Vector3d max = Eigen::Vector3d::Ones();

    bool valid() const { return ((max - min).array() > 0).all(); }
    Eigen::Vector3d extent() const { return max - min; }
};

struct HashGridConfig {
    int levels = 12;
    int base_resolution = 16;
    int max_resolution = 2048;
    std::uint32_t table_size = 1u << 19;
    std::uint64_t seed = 0;
    double init_range = 1e-4;
};

constexpr int kHashFeatures = 2;
using HashFeature = std::array<double, kHashFeatures>;

// Sparse gradient for hash-table entries as an unreduced log of
// contributions keyed by global entry index. Sums follow log order.
struct HashGradient {
    std::vector<std::uint64_t> keys;
    std::vector<HashFeature> values;

    void add(std::uint64_t key, const HashFeature &g) {
        keys.push_back(key);
        values.push_back(g);
    }
    void merge(const HashGradient &other);
    void clear();
    bool empty() const { return keys.empty(); }

    // Per-key totals, keys in first-touch order.
    std::vector<std::pair<std::uint64_t, HashFeature>> reduce() const;
    HashFeature total(std::uint64_t key) const;
};

/**
 * Multiresolution hash encoding of 3D positions.
 *
 * Level l has resolution floor(N_min * b^l) with b chosen so the last level
 * reaches N_max. Levels whose dense vertex grid fits in the table are indexed
 * directly; finer levels use the XOR-of-primes spatial hash modulo the table
 * size. Each vertex stores two features, interpolated trilinearly, so the
 * encoding has 2 * levels outputs.
 *
 * Every entry starts at a deterministic pseudo-random value in
 * [-init_range, init_range]. Entries written since construction are tracked
 * so files only need to carry those.
 */
class HashGrid {
  public:
    HashGrid() : HashGrid(HashGridConfig{}) {}
    explicit HashGrid(const HashGridConfig &config);

    const HashGridConfig &config() const { return config_; }
    int output_dim() const { return config_.levels * kHashFeatures; }
    int level_resolution(int level) const { return resolution_[level]; }
    bool level_is_dense(int level) const { return dense_[level]; }
    std::uint64_t level_size(int level) const { return size_[level]; }
    std::uint64_t level_offset(int level) const { return offset_[level]; }
    std::uint64_t total_entries() const { return offset_.back(); }

    // Global entry index for an integer vertex of `level`.
    std::uint64_t entry_index(int level, const Eigen::Vector3i &vertex) const;

    const HashFeature &feature(std::uint64_t key) const { return values_[key]; }
    HashFeature initial_feature(std::uint64_t key) const;
    void set_feature(std::uint64_t key, const HashFeature &value);
    bool is_written(std::uint64_t key) const { return written_[key] != 0; }
    std::size_t written_count() const { return written_count_; }
    // Keys written since construction, ascending.
    std::vector<std::uint64_t> written_keys() const;

    void encode(const Eigen::Vector3d &x, const Aabb &aabb, double *out) const;

    /// Accumulates feature gradients into `grad` and returns dL/dx.
    Eigen::Vector3d encode_backward(const Eigen::Vector3d &x, const Aabb &aabb, const double *d_out,
                                    HashGradient &grad) const;

  private:
    struct Cell {
        Eigen::Vector3i base;
        Eigen::Vector3d frac;
        Eigen::Vector3d scale; // d(pos)/dx per axis, zero when clamped
    };
    Cell locate(const Eigen::Vector3d &x, const Aabb &aabb, int level) const;

    HashGridConfig config_;
    std::vector<int> resolution_;
    std::vector<bool> dense_;
    std::vector<std::uint64_t> size_;
    std::vector<std::uint64_t> offset_;
    std::vector<HashFeature> values_;
    std::vector<std::uint8_t> written_;
    std::size_t written_count_ = 0;
};

} // namespace swag

#pragma once

#include "swag/hash_grid.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace swag {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam step (bias-corrected, `step` counted from 1) over a flat array.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, double lr, std::int64_t step, const AdamParams &adam);

using HashMoments = std::array<double, 2 * kHashFeatures>; // m0 m1 v0 v1

/// Adam moments for hash-table entries. Storage is sized to the table on
/// first use; an entry counts as active once it has received a gradient.
class SparseAdamState {
  public:
    bool is_active(std::uint64_t key) const { return key < active_.size() && active_[key]; }
    std::size_t active_count() const { return active_count_; }
    // Active keys, ascending.
    std::vector<std::uint64_t> active_keys() const;
    const HashMoments &moments(std::uint64_t key) const { return moments_.at(key); }
    // Marks `key` active; storage grows to `table_size` entries if needed.
    HashMoments &activate(std::uint64_t key, std::uint64_t table_size);

  private:
    friend void sparse_adam_update(HashGrid &, const HashGradient &, SparseAdamState &, double, std::int64_t,
                                   const AdamParams &);
    void reserve(std::uint64_t table_size);

    std::vector<HashMoments> moments_;
    std::vector<std::uint8_t> active_;
    std::size_t active_count_ = 0;
    // Scratch for reducing a gradient log: per-entry sums and first-touch order.
    std::vector<HashFeature> sum_;
    std::vector<std::uint8_t> touched_;
    std::vector<std::uint64_t> order_;
};

/// Lazy Adam: only entries present in `grad` are updated. Bias correction
/// uses the global step.
void sparse_adam_update(HashGrid &grid, const HashGradient &grad, SparseAdamState &state, double lr,
                        std::int64_t step, const AdamParams &adam);

} // namespace swag

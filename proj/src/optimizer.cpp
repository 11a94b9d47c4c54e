#include "swag/optimizer.hpp"
#include "swag/errors.hpp"

#include <cmath>

namespace swag {

namespace {

inline void adam_scalar(double &p, double g, double &m, double &v, double lr, double c1, double c2,
                        const AdamParams &adam) {
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
    p -= lr / c1 * m / (std::sqrt(v) / std::sqrt(c2) + adam.eps);
}

} // namespace

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, double lr, std::int64_t step, const AdamParams &adam) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw DimensionMismatch("optimizer arrays differ in length");
    }
    const double c1 = 1.0 - std::pow(adam.beta1, double(step));
    const double c2 = 1.0 - std::pow(adam.beta2, double(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_scalar(params[i], grads[i], m[i], v[i], lr, c1, c2, adam);
    }
}

void SparseAdamState::reserve(std::uint64_t table_size) {
    if (moments_.size() < table_size) {
        moments_.resize(table_size, HashMoments{});
        active_.resize(table_size, 0);
        sum_.resize(table_size, HashFeature{});
        touched_.resize(table_size, 0);
    }
}

HashMoments &SparseAdamState::activate(std::uint64_t key, std::uint64_t table_size) {
    if (key >= table_size) {
        throw DimensionMismatch("hash key outside the table");
    }
    reserve(table_size);
    if (!active_[key]) {
        active_[key] = 1;
        ++active_count_;
    }
    return moments_[key];
}

std::vector<std::uint64_t> SparseAdamState::active_keys() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(active_count_);
    for (std::uint64_t key = 0; key < active_.size(); ++key) {
        if (active_[key]) {
            keys.push_back(key);
        }
    }
    return keys;
}

void sparse_adam_update(HashGrid &grid, const HashGradient &grad, SparseAdamState &state, double lr,
                        std::int64_t step, const AdamParams &adam) {
    const double c1 = 1.0 - std::pow(adam.beta1, double(step));
    const double c2 = 1.0 - std::pow(adam.beta2, double(step));
    state.reserve(grid.total_entries());

    // Reduce the log in order so sums do not depend on how it was produced.
    state.order_.clear();
    for (std::size_t i = 0; i < grad.keys.size(); ++i) {
        const std::uint64_t key = grad.keys[i];
        if (key >= grid.total_entries()) {
            throw DimensionMismatch("hash key outside the table");
        }
        if (!state.touched_[key]) {
            state.touched_[key] = 1;
            state.sum_[key] = grad.values[i];
            state.order_.push_back(key);
            continue;
        }
        for (int k = 0; k < kHashFeatures; ++k) {
            state.sum_[key][k] += grad.values[i][k];
        }
    }

    for (std::uint64_t key : state.order_) {
        const HashFeature &g = state.sum_[key];
        HashMoments &mom = state.activate(key, grid.total_entries());
        HashFeature f = grid.feature(key);
        for (int k = 0; k < kHashFeatures; ++k) {
            adam_scalar(f[k], g[k], mom[k], mom[kHashFeatures + k], lr, c1, c2, adam);
        }
        grid.set_feature(key, f);
        state.touched_[key] = 0;
    }
}

} // namespace swag

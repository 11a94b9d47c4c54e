#include "swag/hash_grid.hpp"
#include "swag/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace swag {

void HashGradient::merge(const HashGradient &other) {
    keys.insert(keys.end(), other.keys.begin(), other.keys.end());
    values.insert(values.end(), other.values.begin(), other.values.end());
}

void HashGradient::clear() {
    keys.clear();
    values.clear();
}

std::vector<std::pair<std::uint64_t, HashFeature>> HashGradient::reduce() const {
    std::vector<std::pair<std::uint64_t, HashFeature>> out;
    std::unordered_map<std::uint64_t, std::size_t> slot;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto [it, inserted] = slot.try_emplace(keys[i], out.size());
        if (inserted) {
            out.emplace_back(keys[i], values[i]);
            continue;
        }
        for (int f = 0; f < kHashFeatures; ++f) {
            out[it->second].second[f] += values[i][f];
        }
    }
    return out;
}

HashFeature HashGradient::total(std::uint64_t key) const {
    HashFeature sum{};
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (keys[i] == key) {
            for (int f = 0; f < kHashFeatures; ++f) {
                sum[f] += values[i][f];
            }
        }
    }
    return sum;
}

HashGrid::HashGrid(const HashGridConfig &config) : config_(config) {
    if (config.levels < 1 || config.base_resolution < 1 || config.max_resolution < config.base_resolution ||
        config.table_size == 0) {
        throw std::invalid_argument("invalid hash grid configuration");
    }
    const double growth =
        config.levels > 1 ? std::exp((std::log(double(config.max_resolution)) - std::log(double(config.base_resolution))) /
                                     (config.levels - 1))
                          : 1.0;
    std::uint64_t offset = 0;
    for (int l = 0; l < config.levels; ++l) {
        // Small epsilon so the last level lands on N_max despite rounding in pow.
        const int res = int(std::floor(config.base_resolution * std::pow(growth, l) + 1e-9));
        const std::uint64_t verts = std::uint64_t(res + 1) * (res + 1) * (res + 1);
        const bool dense = verts <= config.table_size;
        resolution_.push_back(res);
        dense_.push_back(dense);
        size_.push_back(dense ? verts : config.table_size);
        offset_.push_back(offset);
        offset += size_.back();
    }
    offset_.push_back(offset);

    values_.resize(offset);
    for (std::uint64_t key = 0; key < offset; ++key) {
        values_[key] = initial_feature(key);
    }
    written_.assign(offset, 0);
}

std::uint64_t HashGrid::entry_index(int level, const Eigen::Vector3i &v) const {
    if (dense_[level]) {
        const std::uint64_t n = std::uint64_t(resolution_[level]) + 1;
        return offset_[level] + std::uint64_t(v.x()) + n * (std::uint64_t(v.y()) + n * std::uint64_t(v.z()));
    }
    const std::uint32_t h = std::uint32_t(v.x()) * 1u ^ std::uint32_t(v.y()) * 2654435761u ^
                            std::uint32_t(v.z()) * 805459861u;
    return offset_[level] + (h % config_.table_size);
}

HashFeature HashGrid::initial_feature(std::uint64_t key) const {
    HashFeature f;
    for (int k = 0; k < kHashFeatures; ++k) {
        f[k] = config_.init_range * (2.0 * uniform_open(hash_key(config_.seed, 0x4A5Bull, key, k)) - 1.0);
    }
    return f;
}

void HashGrid::set_feature(std::uint64_t key, const HashFeature &value) {
    values_.at(key) = value;
    if (!written_[key]) {
        written_[key] = 1;
        ++written_count_;
    }
}

std::vector<std::uint64_t> HashGrid::written_keys() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(written_count_);
    for (std::uint64_t key = 0; key < written_.size(); ++key) {
        if (written_[key]) {
            keys.push_back(key);
        }
    }
    return keys;
}

HashGrid::Cell HashGrid::locate(const Eigen::Vector3d &x, const Aabb &aabb, int level) const {
    const int res = resolution_[level];
    Cell cell;
    const Eigen::Vector3d ext = aabb.extent();
    for (int k = 0; k < 3; ++k) {
        double p = (x[k] - aabb.min[k]) / ext[k];
        double ds = res / ext[k];
        if (p <= 0.0) {
            p = 0.0;
            ds = 0.0;
        } else if (p >= 1.0) {
            p = 1.0;
            ds = 0.0;
        }
        const double pos = p * res;
        const int base = std::min(int(std::floor(pos)), res - 1);
        cell.base[k] = base;
        cell.frac[k] = pos - base;
        cell.scale[k] = ds;
    }
    return cell;
}

void HashGrid::encode(const Eigen::Vector3d &x, const Aabb &aabb, double *out) const {
    for (int l = 0; l < config_.levels; ++l) {
        const Cell cell = locate(x, aabb, l);
        double acc[kHashFeatures] = {};
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1.0;
            Eigen::Vector3i v;
            for (int k = 0; k < 3; ++k) {
                const bool hi = (corner >> k) & 1;
                v[k] = cell.base[k] + (hi ? 1 : 0);
                w *= hi ? cell.frac[k] : 1.0 - cell.frac[k];
            }
            if (w == 0.0) {
                continue;
            }
            const HashFeature f = feature(entry_index(l, v));
            for (int c = 0; c < kHashFeatures; ++c) {
                acc[c] += w * f[c];
            }
        }
        for (int c = 0; c < kHashFeatures; ++c) {
            out[l * kHashFeatures + c] = acc[c];
        }
    }
}

Eigen::Vector3d HashGrid::encode_backward(const Eigen::Vector3d &x, const Aabb &aabb, const double *d_out,
                                          HashGradient &grad) const {
    Eigen::Vector3d d_x = Eigen::Vector3d::Zero();
    for (int l = 0; l < config_.levels; ++l) {
        const double *g = d_out + l * kHashFeatures;
        if (g[0] == 0.0 && g[1] == 0.0) {
            continue;
        }
        const Cell cell = locate(x, aabb, l);
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1.0;
            Eigen::Vector3d dw;
            Eigen::Vector3i v;
            double factors[3];
            for (int k = 0; k < 3; ++k) {
                const bool hi = (corner >> k) & 1;
                v[k] = cell.base[k] + (hi ? 1 : 0);
                factors[k] = hi ? cell.frac[k] : 1.0 - cell.frac[k];
                w *= factors[k];
            }
            for (int k = 0; k < 3; ++k) {
                const double sign = ((corner >> k) & 1) ? 1.0 : -1.0;
                dw[k] = sign * factors[(k + 1) % 3] * factors[(k + 2) % 3] * cell.scale[k];
            }
            const std::uint64_t key = entry_index(l, v);
            if (w != 0.0) {
                grad.add(key, {w * g[0], w * g[1]});
            }
            const HashFeature &f = feature(key);
            d_x += (f[0] * g[0] + f[1] * g[1]) * dw;
        }
    }
    return d_x;
}

} // namespace swag

#include "swag/transient.hpp"
#include "swag/errors.hpp"
#include "swag/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace swag {

namespace {

double concrete_logit(double delta_alpha, double temperature, double u) {
    return (std::log(std::abs(delta_alpha)) + std::log(u) - std::log1p(-u)) / temperature;
}

} // namespace

double sample_concrete(double delta_alpha, double temperature, double u) {
    if (std::abs(delta_alpha) < kDeltaAlphaZero) {
        return 0.0;
    }
    // Saturated samples are pulled back inside the open interval.
    const double s = sigmoid(concrete_logit(delta_alpha, temperature, u));
    return std::clamp(s, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

double sample_concrete_grad(double delta_alpha, double temperature, double u) {
    if (std::abs(delta_alpha) < kDeltaAlphaZero) {
        return 0.0;
    }
    const double x = concrete_logit(delta_alpha, temperature, u);
    return sigmoid(x) * sigmoid(-x) / (temperature * delta_alpha);
}

double concrete_cdf(double tau, double delta_alpha, double temperature) {
    if (tau <= 0.0) {
        return 0.0;
    }
    if (tau >= 1.0) {
        return 1.0;
    }
    if (std::abs(delta_alpha) < kDeltaAlphaZero) {
        return 1.0;
    }
    return sigmoid(temperature * logit(tau) - std::log(std::abs(delta_alpha)));
}

std::vector<double> accumulate_opacity_stats(std::span<const std::vector<double>> per_image) {
    if (per_image.empty()) {
        return {};
    }
    const std::size_t n = per_image.front().size();
    for (const auto &row : per_image) {
        if (row.size() != n) {
            throw DimensionMismatch("per-image opacity variation rows differ in length");
        }
    }
    // Welford updates: constant rows give exactly zero variance.
    std::vector<double> mean(n, 0.0);
    std::vector<double> var(n, 0.0);
    double count = 0.0;
    for (const auto &row : per_image) {
        count += 1.0;
        for (std::size_t g = 0; g < n; ++g) {
            const double d = row[g] - mean[g];
            mean[g] += d / count;
            var[g] += d * (row[g] - mean[g]);
        }
    }
    for (double &v : var) {
        v /= count;
    }
    return var;
}

std::vector<bool> classify_transient(std::span<const double> variances, double lambda) {
    const double threshold = std::max(lambda, kVarianceFloor);
    std::vector<bool> mask(variances.size());
    for (std::size_t i = 0; i < variances.size(); ++i) {
        mask[i] = variances[i] > threshold;
    }
    return mask;
}

} // namespace swag

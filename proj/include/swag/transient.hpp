#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace swag {

constexpr double kDeltaAlphaZero = 1e-12;
constexpr double kVarianceFloor = 1e-12;

/// Binary Concrete relaxation of the opacity variation:
/// sigmoid((log|delta| + log u - log(1-u)) / T). Defined as 0 when |delta| < 1e-12.
double sample_concrete(double delta_alpha, double temperature, double u);

// d sample_concrete / d delta_alpha (0 in the |delta| < 1e-12 region).
double sample_concrete_grad(double delta_alpha, double temperature, double u);

/// Closed-form CDF of the relaxed sample: P(sample <= tau).
double concrete_cdf(double tau, double delta_alpha, double temperature);

/// max(alpha - delta, 0).
inline double effective_opacity(double alpha, double delta) { return alpha - delta > 0.0 ? alpha - delta : 0.0; }

/**
 * Population variance over images of each Gaussian's sampled opacity
 * variation. `per_image[i][g]` is the value for image i, Gaussian g.
 */
std::vector<double> accumulate_opacity_stats(std::span<const std::vector<double>> per_image);

/// transient[g] = variance[g] > max(lambda, 1e-12).
std::vector<bool> classify_transient(std::span<const double> variances, double lambda);

} // namespace swag

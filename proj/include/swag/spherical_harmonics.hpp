#pragma once

#include <Eigen/Core>

namespace swag {

/// Real SH basis values up to `degree` for a unit direction, in the usual
/// graphics ordering (l, m) = (0,0), (1,-1), (1,0), (1,1), (2,-2) ...
void sh_basis(const Eigen::Vector3d &dir, int degree, double *out);

// d(basis_k)/d(dir) for each basis function; out has 3 * sh_coeff_count(degree) entries.
void sh_basis_gradient(const Eigen::Vector3d &dir, int degree, double *out);

/**
 * Color of one Gaussian seen along `view_dir`.
 *
 * `coeffs` is a coefficient-major, channel-minor block with at least
 * sh_coeff_count(degree) * 3 entries. The result is sum_k coeff_k * Y_k + 0.5,
 * clamped at zero per channel.
 */
Eigen::Vector3d evaluate_sh(const double *coeffs, const Eigen::Vector3d &view_dir, int degree);

/// Gradients of evaluate_sh. `d_coeffs` is accumulated into (not overwritten);
/// the returned vector is dL/d(view_dir).
Eigen::Vector3d evaluate_sh_backward(const double *coeffs, const Eigen::Vector3d &view_dir, int degree,
                                     const Eigen::Vector3d &d_color, double *d_coeffs);

} // namespace swag

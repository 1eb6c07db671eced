#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace eigenshrink {

/// f_k = (sum of the k largest entries of d) / (sum of all entries), k = 1..p.
/// Entries must be positive unless `allow_zeros` is set (sample eigenvalues with p > n).
std::vector<double> explained_fraction_curve(const std::vector<double>& d, bool allow_zeros = false);

/// Same curve accumulated from the smallest entry upward.
std::vector<double> ascending_fraction_curve(const std::vector<double>& d, bool allow_zeros = false);

/// min{k : f_k >= q} for q in (0, 1].
std::size_t components_to_retain(const std::vector<double>& curve, double q);

/// tr(W' Sigma W) for W with orthonormal columns (W'W = I within 1e-10).
double variation_attributable(const Eigen::MatrixXd& w, const Eigen::MatrixXd& sigma);

}  // namespace eigenshrink

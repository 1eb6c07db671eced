#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eigenshrink/spectral_core.hpp"

// Seeded generators for property tests. Every generator takes the engine by
// reference so a failing case can be replayed from the seed printed by the test.
namespace gen {

using Rng = std::mt19937_64;

enum class Shape { uniform, log_uniform, clusters, spiked, with_zeros };

std::string to_string(Shape s);

/// Random population spectrum of length p with entries in roughly [0.1, 50].
eigenshrink::SpectrumVector spectrum(Rng& rng, std::size_t p, Shape shape);
/// Shape drawn uniformly, zeros excluded unless `allow_zeros`.
eigenshrink::SpectrumVector spectrum(Rng& rng, std::size_t p, bool allow_zeros = false);

std::size_t integer(Rng& rng, std::size_t lo, std::size_t hi);
double uniform(Rng& rng, double lo, double hi);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Eigen::MatrixXd orthogonal(Rng& rng, std::size_t p);
/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
Eigen::MatrixXd spd(Rng& rng, std::size_t p, double lo = 0.5, double hi = 10.0);
Eigen::MatrixXd gaussian(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace gen

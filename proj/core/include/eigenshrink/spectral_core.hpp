#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace eigenshrink {

/// Relative threshold below which a spectrum entry counts as zero.
inline constexpr double kZeroRelativeThreshold = 1e-12;

/// Nonempty, nondecreasing vector of nonnegative reals.
class SpectrumVector {
 public:
  SpectrumVector() = default;
  /// Throws ValidationError unless `values` is nonempty, finite, nonnegative and sorted ascending.
  explicit SpectrumVector(std::vector<double> values);
  /// Sorts first, then validates.
  static SpectrumVector from_unsorted(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vector() const noexcept { return values_; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  double mean() const;
  double max() const { return values_.back(); }
  /// 1e-12 * mean, or 0 for an all-zero spectrum.
  double zero_threshold() const;
  /// Number of entries below zero_threshold().
  std::size_t zero_count() const;

 private:
  std::vector<double> values_;
};

/// Sample size n, dimension p and their ratio c = p/n.
class ConcentrationContext {
 public:
  ConcentrationContext(std::int64_t n, std::int64_t p);

  std::int64_t n() const noexcept { return n_; }
  std::int64_t p() const noexcept { return p_; }
  double c() const noexcept { return static_cast<double>(p_) / static_cast<double>(n_); }

 private:
  std::int64_t n_;
  std::int64_t p_;
};

/// Finite atomic distribution on [0, inf). Weights are renormalised to sum to one.
class DiscreteSpectralDistribution {
 public:
  /// Locations must be sorted ascending and nonnegative, weights nonnegative
  /// and summing to one within 1e-12.
  DiscreteSpectralDistribution(std::vector<double> locations, std::vector<double> weights);
  /// Equal weights on the entries of `t`.
  static DiscreteSpectralDistribution empirical(const SpectrumVector& t);

  std::span<const double> locations() const noexcept { return locations_; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// sup{x : H(x) <= u}, clamped to the largest location.
  double quantile(double u) const;

 private:
  std::vector<double> locations_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// H^{-1}((i - 0.5)/p), i = 1..p, with H^{-1}(u) = sup{x : H(x) <= u}.
SpectrumVector edf_quantiles(const DiscreteSpectralDistribution& h, std::size_t p);

/// sqrt((1/p) * sum (a_i - b_i)^2).
double spectral_distance_p(std::span<const double> a, std::span<const double> b);
inline double spectral_distance_p(const SpectrumVector& a, const SpectrumVector& b) {
  return spectral_distance_p(a.values(), b.values());
}

/// (1/p) * sum (a_i - b_i)^2.
double mean_squared_difference(std::span<const double> a, std::span<const double> b);
inline double mean_squared_difference(const SpectrumVector& a, const SpectrumVector& b) {
  return mean_squared_difference(a.values(), b.values());
}

/// 1e-12 * mean of `values`; zero when the mean is zero.
double zero_threshold(std::span<const double> values);

}  // namespace eigenshrink

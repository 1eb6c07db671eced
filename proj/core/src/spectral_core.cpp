#include "eigenshrink/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "eigenshrink/errors.hpp"

namespace eigenshrink {

SpectrumVector::SpectrumVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("spectrum is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v)) throw ValidationError("spectrum entry " + std::to_string(i) + " is not finite");
    if (v < 0.0) throw ValidationError("spectrum entry " + std::to_string(i) + " is negative");
    if (i > 0 && v < values_[i - 1])
      throw ValidationError("spectrum is not sorted ascending at index " + std::to_string(i));
  }
}

SpectrumVector SpectrumVector::from_unsorted(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return SpectrumVector(std::move(values));
}

double SpectrumVector::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double SpectrumVector::zero_threshold() const { return eigenshrink::zero_threshold(values_); }

std::size_t SpectrumVector::zero_count() const {
  const double thr = zero_threshold();
  if (thr == 0.0) return values_.size();
  return static_cast<std::size_t>(
      std::lower_bound(values_.begin(), values_.end(), thr) - values_.begin());
}

double zero_threshold(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return kZeroRelativeThreshold * mean;
}

ConcentrationContext::ConcentrationContext(std::int64_t n, std::int64_t p) : n_(n), p_(p) {
  if (n <= 0) throw ValidationError("sample size n must be positive");
  if (p <= 0) throw ValidationError("dimension p must be positive");
}

DiscreteSpectralDistribution::DiscreteSpectralDistribution(std::vector<double> locations,
                                                           std::vector<double> weights)
    : locations_(std::move(locations)), weights_(std::move(weights)) {
  if (locations_.empty()) throw ValidationError("distribution has no atoms");
  if (locations_.size() != weights_.size())
    throw ValidationError("locations and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    if (!std::isfinite(locations_[i]) || locations_[i] < 0.0)
      throw ValidationError("location " + std::to_string(i) + " is negative or not finite");
    if (i > 0 && locations_[i] < locations_[i - 1])
      throw ValidationError("locations are not sorted ascending");
    if (!std::isfinite(weights_[i]) || weights_[i] < 0.0)
      throw ValidationError("weight " + std::to_string(i) + " is negative or not finite");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("weights do not sum to one");
  cumulative_.resize(weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    acc += weights_[i];
    cumulative_[i] = acc;
  }
}

DiscreteSpectralDistribution DiscreteSpectralDistribution::empirical(const SpectrumVector& t) {
  std::vector<double> loc(t.begin(), t.end());
  std::vector<double> w(loc.size(), 1.0 / static_cast<double>(loc.size()));
  // 1/p summed p times can miss one by a few ulps; fix the last weight.
  const double head = std::accumulate(w.begin(), w.end() - 1, 0.0);
  w.back() = 1.0 - head;
  return DiscreteSpectralDistribution(std::move(loc), std::move(w));
}

double DiscreteSpectralDistribution::quantile(double u) const {
  // First atom whose cumulative weight exceeds u.
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) return locations_.back();
  return locations_[static_cast<std::size_t>(it - cumulative_.begin())];
}

SpectrumVector edf_quantiles(const DiscreteSpectralDistribution& h, std::size_t p) {
  if (p == 0) throw ValidationError("p must be positive");
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i)
    out[i] = h.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(p));
  return SpectrumVector(std::move(out));
}

double mean_squared_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("vectors differ in length");
  if (a.empty()) throw ValidationError("vectors are empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double spectral_distance_p(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(mean_squared_difference(a, b));
}

}  // namespace eigenshrink

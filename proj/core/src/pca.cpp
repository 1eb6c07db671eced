#include "eigenshrink/pca.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "eigenshrink/errors.hpp"

namespace eigenshrink {
namespace {

std::vector<double> cumulative_share(std::vector<double> d, bool descending, bool allow_zeros) {
  if (d.empty()) throw ValidationError("no eigenvalues given");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) throw ValidationError("eigenvalue " + std::to_string(i) + " is not finite");
    if (allow_zeros ? d[i] < 0.0 : !(d[i] > 0.0))
      throw ValidationError("eigenvalue " + std::to_string(i) + (allow_zeros ? " is negative" : " is not positive"));
  }
  if (descending) std::sort(d.begin(), d.end(), std::greater<>());
  else std::sort(d.begin(), d.end());
  double total = 0.0;
  for (double v : d) total += v;
  if (!(total > 0.0)) throw ValidationError("eigenvalues sum to zero");
  std::vector<double> f(d.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    acc += d[k];
    f[k] = acc / total;
  }
  f.back() = 1.0;
  return f;
}

}  // namespace

std::vector<double> explained_fraction_curve(const std::vector<double>& d, bool allow_zeros) {
  return cumulative_share(d, true, allow_zeros);
}

std::vector<double> ascending_fraction_curve(const std::vector<double>& d, bool allow_zeros) {
  return cumulative_share(d, false, allow_zeros);
}

std::size_t components_to_retain(const std::vector<double>& curve, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("target fraction must lie in (0, 1]");
  if (curve.empty()) throw ValidationError("empty curve");
  const auto it = std::lower_bound(curve.begin(), curve.end(), q);
  if (it == curve.end()) return curve.size();
  return static_cast<std::size_t>(it - curve.begin()) + 1;
}

double variation_attributable(const Eigen::MatrixXd& w, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || w.rows() != sigma.rows())
    throw ValidationError("W and Sigma differ in dimension");
  const Eigen::MatrixXd gram = w.transpose() * w;
  if ((gram - Eigen::MatrixXd::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff() > 1e-10)
    throw ValidationError("columns of W are not orthonormal");
  return (w.transpose() * sigma * w).trace();
}

}  // namespace eigenshrink

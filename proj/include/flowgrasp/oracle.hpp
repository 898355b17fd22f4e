#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "flowgrasp/pose.hpp"
#include "flowgrasp/rng.hpp"
#include "flowgrasp/types.hpp"

namespace flowgrasp {

// Normalized cell probabilities on an axis-aligned grid, up to 3 dimensions.
// Brute-force ground truth for distributional tests.
struct GridDensity {
  int dims = 0;
  VecXd lo, hi;              // domain box
  std::vector<int> resolution;
  std::vector<double> values;  // row-major over axes, sums to 1

  std::size_t cell_count() const { return values.size(); }

  double cell_width(int axis) const { return (hi(axis) - lo(axis)) / resolution[axis]; }

  // Flat index of the cell containing x, or -1 if outside the domain.
  long cell_index(const VecXd& x) const {
    long idx = 0;
    for (int a = 0; a < dims; ++a) {
      if (x(a) < lo(a) || x(a) > hi(a)) return -1;
      int c = static_cast<int>((x(a) - lo(a)) / cell_width(a));
      if (c == resolution[a]) c = resolution[a] - 1;  // right edge
      idx = idx * resolution[a] + c;
    }
    return idx;
  }

  VecXd cell_center(std::size_t flat) const {
    VecXd x(dims);
    for (int a = dims - 1; a >= 0; --a) {
      const int c = static_cast<int>(flat % resolution[a]);
      flat /= resolution[a];
      x(a) = lo(a) + (c + 0.5) * cell_width(a);
    }
    return x;
  }
};

// Quadrature of the target p(x) proportional to D(x) * q_base(x) at cell
// centers. Degenerate (all-zero) targets are an error.
inline GridDensity grid_target(const std::function<double(const VecXd&)>& classifier_product,
                               const std::function<double(const VecXd&)>& base,
                               const VecXd& lo, const VecXd& hi,
                               const std::vector<int>& resolution) {
  const int dims = static_cast<int>(resolution.size());
  if (dims < 1 || dims > 3) throw std::invalid_argument("grid dims must be 1..3");
  if (lo.size() != dims || hi.size() != dims)
    throw std::invalid_argument("domain dimension mismatch");
  std::size_t n = 1;
  for (int r : resolution) {
    if (r < 1 || r > 512) throw std::invalid_argument("resolution out of range");
    n *= static_cast<std::size_t>(r);
  }
  GridDensity grid;
  grid.dims = dims;
  grid.lo = lo;
  grid.hi = hi;
  grid.resolution = resolution;
  grid.values.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const VecXd x = grid.cell_center(i);
    const double v = classifier_product(x) * base(x);
    if (v < 0.0) throw std::invalid_argument("negative density");
    grid.values[i] = v;
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("degenerate all-zero target");
  for (auto& v : grid.values) v /= total;
  return grid;
}

// I.i.d. samples: CDF inversion over cells, uniform within the cell.
inline std::vector<VecXd> rejection_sample(const GridDensity& target, int n,
                                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  std::vector<double> cdf(target.values.size());
  std::partial_sum(target.values.begin(), target.values.end(), cdf.begin());
  cdf.back() = 1.0;
  Rng rng(seed);
  std::vector<VecXd> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    const std::size_t cell =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const VecXd center = target.cell_center(cell);
    VecXd x(target.dims);
    for (int a = 0; a < target.dims; ++a) {
      const double w = target.cell_width(a);
      x(a) = center(a) + (rng.uniform01() - 0.5) * w;
    }
    out.push_back(std::move(x));
  }
  return out;
}

// Half L1 distance between the empirical histogram and the grid target.
// Out-of-domain samples count fully against the distance.
inline double tv_distance(const std::vector<VecXd>& samples, const GridDensity& target) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::vector<double> emp(target.cell_count(), 0.0);
  double outside = 0.0;
  const double w = 1.0 / samples.size();
  for (const auto& x : samples) {
    const long idx = target.cell_index(x);
    if (idx < 0)
      outside += w;
    else
      emp[idx] += w;
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < emp.size(); ++i) l1 += std::abs(emp[i] - target.values[i]);
  return 0.5 * (l1 + outside);
}

// Central finite differences; the arbiter for every gradient contract.
inline VecXd fd_gradient(const std::function<double(const VecXd&)>& fn, const VecXd& x,
                         double h = 1e-6) {
  if (!(h > 0.0)) throw std::invalid_argument("h must be > 0");
  VecXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VecXd hi = x, lo = x;
    hi(i) += h;
    lo(i) -= h;
    g(i) = (fn(hi) - fn(lo)) / (2.0 * h);
  }
  return g;
}

// Chordal rotation distance d = min(|r - r_hat|, |r + r_hat|) and the loss
// term 2 d^2 (4 - d^2).
inline double chordal_rotation_loss(const Quatd& r, const Quatd& r_hat) {
  const Eigen::Vector4d a(r.w(), r.x(), r.y(), r.z());
  const Eigen::Vector4d b(r_hat.w(), r_hat.x(), r_hat.y(), r_hat.z());
  const double d = std::min((a - b).norm(), (a + b).norm());
  const double d2 = d * d;
  return 2.0 * d2 * (4.0 - d2);
}

// Composite pose-reconstruction metric: weighted BCE + squared translation
// error + chordal rotation term.
inline double composite_loss(double s, double s_hat, const Vec3d& t, const Vec3d& t_hat,
                             const Quatd& r, const Quatd& r_hat, double alpha1 = 0.85,
                             double alpha2 = 0.149, double alpha3 = 0.001) {
  const double p = clamp_prob(s_hat);
  const double bce = -(s * std::log(p) + (1.0 - s) * std::log(1.0 - p));
  const double trans = (t - t_hat).squaredNorm();
  return alpha1 * bce + alpha2 * trans + alpha3 * chordal_rotation_loss(r, r_hat);
}

}  // namespace flowgrasp

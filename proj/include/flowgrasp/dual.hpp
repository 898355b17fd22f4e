#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace flowgrasp {

// Forward-mode dual number carrying N derivative lanes.
// Dual<N>{v, d} behaves like v while d tracks d v / d x_i for the
// N seeded inputs. Comparisons act on the value part so branching
// code (min, clamping, iteration exits) works unchanged.
template <int N>
struct Dual {
  using Partials = Eigen::Matrix<double, N, 1>;

  double v{0.0};
  Partials d{Partials::Zero()};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit from constants
  Dual(double value, const Partials& deriv) : v(value), d(deriv) {}

  static Dual seeded(double value, int lane) {
    Dual x(value);
    x.d[lane] = 1.0;
    return x;
  }

  Dual operator-() const { return {-v, -d}; }

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }
};

template <int N> Dual<N> sin(const Dual<N>& x) { return {std::sin(x.v), std::cos(x.v) * x.d}; }
template <int N> Dual<N> cos(const Dual<N>& x) { return {std::cos(x.v), -std::sin(x.v) * x.d}; }

template <int N> Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return {e, e * x.d};
}

template <int N> Dual<N> log(const Dual<N>& x) { return {std::log(x.v), x.d / x.v}; }

template <int N> Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.v);
  // subgradient 0 at the clamp boundary; callers clamp before sqrt
  const double scale = s > 0.0 ? 0.5 / s : 0.0;
  return {s, scale * x.d};
}

template <int N> Dual<N> abs(const Dual<N>& x) {
  return x.v < 0.0 ? -x : x;
}

template <int N> Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
  const double den = x.v * x.v + y.v * y.v;
  return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / den};
}

template <int N> Dual<N> asin(const Dual<N>& x) {
  return {std::asin(x.v), x.d / std::sqrt(1.0 - x.v * x.v)};
}

template <int N> Dual<N> tanh(const Dual<N>& x) {
  const double t = std::tanh(x.v);
  return {t, (1.0 - t * t) * x.d};
}

template <int N> Dual<N> min(const Dual<N>& a, const Dual<N>& b) { return a.v <= b.v ? a : b; }
template <int N> Dual<N> max(const Dual<N>& a, const Dual<N>& b) { return a.v >= b.v ? a : b; }

template <int N> double value_of(const Dual<N>& x) { return x.v; }
inline double value_of(double x) { return x; }

template <int N> bool is_finite(const Dual<N>& x) {
  return std::isfinite(x.v) && x.d.allFinite();
}
inline bool is_finite(double x) { return std::isfinite(x); }

using Dual6 = Dual<6>;

}  // namespace flowgrasp

namespace Eigen {

template <int N>
struct NumTraits<flowgrasp::Dual<N>> : NumTraits<double> {
  using Real = flowgrasp::Dual<N>;
  using NonInteger = flowgrasp::Dual<N>;
  using Nested = flowgrasp::Dual<N>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
};

}  // namespace Eigen

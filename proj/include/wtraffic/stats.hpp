#pragma once

// Robust statistics over dense Eigen expressions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/types.hpp"

namespace wtraffic {

/// Inverse of the complementary error function on (0, 2), by Newton's method
/// on std::erfc.
template <typename Scalar = double>
Scalar erfc_inv(Scalar y) {
  if (!(y > Scalar(0) && y < Scalar(2))) {
    throw DomainError("erfc_inv argument must lie in (0, 2)");
  }
  // erfc(-x) = 2 - erfc(x); solving on the small side keeps the residual accurate.
  if (y > Scalar(1)) return -erfc_inv(Scalar(2) - y);
  Scalar x = 0;
  if (y < Scalar(0.05)) x = std::sqrt(-std::log(y));
  const Scalar k = Scalar(2) / std::sqrt(std::numbers::pi_v<Scalar>);
  for (int it = 0; it < 100; ++it) {
    const Scalar f = std::erfc(x) - y;
    const Scalar df = -k * std::exp(-x * x);
    const Scalar step = f / df;
    x -= step;
    if (std::abs(step) <= std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(x))) {
      break;
    }
  }
  return x;
}

/// Consistency constant that makes the MAD estimate a normal standard deviation:
/// -1 / (sqrt(2) * erfcinv(3/2)), about 1.4826.
template <typename Scalar = double>
Scalar mad_constant() {
  return Scalar(-1) / (std::numbers::sqrt2_v<Scalar> * erfc_inv(Scalar(1.5)));
}

namespace detail {

template <typename Scalar>
Scalar median_inplace(std::vector<Scalar>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const Scalar upper = v[mid];
  if (n % 2 == 1) return upper;
  const Scalar lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / Scalar(2);
}

template <typename Derived>
std::vector<typename Derived::Scalar> to_vector(const Eigen::DenseBase<Derived>& x) {
  std::vector<typename Derived::Scalar> v(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) v[static_cast<std::size_t>(i)] = x.derived().coeff(i);
  return v;
}

}  // namespace detail

template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& x) {
  if (x.size() == 0) throw DomainError("median of an empty series");
  auto v = detail::to_vector(x);
  return detail::median_inplace(v);
}

/// c_MAD * median(|a_i - median(a)|).
template <typename Derived>
typename Derived::Scalar scaled_mad(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw DomainError("scaled MAD of an empty series");
  auto v = detail::to_vector(x);
  const Scalar med = detail::median_inplace(v);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    v[static_cast<std::size_t>(i)] = std::abs(x.derived().coeff(i) - med);
  }
  return mad_constant<Scalar>() * detail::median_inplace(v);
}

/// Quantile with linear interpolation between order statistics (position q*(n-1)).
template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& x, double q) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw DomainError("quantile of an empty series");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must be in [0, 1]");
  auto v = detail::to_vector(x);
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const Scalar frac = static_cast<Scalar>(pos - static_cast<double>(lo));
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace wtraffic

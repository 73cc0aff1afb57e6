#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ipddp/problem.hpp"

namespace ipddp::detail {

using VectorFunction = std::function<Vector(const Vector&)>;

/// Step for first-order central differences: cbrt(eps) scaled by 1 + |z|.
inline double first_order_step(double z) {
  static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  return base * (1.0 + std::abs(z));
}

/// Step for second-order central differences of values: eps^(1/4) scaled by 1 + |z|.
inline double second_order_step(double z) {
  static const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  return base * (1.0 + std::abs(z));
}

/// Central-difference Jacobian of F at z (rows = outputs, cols = inputs) with
/// one Richardson extrapolation step, so the truncation error is O(h^4).
inline Matrix jacobian(const VectorFunction& F, const Vector& z) {
  const Vector f0 = F(z);
  Matrix J(f0.size(), z.size());
  Vector zp = z;
  auto central = [&](Eigen::Index j, double h) {
    zp(j) = z(j) + h;
    const Vector fp = F(zp);
    zp(j) = z(j) - h;
    const Vector fm = F(zp);
    zp(j) = z(j);
    return Vector((fp - fm) / (2.0 * h));
  };
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double h = 8.0 * first_order_step(z(j));
    J.col(j) = (4.0 * central(j, 0.5 * h) - central(j, h)) / 3.0;
  }
  return J;
}

/// Central-difference Hessians of every output of F at z, one k x k matrix per output.
inline std::vector<Matrix> hessians(const VectorFunction& F, const Vector& z) {
  const Eigen::Index k = z.size();
  const Vector f0 = F(z);
  std::vector<Matrix> H(f0.size(), Matrix::Zero(k, k));
  Vector zp = z;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double hi = second_order_step(z(i));
    zp(i) = z(i) + hi;
    const Vector fp = F(zp);
    zp(i) = z(i) - hi;
    const Vector fm = F(zp);
    zp(i) = z(i);
    const Vector diag = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index r = 0; r < f0.size(); ++r) H[r](i, i) = diag(r);
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double hj = second_order_step(z(j));
      auto eval = [&](double si, double sj) {
        Vector zz = z;
        zz(i) += si * hi;
        zz(j) += sj * hj;
        return F(zz);
      };
      const Vector mixed = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hi * hj);
      for (Eigen::Index r = 0; r < f0.size(); ++r) {
        H[r](i, j) = mixed(r);
        H[r](j, i) = mixed(r);
      }
    }
  }
  return H;
}

inline Vector stack(const Vector& x, const Vector& u) {
  Vector z(x.size() + u.size());
  z << x, u;
  return z;
}

}  // namespace ipddp::detail

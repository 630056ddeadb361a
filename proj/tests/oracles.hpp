// Test-only oracles, kept independent of the library's optimizer and metric
// paths: dense/adaptive grids over the 4-angle product-state parametrization
// for 2x2 problems, and plain Monte-Carlo extremes.

#pragma once

#include "entcap/linalg.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

using entcap::Complex;
using entcap::Matrix;
using entcap::Vector;

inline Vector bloch_state(double theta, double phi) {
  Vector v(2);
  v(0) = std::cos(theta);
  v(1) = std::exp(Complex(0.0, phi)) * std::sin(theta);
  return v;
}

inline Vector product4(double ta, double pa, double tb, double pb) {
  const Vector a = bloch_state(ta, pa);
  const Vector b = bloch_state(tb, pb);
  Vector psi(4);
  psi << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return psi;
}

// Adaptive grid extremum of f over the 4-angle parametrization of 2x2
// product states.  coarse^4 evaluations, then `levels` of 5x refinement
// around the incumbent (11^4 points each), which reaches the resolution of a
// dense grid of (coarse * 5^levels)^4.
inline std::pair<double, std::array<double, 4>> grid_extremum_2x2(
    const std::function<double(const Vector&)>& f, bool maximize,
    int coarse = 24, int levels = 3) {
  const double sign = maximize ? 1.0 : -1.0;
  double best = -1e300;
  std::array<double, 4> arg{};
  const double pi = std::numbers::pi;
  for (int i = 0; i < coarse; ++i) {
    const double ta = (pi / 2) * i / (coarse - 1.0);
    for (int j = 0; j < coarse; ++j) {
      const double pa = 2 * pi * j / coarse;
      for (int k = 0; k < coarse; ++k) {
        const double tb = (pi / 2) * k / (coarse - 1.0);
        for (int l = 0; l < coarse; ++l) {
          const double pb = 2 * pi * l / coarse;
          const double v = sign * f(product4(ta, pa, tb, pb));
          if (v > best) {
            best = v;
            arg = {ta, pa, tb, pb};
          }
        }
      }
    }
  }
  std::array<double, 4> h{pi / 2 / coarse, 2 * pi / coarse, pi / 2 / coarse,
                          2 * pi / coarse};
  for (int lev = 0; lev < levels; ++lev) {
    for (auto& hh : h) {
      hh /= 5.0;
    }
    const std::array<double, 4> center = arg;
    for (int i = -5; i <= 5; ++i) {
      for (int j = -5; j <= 5; ++j) {
        for (int k = -5; k <= 5; ++k) {
          for (int l = -5; l <= 5; ++l) {
            const double v = sign * f(product4(center[0] + i * h[0],
                                               center[1] + j * h[1],
                                               center[2] + k * h[2],
                                               center[3] + l * h[3]));
            if (v > best) {
              best = v;
              arg = {center[0] + i * h[0], center[1] + j * h[1],
                     center[2] + k * h[2], center[3] + l * h[3]};
            }
          }
        }
      }
    }
  }
  return {sign * best, arg};
}

// max over 2x2 product states of d_psi(U, V) = sqrt(1 - |<psi|U^dag V|psi>|^2)
inline double grid_max_d_product(const Matrix& u, const Matrix& v) {
  const Matrix w = u.adjoint() * v;
  auto f = [&](const Vector& psi) {
    const Complex ov = (psi.adjoint() * (w * psi))(0);
    return std::sqrt(std::max(0.0, 1.0 - std::norm(ov)));
  };
  return grid_extremum_2x2(f, true).first;
}

// min over 2x2 product inputs of the largest Schmidt coefficient of U psi
inline double grid_min_largest_schmidt(const Matrix& u) {
  auto f = [&](const Vector& psi) {
    const Vector out = u * psi;
    Eigen::Matrix2cd coeff;
    coeff << out(0), out(1), out(2), out(3);
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(coeff);
    return svd.singularValues()(0);
  };
  return grid_extremum_2x2(f, false).first;
}

// sampled maximum of d_psi over Haar-random pure states of dimension dim
inline double sampled_max_d(const Matrix& w, int dim, int samples,
                            std::uint64_t seed) {
  entcap::Rng rng(seed);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vector psi = entcap::random_state_vector(dim, rng);
    const Complex ov = (psi.adjoint() * (w * psi))(0);
    best = std::max(best, std::sqrt(std::max(0.0, 1.0 - std::norm(ov))));
  }
  return best;
}

// sampled minimum over product states of sqrt(1 - |<phi|psi>|^2)
inline double sampled_min_product_distance(const Vector& psi, int m, int n,
                                           int samples, std::uint64_t seed) {
  entcap::Rng rng(seed);
  double best = 1.0;
  for (int s = 0; s < samples; ++s) {
    const Vector a = entcap::random_state_vector(m, rng);
    const Vector b = entcap::random_state_vector(n, rng);
    Complex ov = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        ov += std::conj(a(i) * b(j)) * psi(i * n + j);
      }
    }
    best = std::min(best, std::sqrt(std::max(0.0, 1.0 - std::norm(ov))));
  }
  return best;
}

}  // namespace oracles

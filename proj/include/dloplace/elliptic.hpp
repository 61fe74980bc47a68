#pragma once

// Complete/incomplete elliptic integrals and Jacobi elliptic functions.
//
// Every function here takes the elliptic *modulus* k, not the parameter
// m = k^2. Supported range is 0 <= k <= 1 - 1e-9.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dloplace {

inline constexpr double kMaxModulus = 1.0 - 1e-9;

/// Elliptic modulus k in [0, 1 - 1e-9].
class Modulus {
 public:
  explicit Modulus(double k) : k_(k) {
    if (!(k >= 0.0) || k > kMaxModulus) {
      throw std::domain_error("elliptic modulus out of range [0, 1-1e-9]: " +
                              std::to_string(k));
    }
  }
  double value() const { return k_; }
  double complement() const { return std::sqrt((1.0 - k_) * (1.0 + k_)); }

 private:
  double k_;
};

namespace detail {

// Carlson's symmetric integrals (duplication algorithm).
inline double carlson_rf(double x, double y, double z) {
  for (int i = 0; i < 64; ++i) {
    const double mu = (x + y + z) / 3.0;
    const double dx = 1.0 - x / mu, dy = 1.0 - y / mu, dz = 1.0 - z / mu;
    const double eps = std::fmax(std::fabs(dx), std::fmax(std::fabs(dy), std::fabs(dz)));
    if (eps < 1e-4) {
      const double e2 = dx * dy - dz * dz;
      const double e3 = dx * dy * dz;
      return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) /
             std::sqrt(mu);
    }
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lam = sx * (sy + sz) + sy * sz;
    x = (x + lam) / 4.0;
    y = (y + lam) / 4.0;
    z = (z + lam) / 4.0;
  }
  return 1.0 / std::sqrt((x + y + z) / 3.0);
}

inline double carlson_rd(double x, double y, double z) {
  double sum = 0.0, fac = 1.0;
  for (int i = 0; i < 64; ++i) {
    const double mu = (x + y + 3.0 * z) / 5.0;
    const double dx = 1.0 - x / mu, dy = 1.0 - y / mu, dz = 1.0 - z / mu;
    const double eps = std::fmax(std::fabs(dx), std::fmax(std::fabs(dy), std::fabs(dz)));
    if (eps < 1e-4) {
      const double ea = dx * dy, eb = dz * dz;
      const double ec = ea - eb, ed = ea - 6.0 * eb, ee = ed + ec + ec;
      const double s = ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 9.0 / 52.0 * dz * ee) +
                       dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + dz * 3.0 / 26.0 * ea));
      return 3.0 * sum + fac * (1.0 + s) / (mu * std::sqrt(mu));
    }
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lam = sx * (sy + sz) + sy * sz;
    sum += fac / (sz * (z + lam));
    fac /= 4.0;
    x = (x + lam) / 4.0;
    y = (y + lam) / 4.0;
    z = (z + lam) / 4.0;
  }
  return 3.0 * sum;
}

// E(phi | k) for |phi| <= pi/2.
inline double incomplete_e_principal(double phi, double k) {
  const double s = std::sin(phi), c = std::cos(phi);
  const double k2 = k * k;
  const double s2 = s * s;
  const double q = 1.0 - k2 * s2;
  return s * carlson_rf(c * c, q, 1.0) - k2 * s * s2 * carlson_rd(c * c, q, 1.0) / 3.0;
}

}  // namespace detail

/// Arithmetic-geometric mean ladder for a fixed modulus. Precomputing it
/// lets shape evaluation amortize the per-k work over many arclengths.
class JacobiLadder {
 public:
  static constexpr int kMaxLevels = 16;

  explicit JacobiLadder(Modulus k) : k_(k.value()) {
    double a = 1.0, b = k.complement(), c = k_;
    a_[0] = a;
    c_[0] = c;
    double sum = 0.5 * c * c;  // sum_n 2^(n-1) c_n^2
    double pow2 = 0.5;
    levels_ = 0;
    while (std::fabs(c) > 1e-17 * a && levels_ + 1 < kMaxLevels) {
      const double an = 0.5 * (a + b);
      const double bn = std::sqrt(a * b);
      c = 0.5 * (a - b);
      a = an;
      b = bn;
      ++levels_;
      a_[levels_] = a;
      c_[levels_] = c;
      pow2 *= 2.0;
      sum += pow2 * c * c;
    }
    K_ = std::numbers::pi / (2.0 * a);
    E_ = K_ * (1.0 - sum);
  }

  double modulus() const { return k_; }
  double K() const { return K_; }
  double E() const { return E_; }

  /// Amplitude am(u | k); am(u + 2K) = am(u) + pi.
  double am(double u) const {
    if (k_ == 0.0) return u;
    const double periods = std::nearbyint(u / (2.0 * K_));
    const double r = u - periods * 2.0 * K_;
    double phi = std::ldexp(a_[levels_] * r, levels_);
    for (int n = levels_; n >= 1; --n) {
      phi = 0.5 * (phi + std::asin(c_[n] / a_[n] * std::sin(phi)));
    }
    return phi + periods * std::numbers::pi;
  }

  struct Triple {
    double sn, cn, dn;
  };

  Triple sncndn(double u) const {
    const double phi = am(u);
    const double sn = std::sin(phi);
    return {sn, std::cos(phi), std::sqrt(1.0 - k_ * k_ * sn * sn)};
  }

  /// Incomplete integral of the second kind, any real phi.
  double incomplete_E(double phi) const {
    const double periods = std::nearbyint(phi / std::numbers::pi);
    const double r = phi - periods * std::numbers::pi;
    return 2.0 * periods * E_ + detail::incomplete_e_principal(r, k_);
  }

 private:
  double k_;
  double K_ = 0.0;
  double E_ = 0.0;
  int levels_ = 0;
  std::array<double, kMaxLevels> a_{};
  std::array<double, kMaxLevels> c_{};
};

/// Complete elliptic integral of the first kind K(k).
inline double complete_K(Modulus k) { return JacobiLadder(k).K(); }

/// Complete elliptic integral of the second kind E(k).
inline double complete_E(Modulus k) { return JacobiLadder(k).E(); }

inline double jacobi_am(double u, Modulus k) { return JacobiLadder(k).am(u); }

inline JacobiLadder::Triple jacobi_sncndn(double u, Modulus k) {
  return JacobiLadder(k).sncndn(u);
}

/// E(phi | k) with E(phi + pi) = E(phi) + 2 E(k).
inline double incomplete_E(double phi, Modulus k) { return JacobiLadder(k).incomplete_E(phi); }

}  // namespace dloplace

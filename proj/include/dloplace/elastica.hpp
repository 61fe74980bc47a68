#pragma once

// Free-space inflectional elastica: closed-form shapes, energy, and the
// optimal-control consistency checks (Hamiltonian first integral and the
// costate / bending-law relation).
//
// Curvature convention: kappa(s) = -2 k w cn(w (s + s0), k), w = 4 K(k) / Ltilde.
// With this sign an s0 = Ltilde/4 rod lying along +x bends upward off its
// tip, and the elastica axis sits at phi0 = phi_infl + acos(1 - 2k^2).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dloplace/elliptic.hpp"

namespace dloplace {

inline constexpr double kDegenerateModulus = 1e-6;

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Shape parameters (k, s0, Ltilde) of an inflectional elastica.
struct ElasticaParams {
  double k = 0.0;
  double s0 = 0.0;      // phase, meters, stored modulo Ltilde
  double Ltilde = 1.0;  // full-period length, meters

  ElasticaParams() = default;
  ElasticaParams(double k_, double s0_, double Ltilde_) : k(k_), s0(s0_), Ltilde(Ltilde_) {
    if (!(Ltilde > 0.0) || !std::isfinite(Ltilde)) {
      throw std::invalid_argument("Ltilde must be positive");
    }
    Modulus{k};  // range check
    s0 = std::fmod(s0, Ltilde);
    if (s0 < 0.0) s0 += Ltilde;
    if (s0 >= Ltilde) s0 = 0.0;
  }

  bool degenerate() const { return k < kDegenerateModulus; }
  double phase() const { return s0 / Ltilde; }

  bool operator==(const ElasticaParams&) const = default;
};

/// Base frame of the rod at s = 0. z and theta are carried for the
/// semi-spatial pose but never planned over.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  std::optional<double> z;
  std::optional<double> theta;

  Pose() = default;
  Pose(double x_, double y_, double phi_) : x(x_), y(y_), phi(wrap_angle(phi_)) {}

  bool operator==(const Pose&) const = default;
};

struct StiffnessSpec {
  double EI = 1.0;  // N m^2
  double L = 1.0;   // m

  StiffnessSpec() = default;
  StiffnessSpec(double EI_, double L_) : EI(EI_), L(L_) {
    if (!(EI > 0.0) || !(L > 0.0)) throw std::invalid_argument("EI and L must be positive");
  }
  bool operator==(const StiffnessSpec&) const = default;
};

struct DLOState {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double kappa = 0.0;
};

/// Arclength-sampled rod. For contact shapes the first `contact_length`
/// meters lie on the surface and `params` describe the free portion, whose
/// local arclength starts at s = contact_length.
struct DLOShape {
  std::vector<DLOState> samples;
  ElasticaParams params;
  Pose base;
  StiffnessSpec stiffness;
  double contact_length = 0.0;

  std::size_t size() const { return samples.size(); }
  const DLOState& front() const { return samples.front(); }
  const DLOState& back() const { return samples.back(); }
};

struct CostateRecord {
  std::vector<double> s;
  std::vector<double> lambda_x;
  std::vector<double> lambda_y;
  std::vector<double> lambda_phi;
};

inline double angular_frequency(const ElasticaParams& p) {
  if (!(p.Ltilde > 0.0)) throw std::invalid_argument("Ltilde must be positive");
  return 4.0 * complete_K(Modulus{p.k}) / p.Ltilde;
}

inline double curvature_at(const ElasticaParams& p, double s) {
  if (p.degenerate()) return 0.0;
  const JacobiLadder ladder{Modulus{p.k}};
  const double w = 4.0 * ladder.K() / p.Ltilde;
  return -2.0 * p.k * w * ladder.sncndn(w * (s + p.s0)).cn;
}

namespace detail {

// Closed-form free elastica evaluated at local arclengths `s` (from its own
// base). Writes positions, tangents and curvatures.
struct FreeElastica {
  ElasticaParams params;
  JacobiLadder ladder;
  double w;
  double u0, am0, e0, cn0;
  double axis;  // phi0, elastica axis angle
  double ca, sa;
  Pose base;

  FreeElastica(const Pose& b, const ElasticaParams& p)
      : params(p), ladder(Modulus{p.k}), base(b) {
    w = 4.0 * ladder.K() / p.Ltilde;
    u0 = w * p.s0;
    am0 = ladder.am(u0);
    e0 = ladder.incomplete_E(am0);
    cn0 = std::cos(am0);
    const double theta0 = -2.0 * std::asin(p.k * std::sin(am0));
    axis = b.phi - theta0;
    ca = std::cos(axis);
    sa = std::sin(axis);
  }

  DLOState at(double s) const {
    if (params.degenerate()) {
      return {s, base.x + s * std::cos(base.phi), base.y + s * std::sin(base.phi), base.phi, 0.0};
    }
    const double u = w * (s + params.s0);
    const double am = ladder.am(u);
    const double sn = std::sin(am), cn = std::cos(am);
    const double X = (2.0 * (ladder.incomplete_E(am) - e0) - (u - u0)) / w;
    const double Y = 2.0 * params.k * (cn - cn0) / w;
    return {s, base.x + ca * X - sa * Y, base.y + sa * X + ca * Y,
            axis - 2.0 * std::asin(params.k * sn), -2.0 * params.k * w * cn};
  }
};

inline void check_count(int n) {
  if (n < 2) throw std::invalid_argument("shape needs at least 2 samples");
}

}  // namespace detail

/// Closed-form shape of a free rod of length stiffness.L, n uniform samples.
inline DLOShape eval_shape(const Pose& base, const ElasticaParams& params,
                           const StiffnessSpec& stiffness, int n = 200) {
  detail::check_count(n);
  const detail::FreeElastica el(base, params);
  DLOShape shape{{}, params, base, stiffness, 0.0};
  shape.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = stiffness.L * static_cast<double>(i) / static_cast<double>(n - 1);
    shape.samples.push_back(el.at(s));
  }
  shape.samples.front().x = base.x;
  shape.samples.front().y = base.y;
  return shape;
}

/// (EI/2) * integral of kappa^2, composite Simpson over the samples.
inline double elastic_energy(const DLOShape& shape) {
  const auto& sm = shape.samples;
  if (sm.size() < 2) throw std::invalid_argument("energy needs at least 2 samples");
  const std::size_t intervals = sm.size() - 1;
  const double h = (sm.back().s - sm.front().s) / static_cast<double>(intervals);
  auto f = [&](std::size_t i) { return sm[i].kappa * sm[i].kappa; };
  double integral = 0.0;
  std::size_t simpson_end = intervals;
  if (intervals == 1) {
    integral = 0.5 * h * (f(0) + f(1));
    simpson_end = 0;
  } else if (intervals % 2 == 1) {
    // Simpson 3/8 over the last three intervals.
    const std::size_t j = intervals - 3;
    integral += 3.0 * h / 8.0 * (f(j) + 3.0 * f(j + 1) + 3.0 * f(j + 2) + f(j + 3));
    simpson_end = j;
  }
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
    integral += h / 3.0 * (f(i) + 4.0 * f(i + 1) + f(i + 2));
  }
  return 0.5 * shape.stiffness.EI * integral;
}

inline double lambda_r(const ElasticaParams& p, const StiffnessSpec& st) {
  if (p.degenerate()) throw std::domain_error("lambda_r undefined for a straight rod");
  const double w = angular_frequency(p);
  return st.EI * w * w;
}

/// Axis angle from the tangent at an inflection point. branch = +1 for the
/// s0 = Ltilde/4 inflection, -1 for s0 = 3 Ltilde/4.
inline double elastica_axis_angle(const ElasticaParams& p, double phi_at_inflection, int branch) {
  if (p.degenerate()) throw std::domain_error("elastica axis undefined for a straight rod");
  const double sign = branch >= 0 ? 1.0 : -1.0;
  return wrap_angle(phi_at_inflection + sign * std::acos(1.0 - 2.0 * p.k * p.k));
}

namespace detail {

// Index of the first sample on the free portion and the axis angle of that
// portion, recovered from the sample tangent and the closed-form phase.
struct FreeFrame {
  std::size_t first;
  double axis;
  double w;
};

inline FreeFrame free_frame(const DLOShape& shape) {
  const auto& p = shape.params;
  if (p.degenerate()) throw std::domain_error("operation undefined for a straight rod");
  const JacobiLadder ladder{Modulus{p.k}};
  const double w = 4.0 * ladder.K() / p.Ltilde;
  std::size_t first = 0;
  while (first < shape.samples.size() &&
         shape.samples[first].s < shape.contact_length - 1e-12 * shape.stiffness.L) {
    ++first;
  }
  if (first >= shape.samples.size()) throw std::domain_error("shape has no free portion");
  const auto& st = shape.samples[first];
  const double u = w * (st.s - shape.contact_length + p.s0);
  const double theta = -2.0 * std::asin(p.k * ladder.sncndn(u).sn);
  return {first, st.phi - theta, w};
}

}  // namespace detail

/// max |lambda_r cos(phi - phi0) - EI kappa^2 / 2 - H*| / lambda_r over the
/// free samples, H* taken at the first free sample.
inline double hamiltonian_residual(const DLOShape& shape) {
  if (shape.samples.size() < 10) throw std::invalid_argument("residual needs >= 10 samples");
  const auto frame = detail::free_frame(shape);
  const double lr = shape.stiffness.EI * frame.w * frame.w;
  auto H = [&](const DLOState& st) {
    return lr * std::cos(st.phi - frame.axis) - 0.5 * shape.stiffness.EI * st.kappa * st.kappa;
  };
  const double h_star = H(shape.samples[frame.first]);
  double worst = 0.0;
  for (std::size_t i = frame.first; i < shape.samples.size(); ++i) {
    worst = std::max(worst, std::fabs(H(shape.samples[i]) - h_star) / lr);
  }
  return worst;
}

/// Integrate the costate equations along the sampled shape starting from
/// lambda_phi = -EI kappa at the first free sample. The tangent between
/// samples is the cubic Hermite interpolant of (phi, kappa); each interval
/// uses 3-point Gauss-Legendre quadrature. Contact samples carry zero moment.
inline CostateRecord integrate_adjoint(const DLOShape& shape) {
  const auto frame = detail::free_frame(shape);
  const auto& sm = shape.samples;
  const double lr = shape.stiffness.EI * frame.w * frame.w;
  const double lx = lr * std::cos(frame.axis);
  const double ly = lr * std::sin(frame.axis);

  CostateRecord rec;
  rec.s.reserve(sm.size());
  for (const auto& st : sm) rec.s.push_back(st.s);
  rec.lambda_x.assign(sm.size(), lx);
  rec.lambda_y.assign(sm.size(), ly);
  rec.lambda_phi.assign(sm.size(), 0.0);

  static constexpr std::array<double, 3> nodes{-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  double lam = -shape.stiffness.EI * sm[frame.first].kappa;
  rec.lambda_phi[frame.first] = lam;
  for (std::size_t i = frame.first; i + 1 < sm.size(); ++i) {
    const auto& a = sm[i];
    const auto& b = sm[i + 1];
    const double h = b.s - a.s;
    double acc = 0.0;
    for (int q = 0; q < 3; ++q) {
      const double t = 0.5 * (nodes[q] + 1.0);
      const double t2 = t * t, t3 = t2 * t;
      const double phi = (2 * t3 - 3 * t2 + 1) * a.phi + (t3 - 2 * t2 + t) * h * a.kappa +
                         (-2 * t3 + 3 * t2) * b.phi + (t3 - t2) * h * b.kappa;
      acc += weights[q] * (lx * std::sin(phi) - ly * std::cos(phi));
    }
    lam += 0.5 * h * acc;
    rec.lambda_phi[i + 1] = lam;
  }
  return rec;
}

/// Grasp pose at s = L.
inline Pose grasp_pose(const DLOShape& shape) {
  const auto& e = shape.samples.back();
  return Pose{e.x, e.y, e.phi};
}

}  // namespace dloplace

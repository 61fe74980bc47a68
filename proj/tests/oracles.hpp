#pragma once

// Independent reference computations used by the tests. None of these call
// into the closed-form evaluation paths they check.

#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "dloplace/planner.hpp"

namespace oracle {

/// Adaptive Simpson quadrature with Richardson correction.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-13, int depth = 50) {
  struct Rec {
    static double run(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb, double whole, double tol, int depth) {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
      return run(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
             run(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec::run(f, a, b, fa, fm, fb, whole, tol, depth);
}

inline double elliptic_E(double phi, double k) {
  return adaptive_simpson([k](double t) { return std::sqrt(1.0 - k * k * std::sin(t) * std::sin(t)); },
                          0.0, phi);
}

inline double elliptic_K(double k) {
  return adaptive_simpson(
      [k](double t) { return 1.0 / std::sqrt(1.0 - k * k * std::sin(t) * std::sin(t)); }, 0.0,
      std::numbers::pi / 2);
}

/// RK4 of sn' = cn dn, cn' = -sn dn, dn' = -k^2 sn cn from u = 0.
inline std::array<double, 3> jacobi_rk4(double u, double k, int steps = 20000) {
  std::array<double, 3> y{0.0, 1.0, 1.0};
  const double h = u / steps;
  auto f = [k](const std::array<double, 3>& v) {
    return std::array<double, 3>{v[1] * v[2], -v[0] * v[2], -k * k * v[0] * v[1]};
  };
  for (int i = 0; i < steps; ++i) {
    const auto k1 = f(y);
    std::array<double, 3> t;
    for (int j = 0; j < 3; ++j) t[j] = y[j] + 0.5 * h * k1[j];
    const auto k2 = f(t);
    for (int j = 0; j < 3; ++j) t[j] = y[j] + 0.5 * h * k2[j];
    const auto k3 = f(t);
    for (int j = 0; j < 3; ++j) t[j] = y[j] + h * k3[j];
    const auto k4 = f(t);
    for (int j = 0; j < 3; ++j) y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

struct OdePoint {
  double s, x, y, phi;
};

/// RK4 of x' = cos phi, y' = sin phi, phi' = kappa(s) from the base over
/// [0, length]; returns steps + 1 states.
inline std::vector<OdePoint> shape_rk4(const dloplace::Pose& base,
                                       const std::function<double(double)>& kappa, double length,
                                       int steps = 10000) {
  std::vector<OdePoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  const double h = length / steps;
  double x = base.x, y = base.y, phi = base.phi;
  out.push_back({0.0, x, y, phi});
  for (int i = 0; i < steps; ++i) {
    const double s = i * h;
    const double km = kappa(s + h / 2);
    const std::array<double, 3> k1{std::cos(phi), std::sin(phi), kappa(s)};
    const double phi2 = phi + h / 2 * k1[2];
    const std::array<double, 3> k2{std::cos(phi2), std::sin(phi2), km};
    const double phi3 = phi + h / 2 * k2[2];
    const std::array<double, 3> k3{std::cos(phi3), std::sin(phi3), km};
    const double phi4 = phi + h * k3[2];
    const std::array<double, 3> k4{std::cos(phi4), std::sin(phi4), kappa(s + h)};
    x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    phi += h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
    out.push_back({s + h, x, y, phi});
  }
  return out;
}

/// Unit-cost breadth-first search over the stage I lattice, built from the
/// public predicates only. Returns the number of moves to the nearest goal.
inline std::optional<int> stage1_bfs(const dloplace::StageIConfig& start,
                                     const dloplace::SurfaceSpec& surface,
                                     const dloplace::GridSpec& grid,
                                     const dloplace::StiffnessSpec& stiffness,
                                     const dloplace::PlannerOptions& opt, int max_depth = 60) {
  using namespace dloplace;
  using Key = std::array<int, 5>;
  const double phase = inflection_phase(opt.direction);
  auto evaluate = [&](const Key& key, bool& goal) {
    goal = false;
    double k = start.params.k + key[3] * grid.dk;
    if (std::fabs(k) < 1e-12) k = 0.0;
    const double Lt = start.params.Ltilde + key[4] * grid.dLtilde;
    if (k < 0.0 || k > opt.k_max) return false;
    if (Lt < stiffness.L * (1.0 - 1e-12) || Lt > opt.Ltilde_max_factor * stiffness.L) return false;
    double y = start.base.y + key[1] * grid.dy;
    const bool touching = std::fabs(y - surface.y0) <= 0.5 * grid.dy * (1.0 + 1e-9);
    if (touching) y = surface.y0;
    const Pose base{start.base.x + key[0] * grid.dx, y, start.base.phi + key[2] * grid.dphi};
    const auto shape = eval_shape(base, ElasticaParams{k, phase * Lt, Lt}, stiffness, opt.samples);
    if (!penetration_check(shape, surface).feasible) return false;
    if (!self_intersection_check(shape).feasible) return false;
    goal = touching;
    if (goal && opt.require_stage2_viability) {
      goal = k >= kDegenerateModulus &&
             stage2_viable(world_to_placement(base.phi, opt.direction), k, opt.direction, surface,
                           grid, opt.k_max);
    }
    return true;
  };
  std::map<Key, int> dist;
  std::deque<Key> queue;
  const Key origin{0, 0, 0, 0, 0};
  bool goal = false;
  if (!evaluate(origin, goal)) return std::nullopt;
  if (goal) return 0;
  dist[origin] = 0;
  queue.push_back(origin);
  while (!queue.empty()) {
    const Key key = queue.front();
    queue.pop_front();
    const int d = dist[key];
    if (d >= max_depth) break;
    for (int axis = 0; axis < 5; ++axis) {
      for (int step : {-1, 1}) {
        Key nb = key;
        nb[static_cast<std::size_t>(axis)] += step;
        if (dist.count(nb)) continue;
        if (!evaluate(nb, goal)) {
          dist[nb] = -1;
          continue;
        }
        if (goal) return d + 1;
        dist[nb] = d + 1;
        queue.push_back(nb);
      }
    }
  }
  return std::nullopt;
}

}  // namespace oracle

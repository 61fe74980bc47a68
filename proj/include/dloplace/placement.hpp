#pragma once

// Surface-contact shapes for tip rolling and full rolling placement, and the
// feasibility predicates every planned configuration must pass.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dloplace/elastica.hpp"

namespace dloplace {

struct SurfaceSpec {
  double y0 = 0.0;
  double alpha = std::numbers::pi / 2;  // world angle of the surface normal
  double mu1 = 0.5;                     // rod / tray
  double mu2 = 0.5;                     // tray / table

  double mu() const { return std::min(mu1, mu2); }
  bool operator==(const SurfaceSpec&) const = default;
};

enum class RollDirection { rightward, leftward };

/// Phase of the inflection the rod is placed from: s0 = phase * Ltilde.
inline double inflection_phase(RollDirection d) {
  return d == RollDirection::rightward ? 0.25 : 0.75;
}
inline int axis_branch(RollDirection d) { return d == RollDirection::rightward ? 1 : -1; }

/// World heading of the surface-contacting segment. Leftward placement is
/// the mirror image of rightward placement about the vertical through the tip.
inline double contact_heading(RollDirection d) {
  return d == RollDirection::rightward ? 0.0 : std::numbers::pi;
}

/// Convert a tangent between the placement frame (contact heading 0) and the world.
inline double placement_to_world(double phi, RollDirection d) {
  return d == RollDirection::rightward ? phi : wrap_angle(std::numbers::pi - phi);
}
inline double world_to_placement(double phi, RollDirection d) { return placement_to_world(phi, d); }

inline const char* to_string(RollDirection d) {
  return d == RollDirection::rightward ? "rightward" : "leftward";
}

/// Tip rolling configuration; phi_tip is measured in the placement frame.
struct StageIIConfig {
  double phi_tip = 0.0;
  double k = 0.0;
  double Ltilde = 1.0;
};

/// Full rolling configuration: l meters of the rod lie on the surface.
struct StageIIIConfig {
  double l = 0.0;
  double k = 0.0;
  double Ltilde = 1.0;
};

struct StageIConfig {
  Pose base;
  ElasticaParams params;
};

struct Verdict {
  bool feasible = true;
  double margin = 0.0;
  std::string reason;
};

struct FrictionVerdict {
  bool feasible = false;
  double margin = 0.0;  // atan(mu) - |phi0 - alpha|
  double phi0 = 0.0;
  double mu = 0.0;
};

inline ElasticaParams phased_params(double k, double Ltilde, RollDirection d) {
  return ElasticaParams{k, inflection_phase(d) * Ltilde, Ltilde};
}

inline DLOShape stage2_shape(const StageIIConfig& cfg, const Pose& tip, RollDirection dir,
                             const SurfaceSpec& surface, const StiffnessSpec& stiffness,
                             int n = 200) {
  if (std::fabs(tip.y - surface.y0) > 1e-9 * stiffness.L) {
    throw std::invalid_argument("stage II tip must lie on the surface");
  }
  const auto params = phased_params(cfg.k, cfg.Ltilde, dir);
  if (params.degenerate()) throw std::domain_error("stage II requires a curved rod (k > 0)");
  return eval_shape(Pose{tip.x, surface.y0, placement_to_world(cfg.phi_tip, dir)}, params,
                    stiffness, n);
}

/// Straight contact segment of length l from the anchor followed by the free
/// elastica whose inflection sits at the junction.
inline DLOShape stage3_shape(const StageIIIConfig& cfg, const Pose& anchor, RollDirection dir,
                             const SurfaceSpec& surface, const StiffnessSpec& stiffness,
                             int n = 200) {
  detail::check_count(n);
  const double L = stiffness.L;
  if (cfg.l < 0.0 || cfg.l > L * (1.0 + 1e-12)) {
    throw std::invalid_argument("contact length must lie in [0, L]");
  }
  const double l = std::min(cfg.l, L);
  const double heading = contact_heading(dir);
  const double sgn = dir == RollDirection::rightward ? 1.0 : -1.0;
  const auto params = phased_params(cfg.k, cfg.Ltilde, dir);

  DLOShape shape{{}, params, Pose{anchor.x, surface.y0, heading}, stiffness, l};
  shape.samples.reserve(static_cast<std::size_t>(n));
  const Pose junction{anchor.x + sgn * l, surface.y0, heading};
  const detail::FreeElastica free_part(junction, params);
  for (int i = 0; i < n; ++i) {
    const double s = L * static_cast<double>(i) / static_cast<double>(n - 1);
    if (s <= l) {
      shape.samples.push_back({s, anchor.x + sgn * s, surface.y0, heading, 0.0});
    } else {
      DLOState st = free_part.at(s - l);
      st.s = s;
      shape.samples.push_back(st);
    }
  }
  return shape;
}

inline FrictionVerdict friction_check(const ElasticaParams& params, double phi_contact,
                                      RollDirection dir, const SurfaceSpec& surface) {
  FrictionVerdict v;
  v.mu = surface.mu();
  v.phi0 = elastica_axis_angle(params, phi_contact, axis_branch(dir));
  const double deviation = std::fabs(wrap_angle(v.phi0 - surface.alpha));
  const double cone = std::atan(v.mu);
  v.margin = cone - deviation;
  v.feasible = deviation < cone;
  return v;
}

inline Verdict penetration_check(const DLOShape& shape, const SurfaceSpec& surface) {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& st : shape.samples) lowest = std::min(lowest, st.y - surface.y0);
  Verdict v;
  v.margin = lowest;
  v.feasible = lowest >= -1e-9 * shape.stiffness.L;
  if (!v.feasible) v.reason = "penetration";
  return v;
}

namespace detail {

inline double orient(double ax, double ay, double bx, double by, double cx, double cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

inline bool on_segment(double ax, double ay, double bx, double by, double px, double py) {
  return std::min(ax, bx) <= px && px <= std::max(ax, bx) && std::min(ay, by) <= py &&
         py <= std::max(ay, by);
}

inline bool segments_intersect(const DLOState& a, const DLOState& b, const DLOState& c,
                               const DLOState& d) {
  const double o1 = orient(a.x, a.y, b.x, b.y, c.x, c.y);
  const double o2 = orient(a.x, a.y, b.x, b.y, d.x, d.y);
  const double o3 = orient(c.x, c.y, d.x, d.y, a.x, a.y);
  const double o4 = orient(c.x, c.y, d.x, d.y, b.x, b.y);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) {
    return true;
  }
  if (o1 == 0 && on_segment(a.x, a.y, b.x, b.y, c.x, c.y)) return true;
  if (o2 == 0 && on_segment(a.x, a.y, b.x, b.y, d.x, d.y)) return true;
  if (o3 == 0 && on_segment(c.x, c.y, d.x, d.y, a.x, a.y)) return true;
  if (o4 == 0 && on_segment(c.x, c.y, d.x, d.y, b.x, b.y)) return true;
  return false;
}

}  // namespace detail

/// Segment-segment test between every pair of non-adjacent sample segments.
inline Verdict self_intersection_check(const DLOShape& shape) {
  const auto& sm = shape.samples;
  if (sm.size() < 3) throw std::invalid_argument("self-intersection check needs >= 3 samples");
  const std::size_t segs = sm.size() - 1;

  // Sweep over segments ordered by their minimum x.
  std::vector<std::size_t> order(segs);
  std::vector<double> lo(segs), hi(segs);
  for (std::size_t i = 0; i < segs; ++i) {
    order[i] = i;
    lo[i] = std::min(sm[i].x, sm[i + 1].x);
    hi[i] = std::max(sm[i].x, sm[i + 1].x);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lo[a] < lo[b] || (lo[a] == lo[b] && a < b);
  });
  for (std::size_t oi = 0; oi < segs; ++oi) {
    const std::size_t i = order[oi];
    const double ylo = std::min(sm[i].y, sm[i + 1].y), yhi = std::max(sm[i].y, sm[i + 1].y);
    for (std::size_t oj = oi + 1; oj < segs && lo[order[oj]] <= hi[i]; ++oj) {
      const std::size_t j = order[oj];
      if ((i > j ? i - j : j - i) < 2) continue;
      if (std::max(sm[j].y, sm[j + 1].y) < ylo || std::min(sm[j].y, sm[j + 1].y) > yhi) continue;
      if (detail::segments_intersect(sm[i], sm[i + 1], sm[j], sm[j + 1])) {
        return {false, 0.0,
                "self-intersection between segments " + std::to_string(std::min(i, j)) + " and " +
                    std::to_string(std::max(i, j))};
      }
    }
  }
  return {true, 0.0, {}};
}

}  // namespace dloplace

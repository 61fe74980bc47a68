#pragma once

// Three-stage placement planner: free transport (lattice search over the
// base pose and elastica parameters), tip rolling and full rolling placement
// (energy descent over neighbouring (k, Ltilde) cells).

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "dloplace/placement.hpp"

namespace dloplace {

enum class Stage { I = 1, II = 2, III = 3 };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
  }
  return "?";
}

/// Lattice resolutions. Lengths in meters, angles in radians.
struct GridSpec {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double dphi = 0.0, dtheta = 0.0;
  double dLtilde = 0.0;
  double dk = 0.0;
  double dl = 0.0;

  static GridSpec defaults(double L) {
    const double deg = std::numbers::pi / 180.0;
    return {0.01 * L, 0.01 * L, 0.01 * L, 2.0 * deg, 2.0 * deg, 0.02 * L, 0.005, 0.05 * L};
  }

  void validate() const {
    for (double v : {dx, dy, dz, dphi, dtheta, dLtilde, dk, dl}) {
      if (!(v > 0.0)) throw std::invalid_argument("grid resolutions must be strictly positive");
    }
  }
  bool operator==(const GridSpec&) const = default;
};

struct PlannerOptions {
  int samples = 200;
  long max_expansions = 1'000'000;
  double Ltilde_max_factor = 8.0;  // Ltilde in [L, factor * L]
  double k_max = 0.99;
  // Stage I goal additionally requires that tip rolling can complete from
  // the touch configuration under the friction constraint.
  bool require_stage2_viability = false;
  RollDirection direction = RollDirection::rightward;
};

struct PlanNode {
  Stage stage = Stage::I;
  Pose base;   // rod pose at s = 0 (the tip)
  Pose grasp;  // gripper pose at s = L
  ElasticaParams params;
  double l = 0.0;
  double friction_margin = std::numeric_limits<double>::quiet_NaN();
  double penetration_margin = 0.0;
};

struct PlanPath {
  std::vector<PlanNode> nodes;
  GridSpec grid;
  SurfaceSpec surface;
  StiffnessSpec stiffness;
  RollDirection direction = RollDirection::rightward;

  /// Index of the first node of each stage (== nodes.size() when absent).
  std::array<std::size_t, 3> stage_begin() const {
    std::array<std::size_t, 3> b{nodes.size(), nodes.size(), nodes.size()};
    for (std::size_t i = nodes.size(); i-- > 0;) b[static_cast<int>(nodes[i].stage) - 1] = i;
    return b;
  }
  std::size_t count(Stage s) const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [s](const PlanNode& n) { return n.stage == s; }));
  }
};

class PlanningError : public std::runtime_error {
 public:
  PlanningError(Stage stage, long node, std::string constraint, const std::string& detail = {})
      : std::runtime_error("stage " + std::string(to_string(stage)) + " planning failed at node " +
                           std::to_string(node) + ": " + constraint +
                           (detail.empty() ? "" : " (" + detail + ")")),
        stage_(stage),
        node_(node),
        constraint_(std::move(constraint)) {}

  Stage stage() const { return stage_; }
  long node() const { return node_; }
  const std::string& constraint() const { return constraint_; }

 private:
  Stage stage_;
  long node_;
  std::string constraint_;
};

/// Rebuild the shape a plan node stands for.
inline DLOShape node_shape(const PlanNode& node, RollDirection dir, const SurfaceSpec& surface,
                           const StiffnessSpec& stiffness, int n = 200) {
  if (node.stage == Stage::III) {
    return stage3_shape({node.l, node.params.k, node.params.Ltilde}, node.base, dir, surface,
                        stiffness, n);
  }
  return eval_shape(node.base, node.params, stiffness, n);
}

/// First violated geometric constraint of a shape, empty when feasible.
inline std::string shape_violation(const DLOShape& shape, const SurfaceSpec& surface) {
  if (!penetration_check(shape, surface).feasible) return "penetration";
  if (!self_intersection_check(shape).feasible) return "self-intersection";
  return {};
}

namespace detail {

inline PlanNode make_node(Stage stage, const DLOShape& shape, double l, double friction_margin,
                          const SurfaceSpec& surface) {
  PlanNode n;
  n.stage = stage;
  n.base = shape.base;
  n.grasp = grasp_pose(shape);
  n.params = shape.params;
  n.l = l;
  n.friction_margin = friction_margin;
  n.penetration_margin = penetration_check(shape, surface).margin;
  return n;
}

struct IndexInterval {
  long lo = 0;
  long hi = -1;
  bool empty() const { return lo > hi; }
  IndexInterval widened() const { return empty() ? *this : IndexInterval{lo - 1, hi + 1}; }
  IndexInterval operator&(const IndexInterval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
};

// Friction-feasible k lattice indices (k = k_ref + j dk) at a placement-frame
// tip tangent. The admissible set is an interval because acos(1 - 2k^2) is
// monotone in k; its ends are settled with the authoritative predicate.
class FrictionBands {
 public:
  FrictionBands(double k_ref, double dk, double k_max, RollDirection dir,
                const SurfaceSpec& surface)
      : k_ref_(k_ref), dk_(dk), k_max_(k_max), dir_(dir), surface_(surface) {}

  IndexInterval at(double phi_placement) {
    auto it = cache_.find(phi_placement);
    if (it != cache_.end()) return it->second;
    const IndexInterval band = compute(phi_placement);
    cache_.emplace(phi_placement, band);
    return band;
  }

  bool feasible(double phi_placement, long j) const {
    const double k = k_ref_ + static_cast<double>(j) * dk_;
    if (k < kDegenerateModulus || k > k_max_) return false;
    return friction_check(ElasticaParams{k, 0.0, 1.0}, placement_to_world(phi_placement, dir_),
                          dir_, surface_)
        .feasible;
  }

  double k_of(long j) const { return k_ref_ + static_cast<double>(j) * dk_; }

 private:
  IndexInterval compute(double phi) const {
    const double alpha = world_to_placement(surface_.alpha, dir_);
    const double cone = std::atan(surface_.mu());
    const double g_lo = alpha - phi - cone;
    const double g_hi = alpha - phi + cone;
    if (g_hi <= 0.0 || g_lo >= std::numbers::pi) return {};
    const double k_lo = g_lo <= 0.0 ? 0.0 : std::sin(0.5 * g_lo);
    const double k_hi = g_hi >= std::numbers::pi ? k_max_ : std::min(k_max_, std::sin(0.5 * g_hi));
    long lo = static_cast<long>(std::floor((k_lo - k_ref_) / dk_));
    long hi = static_cast<long>(std::ceil((k_hi - k_ref_) / dk_));
    while (lo <= hi && !feasible(phi, lo)) ++lo;
    if (lo > hi) return {};
    while (feasible(phi, lo - 1)) --lo;
    while (hi >= lo && !feasible(phi, hi)) --hi;
    while (feasible(phi, hi + 1)) ++hi;
    return {lo, hi};
  }

  double k_ref_, dk_, k_max_;
  RollDirection dir_;
  SurfaceSpec surface_;
  std::map<double, IndexInterval> cache_;
};

// Placement-frame tip tangents visited by tip rolling, entry first, 0 last.
inline std::vector<double> tip_schedule(double phi_entry, double dphi) {
  std::vector<double> phis{phi_entry};
  const double mag = std::fabs(phi_entry);
  const long steps = static_cast<long>(std::ceil(mag / dphi - 1e-9));
  const double sgn = phi_entry < 0.0 ? -1.0 : 1.0;
  for (long i = 1; i <= steps; ++i) {
    phis.push_back(i == steps ? 0.0 : sgn * (mag - static_cast<double>(i) * dphi));
  }
  return phis;
}

// Forward reachable k-index sets along the schedule, starting from j = 0.
inline std::vector<IndexInterval> forward_reach(const std::vector<double>& phis,
                                                FrictionBands& bands) {
  std::vector<IndexInterval> reach;
  IndexInterval r{0, 0};
  for (std::size_t i = 0; i < phis.size(); ++i) {
    r = (i == 0 ? r : r.widened()) & bands.at(phis[i]);
    reach.push_back(r);
    if (r.empty()) break;
  }
  return reach;
}

}  // namespace detail

/// True when tip rolling from (phi_tip, k) to phi_tip = 0 admits a
/// friction-feasible k sequence with one-cell steps.
inline bool stage2_viable(double phi_tip, double k, RollDirection dir, const SurfaceSpec& surface,
                          const GridSpec& grid, double k_max = 0.99) {
  detail::FrictionBands bands(k, grid.dk, k_max, dir, surface);
  const auto phis = detail::tip_schedule(phi_tip, grid.dphi);
  const auto reach = detail::forward_reach(phis, bands);
  return reach.size() == phis.size() && !reach.back().empty();
}

namespace detail {

using LatticeKey = std::array<int, 5>;  // x, y, phi, k, Ltilde offsets

struct LatticeKeyHash {
  std::size_t operator()(const LatticeKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : k) h = (h ^ static_cast<std::size_t>(static_cast<unsigned>(v))) * 1099511628211ull;
    return h;
  }
};

class StageOneLattice {
 public:
  StageOneLattice(const StageIConfig& start, const SurfaceSpec& surface, const GridSpec& grid,
                  const StiffnessSpec& stiffness, const PlannerOptions& opt)
      : start_(start), surface_(surface), grid_(grid), stiffness_(stiffness), opt_(opt) {
    phase_ = inflection_phase(opt.direction);
  }

  struct Config {
    Pose base;
    ElasticaParams params;
    bool at_goal_height = false;
  };

  std::optional<Config> config(const LatticeKey& key) const {
    double k = start_.params.k + key[3] * grid_.dk;
    if (std::fabs(k) < 1e-12) k = 0.0;
    const double Lt = start_.params.Ltilde + key[4] * grid_.dLtilde;
    if (k < 0.0 || k > opt_.k_max) return std::nullopt;
    if (Lt < stiffness_.L * (1.0 - 1e-12) || Lt > opt_.Ltilde_max_factor * stiffness_.L) {
      return std::nullopt;
    }
    Config c;
    const double y = start_.base.y + key[1] * grid_.dy;
    c.at_goal_height = std::fabs(y - surface_.y0) <= 0.5 * grid_.dy * (1.0 + 1e-9);
    c.base = Pose{start_.base.x + key[0] * grid_.dx, c.at_goal_height ? surface_.y0 : y,
                  start_.base.phi + key[2] * grid_.dphi};
    c.base.z = start_.base.z;
    c.base.theta = start_.base.theta;
    c.params = ElasticaParams{k, phase_ * Lt, Lt};
    return c;
  }

  int height_steps(const LatticeKey& key) const {
    const double gap = std::fabs(start_.base.y + key[1] * grid_.dy - surface_.y0);
    if (gap <= 0.5 * grid_.dy * (1.0 + 1e-9)) return 0;
    return static_cast<int>(std::ceil((gap - 0.5 * grid_.dy) / grid_.dy - 1e-9));
  }

  const StageIConfig& start() const { return start_; }

 private:
  StageIConfig start_;
  SurfaceSpec surface_;
  GridSpec grid_;
  StiffnessSpec stiffness_;
  PlannerOptions opt_;
  double phase_;
};

// Lower bound on the (phi, k) moves needed to reach a stage II viable
// configuration: BFS distance transform over a window of the (phi, k) plane.
class ViabilityHeuristic {
 public:
  ViabilityHeuristic(const StageIConfig& start, const SurfaceSpec& surface, const GridSpec& grid,
                     const PlannerOptions& opt)
      : grid_(grid), opt_(opt), surface_(surface) {
    phi_ref_ = start.base.phi;
    k_ref_ = start.params.k;
    half_phi_ = static_cast<int>(std::ceil(std::numbers::pi / grid.dphi));
    k_lo_ = static_cast<int>(std::floor(-k_ref_ / grid.dk));
    k_hi_ = static_cast<int>(std::ceil((opt.k_max - k_ref_) / grid.dk));
    width_ = 2 * half_phi_ + 1;
    height_ = k_hi_ - k_lo_ + 1;
    dist_.assign(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_), kInf);

    FrictionBands bands(k_ref_, grid.dk, opt.k_max, opt.direction, surface);
    std::deque<std::pair<int, int>> queue;
    for (int ip = -half_phi_; ip <= half_phi_; ++ip) {
      const double phi_p =
          world_to_placement(wrap_angle(phi_ref_ + ip * grid.dphi), opt.direction);
      const auto phis = tip_schedule(phi_p, grid.dphi);
      // Backward-reachable k indices from which rolling completes.
      IndexInterval back = bands.at(phis.back());
      for (std::size_t i = phis.size() - 1; i-- > 0 && !back.empty();) {
        back = back.widened() & bands.at(phis[i]);
      }
      for (long j = std::max<long>(back.lo, k_lo_); j <= std::min<long>(back.hi, k_hi_); ++j) {
        cell(ip, static_cast<int>(j)) = 0;
        queue.emplace_back(ip, static_cast<int>(j));
        any_ = true;
      }
    }
    while (!queue.empty()) {
      const auto [ip, jk] = queue.front();
      queue.pop_front();
      const int d = cell(ip, jk);
      const std::array<std::pair<int, int>, 4> nbrs{
          {{ip - 1, jk}, {ip + 1, jk}, {ip, jk - 1}, {ip, jk + 1}}};
      for (auto [a, b] : nbrs) {
        if (a < -half_phi_ || a > half_phi_ || b < k_lo_ || b > k_hi_) continue;
        if (cell(a, b) > d + 1) {
          cell(a, b) = d + 1;
          queue.emplace_back(a, b);
        }
      }
    }
  }

  bool any_viable() const { return any_; }

  int operator()(int iphi, int ik) const {
    if (iphi < -half_phi_ || iphi > half_phi_ || ik < k_lo_ || ik > k_hi_) return 0;
    const int d = dist_[index(iphi, ik)];
    return d == kInf ? 0 : d;
  }

  bool viable(int iphi, int ik) const {
    if (iphi < -half_phi_ || iphi > half_phi_ || ik < k_lo_ || ik > k_hi_) return false;
    return dist_[index(iphi, ik)] == 0;
  }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max() / 2;
  std::size_t index(int ip, int jk) const {
    return static_cast<std::size_t>(ip + half_phi_) * static_cast<std::size_t>(height_) +
           static_cast<std::size_t>(jk - k_lo_);
  }
  int& cell(int ip, int jk) { return dist_[index(ip, jk)]; }

  GridSpec grid_;
  PlannerOptions opt_;
  SurfaceSpec surface_;
  double phi_ref_ = 0.0, k_ref_ = 0.0;
  int half_phi_ = 0, k_lo_ = 0, k_hi_ = 0, width_ = 0, height_ = 0;
  bool any_ = false;
  std::vector<int> dist_;
};

}  // namespace detail

/// Free transport: unit-cost shortest path over the planar lattice
/// (x, y, phi, k, Ltilde) anchored at the start until the tip reaches the
/// surface (within dy/2, then snapped onto it). s0 is pinned to the
/// inflection phase of opt.direction. A* with a consistent lower bound,
/// ties broken by (h, lattice key), so the path cost equals a uniform-cost
/// search and the path is reproducible.
inline std::vector<PlanNode> plan_stage1(const StageIConfig& start, const SurfaceSpec& surface,
                                         const GridSpec& grid, const StiffnessSpec& stiffness,
                                         const PlannerOptions& opt = {}) {
  using detail::LatticeKey;
  grid.validate();
  const detail::StageOneLattice lattice(start, surface, grid, stiffness, opt);
  std::optional<detail::ViabilityHeuristic> viability;
  if (opt.require_stage2_viability) {
    viability.emplace(start, surface, grid, opt);
    // No reachable configuration can roll its tip: the failing constraint
    // is the stage II friction cone, whatever stage I does.
    if (!viability->any_viable()) {
      throw PlanningError(Stage::II, 0, "friction", "no tip-rolling-viable (phi, k) in reach");
    }
  }

  std::string first_violation;
  long first_violation_node = -1;
  long generated = 0;

  struct Eval {
    bool feasible = false;
    bool goal = false;
  };
  std::unordered_map<LatticeKey, Eval, detail::LatticeKeyHash> evals;
  auto evaluate = [&](const LatticeKey& key) -> Eval {
    if (auto it = evals.find(key); it != evals.end()) return it->second;
    Eval e;
    const auto cfg = lattice.config(key);
    if (cfg) {
      const auto shape = eval_shape(cfg->base, cfg->params, stiffness, opt.samples);
      const auto violation = shape_violation(shape, surface);
      e.feasible = violation.empty();
      if (!e.feasible && first_violation.empty()) {
        first_violation = violation;
        first_violation_node = generated;
      }
      e.goal = e.feasible && cfg->at_goal_height &&
               (!viability || viability->viable(key[2], key[3]));
    } else if (first_violation.empty()) {
      first_violation = "parameter bounds";
      first_violation_node = generated;
    }
    ++generated;
    evals.emplace(key, e);
    return e;
  };
  auto heuristic = [&](const LatticeKey& key) {
    // Each move changes one lattice coordinate, so height and (phi, k)
    // distances add without losing admissibility.
    int h = lattice.height_steps(key);
    if (viability) h += (*viability)(key[2], key[3]);
    return h;
  };

  const LatticeKey origin{0, 0, 0, 0, 0};
  if (!evaluate(origin).feasible) {
    throw PlanningError(Stage::I, 0, first_violation.empty() ? "start infeasible" : first_violation,
                        "start configuration");
  }

  using Entry = std::tuple<int, int, LatticeKey>;  // f, h, key
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::unordered_map<LatticeKey, int, detail::LatticeKeyHash> g;
  std::unordered_map<LatticeKey, LatticeKey, detail::LatticeKeyHash> parent;
  std::unordered_map<LatticeKey, bool, detail::LatticeKeyHash> closed;
  g[origin] = 0;
  open.emplace(heuristic(origin), heuristic(origin), origin);

  long expansions = 0;
  std::optional<LatticeKey> goal;
  while (!open.empty()) {
    const auto [f, h, key] = open.top();
    open.pop();
    if (closed[key]) continue;
    closed[key] = true;
    if (evaluate(key).goal) {
      goal = key;
      break;
    }
    if (++expansions > opt.max_expansions) {
      throw PlanningError(Stage::I, expansions, "node budget exhausted",
                          first_violation.empty() ? "" : "first violation: " + first_violation);
    }
    const int gk = g[key];
    for (int axis = 0; axis < 5; ++axis) {
      for (int step : {-1, 1}) {
        LatticeKey nb = key;
        nb[static_cast<std::size_t>(axis)] += step;
        if (closed.count(nb) && closed[nb]) continue;
        if (!evaluate(nb).feasible) continue;
        auto it = g.find(nb);
        if (it != g.end() && it->second <= gk + 1) continue;
        g[nb] = gk + 1;
        parent[nb] = key;
        const int hn = heuristic(nb);
        open.emplace(gk + 1 + hn, hn, nb);
      }
    }
  }
  if (!goal) {
    throw PlanningError(Stage::I, first_violation_node < 0 ? 0 : first_violation_node,
                        first_violation.empty() ? "search space exhausted" : first_violation,
                        "no configuration touches the surface");
  }

  std::vector<LatticeKey> keys{*goal};
  while (keys.back() != origin) keys.push_back(parent.at(keys.back()));
  std::reverse(keys.begin(), keys.end());
  std::vector<PlanNode> nodes;
  for (const auto& key : keys) {
    const auto cfg = lattice.config(key);
    const auto shape = eval_shape(cfg->base, cfg->params, stiffness, opt.samples);
    nodes.push_back(detail::make_node(Stage::I, shape, 0.0,
                                      std::numeric_limits<double>::quiet_NaN(), surface));
  }
  return nodes;
}

namespace detail {

struct StepCandidate {
  long dj = 0;
  int dL = 0;
  double k = 0.0, Lt = 0.0, energy = 0.0, friction_margin = 0.0;
  DLOShape shape;
};

inline bool better(const StepCandidate& a, const StepCandidate& b) {
  if (a.energy != b.energy) return a.energy < b.energy;
  if (a.k != b.k) return a.k < b.k;
  return a.Lt < b.Lt;
}

}  // namespace detail

/// Tip rolling. The tip position and s0 stay fixed while |phi_tip| drops by
/// dphi per step; each step moves (k, Ltilde) by at most one cell towards
/// the lowest elastic energy among friction-feasible neighbours from which
/// the remaining steps can still be completed. Returns the nodes after the
/// entry configuration.
inline std::vector<PlanNode> plan_stage2(const Pose& touch, const StageIIConfig& entry,
                                         RollDirection dir, const SurfaceSpec& surface,
                                         const GridSpec& grid, const StiffnessSpec& stiffness,
                                         const PlannerOptions& opt = {}) {
  grid.validate();
  const auto phis = detail::tip_schedule(entry.phi_tip, grid.dphi);
  if (phis.size() == 1) return {};

  detail::FrictionBands bands(entry.k, grid.dk, opt.k_max, dir, surface);
  const auto reach = detail::forward_reach(phis, bands);
  if (reach.size() < phis.size() || reach.back().empty()) {
    throw PlanningError(Stage::II, static_cast<long>(reach.size() - 1), "friction",
                        "no friction-feasible k reachable at phi_tip = " +
                            std::to_string(phis[reach.size() - 1]));
  }
  std::vector<detail::IndexInterval> viable(phis.size());
  viable.back() = reach.back();
  for (std::size_t i = phis.size() - 1; i-- > 0;) {
    viable[i] = viable[i + 1].widened() & reach[i];
  }

  const double Lt_max = opt.Ltilde_max_factor * stiffness.L;
  long j = 0;
  double Lt = entry.Ltilde;
  std::vector<PlanNode> nodes;
  for (std::size_t i = 1; i < phis.size(); ++i) {
    std::optional<detail::StepCandidate> best;
    std::string rejection;
    for (long dj = -1; dj <= 1; ++dj) {
      const long jn = j + dj;
      if (jn < viable[i].lo || jn > viable[i].hi) {
        if (rejection.empty()) rejection = "friction";
        continue;
      }
      for (int dL = -1; dL <= 1; ++dL) {
        const double Ltn = Lt + dL * grid.dLtilde;
        if (Ltn < stiffness.L * (1.0 - 1e-12) || Ltn > Lt_max) continue;
        detail::StepCandidate c{dj, dL, bands.k_of(jn), Ltn, 0.0, 0.0, {}};
        c.shape = stage2_shape({phis[i], c.k, Ltn}, touch, dir, surface, stiffness, opt.samples);
        const auto fr = friction_check(c.shape.params, c.shape.base.phi, dir, surface);
        if (!fr.feasible) {
          if (rejection.empty()) rejection = "friction";
          continue;
        }
        const auto violation = shape_violation(c.shape, surface);
        if (!violation.empty()) {
          if (rejection.empty() || rejection == "friction") rejection = violation;
          continue;
        }
        c.friction_margin = fr.margin;
        c.energy = elastic_energy(c.shape);
        if (!best || detail::better(c, *best)) best = std::move(c);
      }
    }
    if (!best) {
      throw PlanningError(Stage::II, static_cast<long>(i), rejection.empty() ? "bounds" : rejection,
                          "phi_tip = " + std::to_string(phis[i]));
    }
    j += best->dj;
    Lt = best->Lt;
    nodes.push_back(detail::make_node(Stage::II, best->shape, 0.0, best->friction_margin, surface));
  }
  return nodes;
}

/// Full rolling placement from contact length entry.l to L in steps of dl,
/// choosing the minimum-energy friction-feasible neighbour cell each step.
/// Includes the entry node.
inline std::vector<PlanNode> plan_stage3(const Pose& anchor, const StageIIIConfig& entry,
                                         RollDirection dir, const SurfaceSpec& surface,
                                         const GridSpec& grid, const StiffnessSpec& stiffness,
                                         const PlannerOptions& opt = {}) {
  grid.validate();
  const double L = stiffness.L;
  const double heading = contact_heading(dir);
  auto build = [&](double l, double k, double Lt) {
    return stage3_shape({l, k, Lt}, anchor, dir, surface, stiffness, opt.samples);
  };

  std::vector<PlanNode> nodes;
  {
    const auto shape = build(entry.l, entry.k, entry.Ltilde);
    const auto fr = friction_check(shape.params, heading, dir, surface);
    if (!fr.feasible) throw PlanningError(Stage::III, 0, "friction", "entry configuration");
    const auto violation = shape_violation(shape, surface);
    if (!violation.empty()) throw PlanningError(Stage::III, 0, violation, "entry configuration");
    nodes.push_back(detail::make_node(Stage::III, shape, entry.l, fr.margin, surface));
  }

  const long remaining = static_cast<long>(std::ceil((L - entry.l) / grid.dl - 1e-9));
  const double Lt_max = opt.Ltilde_max_factor * L;
  double k = entry.k, Lt = entry.Ltilde;
  for (long i = 1; i <= remaining; ++i) {
    const double l = i == remaining ? L : entry.l + static_cast<double>(i) * grid.dl;
    std::optional<detail::StepCandidate> best;
    std::string rejection;
    for (int dk = -1; dk <= 1; ++dk) {
      const double kn = k + dk * grid.dk;
      if (kn < kDegenerateModulus || kn > opt.k_max) continue;
      for (int dL = -1; dL <= 1; ++dL) {
        const double Ltn = Lt + dL * grid.dLtilde;
        if (Ltn < L * (1.0 - 1e-12) || Ltn > Lt_max) continue;
        detail::StepCandidate c{dk, dL, kn, Ltn, 0.0, 0.0, build(l, kn, Ltn)};
        const auto fr = friction_check(c.shape.params, heading, dir, surface);
        if (!fr.feasible) {
          if (rejection.empty()) rejection = "friction";
          continue;
        }
        const auto violation = shape_violation(c.shape, surface);
        if (!violation.empty()) {
          if (rejection.empty() || rejection == "friction") rejection = violation;
          continue;
        }
        c.friction_margin = fr.margin;
        c.energy = elastic_energy(c.shape);
        if (!best || detail::better(c, *best)) best = std::move(c);
      }
    }
    if (!best) {
      throw PlanningError(Stage::III, i, rejection.empty() ? "bounds" : rejection,
                          "l = " + std::to_string(l));
    }
    k = best->k;
    Lt = best->Lt;
    nodes.push_back(detail::make_node(Stage::III, best->shape, l, best->friction_margin, surface));
  }
  return nodes;
}

inline bool fully_placed(const StageIConfig& start, RollDirection dir, const SurfaceSpec& surface,
                         const StiffnessSpec& stiffness) {
  return start.params.degenerate() &&
         std::fabs(start.base.y - surface.y0) <= 1e-9 * stiffness.L &&
         std::fabs(wrap_angle(start.base.phi - contact_heading(dir))) <= 1e-9;
}

namespace detail {

inline PlanPath assemble(std::vector<PlanNode> nodes, RollDirection dir, const SurfaceSpec& surface,
                         const GridSpec& grid, const StiffnessSpec& stiffness) {
  PlanPath path;
  path.nodes = std::move(nodes);
  path.grid = grid;
  path.surface = surface;
  path.stiffness = stiffness;
  path.direction = dir;
  return path;
}

// Tip rolling then full placement from a tip-on-surface configuration;
// `touch` is the shared boundary node and is not repeated.
inline std::vector<PlanNode> roll_and_place(const PlanNode& touch, RollDirection dir,
                                            const SurfaceSpec& surface, const GridSpec& grid,
                                            const StiffnessSpec& stiffness,
                                            const PlannerOptions& opt) {
  const StageIIConfig entry{world_to_placement(touch.base.phi, dir), touch.params.k,
                            touch.params.Ltilde};
  auto rolled = plan_stage2(touch.base, entry, dir, surface, grid, stiffness, opt);
  const PlanNode& last = rolled.empty() ? touch : rolled.back();
  const Pose anchor{last.base.x, surface.y0, contact_heading(dir)};
  auto placed = plan_stage3(anchor, {0.0, last.params.k, last.params.Ltilde}, dir, surface, grid,
                            stiffness, opt);
  rolled.insert(rolled.end(), std::next(placed.begin()), placed.end());
  return rolled;
}

}  // namespace detail

/// Plan all three stages from a free configuration. s0 is re-phased to the
/// inflection of `dir` (s0 = Ltilde/4 rightward, 3 Ltilde/4 leftward).
inline PlanPath plan_full(const StageIConfig& start, const SurfaceSpec& surface, RollDirection dir,
                          const GridSpec& grid, const StiffnessSpec& stiffness,
                          PlannerOptions opt = {}) {
  grid.validate();
  opt.direction = dir;
  if (fully_placed(start, dir, surface, stiffness)) {
    const auto shape = stage3_shape({stiffness.L, start.params.k, start.params.Ltilde}, start.base,
                                    dir, surface, stiffness, opt.samples);
    return detail::assemble({detail::make_node(Stage::III, shape, stiffness.L,
                                               std::atan(surface.mu()), surface)},
                            dir, surface, grid, stiffness);
  }
  StageIConfig phased = start;
  phased.params = ElasticaParams{start.params.k, inflection_phase(dir) * start.params.Ltilde,
                                 start.params.Ltilde};
  opt.require_stage2_viability = true;
  auto nodes = plan_stage1(phased, surface, grid, stiffness, opt);
  auto rest = detail::roll_and_place(nodes.back(), dir, surface, grid, stiffness, opt);
  nodes.insert(nodes.end(), rest.begin(), rest.end());
  return detail::assemble(std::move(nodes), dir, surface, grid, stiffness);
}

/// Replan the remainder of a placement from an (estimated) current state.
/// The returned path starts with `state` itself.
inline PlanPath replan_from(const PlanNode& state, const PlanPath& reference,
                            PlannerOptions opt = {}) {
  const auto dir = reference.direction;
  const auto& surface = reference.surface;
  const auto& grid = reference.grid;
  const auto& stiffness = reference.stiffness;
  opt.direction = dir;
  const ElasticaParams phased{state.params.k, inflection_phase(dir) * state.params.Ltilde,
                              state.params.Ltilde};
  switch (state.stage) {
    case Stage::I:
      return plan_full({state.base, phased}, surface, dir, grid, stiffness, opt);
    case Stage::II: {
      const auto shape = eval_shape(state.base, phased, stiffness, opt.samples);
      const auto fr = friction_check(phased, state.base.phi, dir, surface);
      if (!fr.feasible) throw PlanningError(Stage::II, 0, "friction", "replan start");
      const auto violation = shape_violation(shape, surface);
      if (!violation.empty()) throw PlanningError(Stage::II, 0, violation, "replan start");
      std::vector<PlanNode> nodes{detail::make_node(Stage::II, shape, 0.0, fr.margin, surface)};
      auto rest = detail::roll_and_place(nodes.front(), dir, surface, grid, stiffness, opt);
      nodes.insert(nodes.end(), rest.begin(), rest.end());
      return detail::assemble(std::move(nodes), dir, surface, grid, stiffness);
    }
    case Stage::III: {
      const Pose anchor{state.base.x, surface.y0, contact_heading(dir)};
      return detail::assemble(
          plan_stage3(anchor, {state.l, phased.k, phased.Ltilde}, dir, surface, grid, stiffness,
                      opt),
          dir, surface, grid, stiffness);
    }
  }
  throw std::logic_error("unknown stage");
}

}  // namespace dloplace

#pragma once

// Frame-synchronous simulation of vision-based local shape control: every
// planned node is observed, characterized and compared with its plan; an
// accuracy error above epsilon triggers replanning from the estimate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dloplace/characterize.hpp"
#include "dloplace/planner.hpp"

namespace dloplace {

enum class Decision { Continue, Recovery };

inline const char* to_string(Decision d) { return d == Decision::Continue ? "Continue" : "Recovery"; }

struct ControllerConfig {
  double epsilon = 1.0;  // calibration value, not a measured constant
  AccuracyWeights weights;
  double noise_sigma = 0.0;  // meters
  double fps = 7.0;
  std::uint64_t seed = 1;
  int max_replans = 5;
  int observation_points = 30;
  int fit_starts = 64;
  int fit_refine = 4;

  static ControllerConfig defaults(double L) {
    ControllerConfig c;
    c.weights = AccuracyWeights::defaults(L);
    return c;
  }

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
    if (max_replans < 0) throw std::invalid_argument("max_replans must be nonnegative");
    if (observation_points < 8) throw std::invalid_argument("need >= 8 observation points");
    if (fit_starts < 1 || fit_refine < 1) throw std::invalid_argument("fit budget must be positive");
    if (weights.shape < 0.0 || weights.elastica < 0.0 || weights.tangent < 0.0) {
      throw std::invalid_argument("weights must be nonnegative");
    }
  }
};

/// Rigid offset applied to the true rod at one frame.
struct Disturbance {
  std::size_t frame = 0;
  double dx = 0.0, dy = 0.0;
};

struct FrameRecord {
  std::size_t index = 0;
  double time = 0.0;  // index / fps, seconds
  std::size_t plan_revision = 0;
  PlanNode planned;
  ObservedShape observed;
  std::optional<Candidate> best;  // empty when the fit failed
  bool degenerate = false;
  AccuracyError error;
  Decision decision = Decision::Continue;
};

struct MetricStats {
  double mean = 0.0, std = 0.0, median = 0.0;
  std::size_t count = 0;
};

struct ErrorStats {
  MetricStats shape, elastica, tangent, weighted;
};

struct SimResult {
  std::vector<FrameRecord> frames;
  ErrorStats stats;
  int replans = 0;
  bool success = false;
  std::string diagnostics;

  std::size_t under_epsilon() const {
    return static_cast<std::size_t>(std::count_if(frames.begin(), frames.end(), [](const FrameRecord& f) {
      return f.decision == Decision::Continue;
    }));
  }
};

/// Sample mean, unbiased standard deviation and median of the finite values.
inline MetricStats describe(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) throw std::invalid_argument("statistics of an empty sample");
  MetricStats m;
  m.count = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  m.median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return m;
}

inline ErrorStats aggregate_stats(const std::vector<FrameRecord>& frames) {
  if (frames.empty()) throw std::invalid_argument("no frames to aggregate");
  std::vector<double> s, e, t, w;
  for (const auto& f : frames) {
    s.push_back(f.error.shape_err);
    e.push_back(f.error.elastica_err);
    t.push_back(f.error.tangent_err);
    w.push_back(f.error.weighted);
  }
  return {describe(s), describe(e), describe(t), describe(w)};
}

namespace detail {

inline FitOptions controller_fit_options(const ControllerConfig& cfg, double L) {
  FitOptions o;
  o.starts = cfg.fit_starts;
  o.refine = cfg.fit_refine;
  // A rod within about two noise deviations of a line is indistinguishable
  // from one. The planned hint seeds the fit, so nearly straight noiseless
  // frames still resolve their curvature.
  o.straight_tol = 1e-9 * L + 2.0 * cfg.noise_sigma;
  return o;
}

// Among candidates the observation cannot tell apart, the one nearest the plan.
inline const Candidate& select_candidate(const CandidateSet& set, const ElasticaParams& planned,
                                         double L) {
  const double limit = 1.05 * set.best().residual + 1e-9 * L;
  const Candidate* pick = &set.best();
  double best_err = elastica_error(pick->params, planned, L);
  for (const auto& c : set.candidates) {
    if (c.residual > limit) break;
    const double e = elastica_error(c.params, planned, L);
    if (e < best_err) {
      best_err = e;
      pick = &c;
    }
  }
  return *pick;
}

}  // namespace detail

/// Characterize one observation against its planned node and decide.
inline FrameRecord controller_step(const PlanNode& planned, const ObservedShape& observed,
                                   const ControllerConfig& cfg, const StiffnessSpec& stiffness,
                                   RollDirection dir, const SurfaceSpec& surface,
                                   const std::vector<ElasticaParams>& extra_hints = {}) {
  cfg.validate();
  const double L = stiffness.L;
  FrameRecord rec;
  rec.planned = planned;
  rec.observed = observed;
  const int n = static_cast<int>(observed.points.size());
  const auto planned_shape = node_shape(planned, dir, surface, stiffness, n);

  auto opt = detail::controller_fit_options(cfg, L);
  opt.hints.push_back(planned.params);
  opt.hints.insert(opt.hints.end(), extra_hints.begin(), extra_hints.end());
  try {
    const auto set = fit_elastica(observed, stiffness, opt);
    const auto& chosen = detail::select_candidate(set, planned.params, L);
    rec.best = chosen;
    rec.degenerate = set.degenerate;
    const auto estimate =
        composite_shape(observed.base, chosen.params, stiffness, observed.contact_length, n);
    rec.error = accuracy_error(planned_shape, estimate, chosen.params, cfg.weights);
  } catch (const FitError&) {
    const double inf = std::numeric_limits<double>::infinity();
    rec.error = {inf, inf, inf, inf, cfg.weights};
  }
  rec.decision = rec.error.weighted <= cfg.epsilon ? Decision::Continue : Decision::Recovery;
  return rec;
}

/// True rod at a node, sampled at the observation density.
inline DLOShape true_shape(const PlanNode& node, const PlanPath& path, int n,
                           const Disturbance* disturbance = nullptr) {
  auto shape = node_shape(node, path.direction, path.surface, path.stiffness, n);
  if (disturbance) {
    for (auto& st : shape.samples) {
      st.x += disturbance->dx;
      st.y += disturbance->dy;
    }
    shape.base = Pose{shape.base.x + disturbance->dx, shape.base.y + disturbance->dy, shape.base.phi};
  }
  return shape;
}

namespace detail {

// Replan from the characterized state. A base lifted off the surface is a
// free-transport state whatever its planned stage.
inline std::optional<PlanPath> replan_from_estimate(const FrameRecord& rec, const PlanPath& path) {
  if (!rec.best) return std::nullopt;
  PlanNode state = rec.planned;
  state.base = rec.observed.base;
  state.params = rec.best->params;
  const bool on_surface = std::fabs(state.base.y - path.surface.y0) <= 0.5 * path.grid.dy;
  if (!on_surface || state.params.degenerate()) state.stage = Stage::I;
  if (state.stage != Stage::I) state.base.y = path.surface.y0;
  if (state.stage == Stage::I && state.params.degenerate()) return std::nullopt;
  try {
    return replan_from(state, path);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Walk the path frame by frame. On Recovery the remainder is replanned
/// from the estimated state (falling back to the planned state), and the
/// simulation continues along the new plan.
inline SimResult run_simulation(const PlanPath& path, const ControllerConfig& cfg,
                                const std::vector<Disturbance>& disturbances = {}) {
  cfg.validate();
  if (path.nodes.empty()) throw std::invalid_argument("empty plan");
  const auto& stiffness = path.stiffness;
  SimResult result;
  PlanPath current = path;
  std::size_t cursor = 0;
  std::optional<ElasticaParams> previous;

  while (cursor < current.nodes.size()) {
    const std::size_t frame = result.frames.size();
    const auto& node = current.nodes[cursor];
    const Disturbance* dist = nullptr;
    for (const auto& d : disturbances) {
      if (d.frame == frame) dist = &d;
    }
    const auto truth = true_shape(node, current, cfg.observation_points, dist);
    const auto observed = synthesize_observation(truth, cfg.noise_sigma, cfg.seed + frame);
    std::vector<ElasticaParams> hints;
    if (previous) hints.push_back(*previous);
    auto rec = controller_step(node, observed, cfg, stiffness, current.direction, current.surface,
                               hints);
    rec.index = frame;
    rec.time = static_cast<double>(frame) / cfg.fps;
    rec.plan_revision = static_cast<std::size_t>(result.replans);
    if (rec.best && !rec.degenerate) previous = rec.best->params;
    const Decision decision = rec.decision;
    result.frames.push_back(std::move(rec));

    if (decision == Decision::Continue) {
      ++cursor;
      continue;
    }
    if (result.replans >= cfg.max_replans) {
      result.diagnostics = "replan budget exhausted at frame " + std::to_string(frame);
      break;
    }
    ++result.replans;
    auto replanned = detail::replan_from_estimate(result.frames.back(), current);
    if (!replanned) {
      try {
        replanned = replan_from(node, current);
      } catch (const std::exception& e) {
        result.diagnostics = std::string("replanning failed: ") + e.what();
        break;
      }
    }
    current = std::move(*replanned);
    cursor = 1;
    previous.reset();
  }

  result.stats = aggregate_stats(result.frames);
  const auto& final_node = result.frames.back().planned;
  result.success = result.diagnostics.empty() && cursor >= current.nodes.size() &&
                   final_node.stage == Stage::III &&
                   std::fabs(final_node.l - stiffness.L) <= 1e-9 * stiffness.L;
  if (!result.success && result.diagnostics.empty()) result.diagnostics = "path did not reach l = L";
  return result;
}

struct CorpusSpec {
  std::size_t paths = 22;
  std::size_t target_frames = 1000;
  std::uint64_t seed = 2024;
  double min_drop = 0.005, max_drop = 0.05;  // meters above the surface
  double slack = 15.0;                        // frames
};

/// Randomized placement instances planned into a simulation corpus. An
/// instance is kept when the running node total stays within `slack` of a
/// uniform share of `target_frames`; instances the planner rejects are
/// redrawn.
inline std::vector<PlanPath> generate_corpus(const CorpusSpec& spec, const StiffnessSpec& stiffness,
                                             const SurfaceSpec& surface, const GridSpec& grid) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double L = stiffness.L;
  std::vector<PlanPath> corpus;
  std::size_t frames = 0;
  int attempts = 0;
  while (corpus.size() < spec.paths) {
    if (++attempts > 200 * static_cast<int>(spec.paths)) {
      throw std::runtime_error("corpus generation: too many rejected instances");
    }
    const auto dir = unit(rng) < 0.5 ? RollDirection::rightward : RollDirection::leftward;
    const double drop = spec.min_drop + (spec.max_drop - spec.min_drop) * unit(rng);
    const double phi_tip = (5.0 + 35.0 * unit(rng)) * std::numbers::pi / 180.0;
    const double k = 0.3 + 0.4 * unit(rng);
    const double Lt = L * (1.5 + 1.5 * unit(rng));
    const StageIConfig start{Pose{0.0, surface.y0 + drop, placement_to_world(phi_tip, dir)},
                             ElasticaParams{k, 0.0, Lt}};
    std::optional<PlanPath> path;
    try {
      path = plan_full(start, surface, dir, grid, stiffness);
    } catch (const PlanningError&) {
      continue;
    }
    const double share = static_cast<double>(spec.target_frames) *
                         static_cast<double>(corpus.size() + 1) / static_cast<double>(spec.paths);
    const double total = static_cast<double>(frames + path->nodes.size());
    if (std::fabs(total - share) > spec.slack) continue;
    frames += path->nodes.size();
    corpus.push_back(std::move(*path));
  }
  return corpus;
}

}  // namespace dloplace

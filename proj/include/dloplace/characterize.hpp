#pragma once

// Shape characterization: recover candidate elastica parameters from an
// observed medial-axis polyline, and the shape / parameter / tangent error
// metrics used by the controller.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dloplace/elastica.hpp"

namespace dloplace {

using Point2 = std::array<double, 2>;

/// Observed medial axis, points ordered from the tip (s = 0) and assumed
/// uniformly spaced in arclength. The first `contact_length` meters are
/// known to lie straight along base.phi (full rolling placement).
struct ObservedShape {
  std::vector<Point2> points;
  Pose base;
  double L = 1.0;
  double contact_length = 0.0;

  double polyline_length() const {
    double len = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      len += std::hypot(points[i][0] - points[i - 1][0], points[i][1] - points[i - 1][1]);
    }
    return len;
  }

  void validate() const {
    if (points.size() < 8) throw std::invalid_argument("observation needs at least 8 points");
    if (!(L > 0.0)) throw std::invalid_argument("observation length must be positive");
    if (contact_length < 0.0 || contact_length > L * (1.0 + 1e-12)) {
      throw std::invalid_argument("contact length must lie in [0, L]");
    }
    const double len = polyline_length();
    if (std::fabs(len - L) > 0.1 * L) {
      throw std::invalid_argument("observed polyline length " + std::to_string(len) +
                                  " differs from L by more than 10%");
    }
  }
};

struct Candidate {
  ElasticaParams params;
  double residual = 0.0;  // mean point distance to the observation, meters
};

struct CandidateSet {
  std::vector<Candidate> candidates;  // ascending residual
  bool degenerate = false;            // straight input; Ltilde and s0 unidentifiable

  const Candidate& best() const {
    if (candidates.empty()) throw std::logic_error("empty candidate set");
    return candidates.front();
  }
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

struct FitOptions {
  int starts = 64;          // low-discrepancy screening samples
  int refine = 4;           // damped least-squares runs from the best screened starts
  int max_iterations = 80;
  double straight_tol = 0.0;  // meters; <= 0 selects 1e-4 L
  double Ltilde_max_factor = 8.0;
  double k_lo = 0.02, k_hi = 0.95;
  // Extra refinement starts, e.g. the planned state. Not screened.
  std::vector<ElasticaParams> hints;
};

struct AccuracyWeights {
  double shape = 1.0;      // 1/m
  double elastica = 0.1;
  double tangent = 1.0 / 0.35;  // 1/rad

  static AccuracyWeights defaults(double L) { return {1.0 / (0.01 * L), 0.1, 1.0 / 0.35}; }
  bool operator==(const AccuracyWeights&) const = default;
};

struct AccuracyError {
  double shape_err = 0.0;
  double elastica_err = 0.0;
  double tangent_err = 0.0;
  double weighted = 0.0;
  AccuracyWeights weights;
};

namespace detail {

inline std::vector<Point2> points_of(const DLOShape& s) {
  std::vector<Point2> pts;
  pts.reserve(s.samples.size());
  for (const auto& st : s.samples) pts.push_back({st.x, st.y});
  return pts;
}
inline std::vector<Point2> points_of(const ObservedShape& o) { return o.points; }

inline std::vector<double> tangents_of(const DLOShape& s) {
  std::vector<double> t;
  t.reserve(s.samples.size());
  for (const auto& st : s.samples) t.push_back(st.phi);
  return t;
}

// Chord directions, averaged onto the points; ends use the adjacent chord.
inline std::vector<double> tangents_of(const ObservedShape& o) {
  const auto& p = o.points;
  const std::size_t n = p.size();
  std::vector<double> chord(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    chord[i] = std::atan2(p[i + 1][1] - p[i][1], p[i + 1][0] - p[i][0]);
  }
  std::vector<double> t(n);
  t[0] = chord.front();
  t[n - 1] = chord.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    t[i] = chord[i - 1] + 0.5 * wrap_angle(chord[i] - chord[i - 1]);
  }
  return t;
}

inline double polyline_length(const std::vector<Point2>& p) {
  double len = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    len += std::hypot(p[i][0] - p[i - 1][0], p[i][1] - p[i - 1][1]);
  }
  return len;
}

// Linear resampling by sample index (uniform arclength assumption).
inline std::vector<Point2> resample(const std::vector<Point2>& p, std::size_t n) {
  if (p.size() == n) return p;
  std::vector<Point2> out(n);
  const double scale = static_cast<double>(p.size() - 1) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) * scale;
    const std::size_t i = std::min(static_cast<std::size_t>(t), p.size() - 2);
    const double f = t - static_cast<double>(i);
    out[j] = {p[i][0] + f * (p[i + 1][0] - p[i][0]), p[i][1] + f * (p[i + 1][1] - p[i][1])};
  }
  return out;
}

inline std::vector<double> resample_angles(const std::vector<double>& a, std::size_t n) {
  if (a.size() == n) return a;
  std::vector<double> unwrapped(a.size());
  unwrapped[0] = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) {
    unwrapped[i] = unwrapped[i - 1] + wrap_angle(a[i] - a[i - 1]);
  }
  std::vector<double> out(n);
  const double scale = static_cast<double>(a.size() - 1) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) * scale;
    const std::size_t i = std::min(static_cast<std::size_t>(t), a.size() - 2);
    const double f = t - static_cast<double>(i);
    out[j] = unwrapped[i] + f * (unwrapped[i + 1] - unwrapped[i]);
  }
  return out;
}

inline void check_comparable(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("shapes need >= 2 points");
  const double la = polyline_length(a), lb = polyline_length(b);
  if (std::fabs(la - lb) > 0.1 * std::max(la, lb)) {
    throw std::invalid_argument("shape lengths differ by more than 10%");
  }
}

}  // namespace detail

/// Mean Euclidean distance between index-corresponding points after
/// resampling the coarser input to the finer count.
template <class A, class B>
double shape_error(const A& a, const B& b) {
  const auto pa = detail::points_of(a);
  const auto pb = detail::points_of(b);
  detail::check_comparable(pa, pb);
  const std::size_t n = std::max(pa.size(), pb.size());
  const auto ra = detail::resample(pa, n);
  const auto rb = detail::resample(pb, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::hypot(ra[i][0] - rb[i][0], ra[i][1] - rb[i][1]);
  return sum / static_cast<double>(n);
}

/// Mean absolute wrapped tangent difference, radians.
template <class A, class B>
double tangent_error(const A& a, const B& b) {
  detail::check_comparable(detail::points_of(a), detail::points_of(b));
  auto ta = detail::tangents_of(a);
  auto tb = detail::tangents_of(b);
  const std::size_t n = std::max(ta.size(), tb.size());
  ta = detail::resample_angles(ta, n);
  tb = detail::resample_angles(tb, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::fabs(wrap_angle(ta[i] - tb[i]));
  return sum / static_cast<double>(n);
}

/// Mean squared difference of (Ltilde / L, s0 / L, k).
inline double elastica_error(const ElasticaParams& a, const ElasticaParams& b, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  const double dl = (a.Ltilde - b.Ltilde) / L;
  const double ds = (a.s0 - b.s0) / L;
  const double dk = a.k - b.k;
  return (dl * dl + ds * ds + dk * dk) / 3.0;
}

inline AccuracyError accuracy_error(const DLOShape& planned, const DLOShape& estimated,
                                    const ElasticaParams& estimated_params,
                                    const AccuracyWeights& w) {
  AccuracyError e;
  e.weights = w;
  e.shape_err = shape_error(planned, estimated);
  e.elastica_err = elastica_error(planned.params, estimated_params, planned.stiffness.L);
  e.tangent_err = tangent_error(planned, estimated);
  e.weighted = w.shape * e.shape_err + w.elastica * e.elastica_err + w.tangent * e.tangent_err;
  return e;
}

/// Shape of a rod whose first `contact_length` meters run straight along
/// base.phi, the rest being the free elastica `params` (local arclength from
/// the junction).
inline DLOShape composite_shape(const Pose& base, const ElasticaParams& params,
                                const StiffnessSpec& stiffness, double contact_length, int n) {
  if (contact_length <= 0.0) return eval_shape(base, params, stiffness, n);
  detail::check_count(n);
  const double l = std::min(contact_length, stiffness.L);
  const double c = std::cos(base.phi), s = std::sin(base.phi);
  Pose junction{base.x + l * c, base.y + l * s, base.phi};
  const detail::FreeElastica free_part(junction, params);
  DLOShape shape{{}, params, base, stiffness, l};
  shape.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double si = stiffness.L * static_cast<double>(i) / static_cast<double>(n - 1);
    if (si <= l) {
      shape.samples.push_back({si, base.x + si * c, base.y + si * s, base.phi, 0.0});
    } else {
      DLOState st = free_part.at(si - l);
      st.s = si;
      shape.samples.push_back(st);
    }
  }
  return shape;
}

/// Observation of `truth` with independent N(0, sigma^2) offsets on each
/// coordinate. Deterministic in `seed`.
inline ObservedShape synthesize_observation(const DLOShape& truth, double noise_sigma,
                                            std::uint64_t seed) {
  if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
  ObservedShape obs;
  obs.base = truth.base;
  obs.L = truth.stiffness.L;
  obs.contact_length = truth.contact_length;
  obs.points.reserve(truth.samples.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& st : truth.samples) {
    const double ex = noise(rng), ey = noise(rng);
    obs.points.push_back({st.x + noise_sigma * ex, st.y + noise_sigma * ey});
  }
  return obs;
}

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Fit variables: k, phase p = s0 / Ltilde (periodic), ratio q = Ltilde / L.
struct FitVars {
  double k, p, q;
};

class FitProblem {
 public:
  FitProblem(const ObservedShape& obs, const StiffnessSpec& st, const FitOptions& opt)
      : obs_(obs), st_(st), opt_(opt), n_(obs.points.size()) {
    model_.resize(n_);
    s_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      s_[i] = st.L * static_cast<double>(i) / static_cast<double>(n_ - 1);
    }
  }

  std::size_t size() const { return n_; }

  FitVars clamp(FitVars v) const {
    v.k = std::clamp(v.k, 1e-3, 0.99);
    v.p -= std::floor(v.p);
    v.q = std::clamp(v.q, 1.0, opt_.Ltilde_max_factor);
    return v;
  }

  ElasticaParams params(const FitVars& v) const {
    return ElasticaParams{v.k, v.p * v.q * st_.L, v.q * st_.L};
  }

  // Model points for v, written into model_.
  const std::vector<Point2>& model(const FitVars& v) {
    const auto p = params(v);
    const double l = std::min(obs_.contact_length, st_.L);
    const double c = std::cos(obs_.base.phi), s = std::sin(obs_.base.phi);
    const Pose junction{obs_.base.x + l * c, obs_.base.y + l * s, obs_.base.phi};
    const FreeElastica el(junction, p);
    for (std::size_t i = 0; i < n_; ++i) {
      if (s_[i] <= l) {
        model_[i] = {obs_.base.x + s_[i] * c, obs_.base.y + s_[i] * s};
      } else {
        const auto st = el.at(s_[i] - l);
        model_[i] = {st.x, st.y};
      }
    }
    return model_;
  }

  // Residual vector (dx_0, dy_0, dx_1, ...) and its squared norm.
  double residuals(const FitVars& v, std::vector<double>& r) {
    const auto& m = model(v);
    r.resize(2 * n_);
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      r[2 * i] = m[i][0] - obs_.points[i][0];
      r[2 * i + 1] = m[i][1] - obs_.points[i][1];
      sum += r[2 * i] * r[2 * i] + r[2 * i + 1] * r[2 * i + 1];
    }
    return sum;
  }

  double mean_distance(const FitVars& v) {
    const auto& m = model(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      sum += std::hypot(m[i][0] - obs_.points[i][0], m[i][1] - obs_.points[i][1]);
    }
    return sum / static_cast<double>(n_);
  }

  double straight_distance() const {
    const double c = std::cos(obs_.base.phi), s = std::sin(obs_.base.phi);
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      sum += std::hypot(obs_.base.x + s_[i] * c - obs_.points[i][0],
                        obs_.base.y + s_[i] * s - obs_.points[i][1]);
    }
    return sum / static_cast<double>(n_);
  }

  // Levenberg-Marquardt with Marquardt scaling and forward-difference Jacobian.
  FitVars refine(FitVars v) {
    v = clamp(v);
    std::vector<double> r, rh;
    double cost = residuals(v, r);
    double lambda = 1e-3;
    const std::size_t m = r.size();
    std::vector<std::array<double, 3>> J(m);
    const double floor_cost = 1e-24 * st_.L * st_.L * static_cast<double>(n_);
    for (int it = 0; it < opt_.max_iterations && cost > floor_cost; ++it) {
      const std::array<double, 3> h{1e-7, 1e-7, 1e-7 * v.q};
      for (int j = 0; j < 3; ++j) {
        FitVars vh = v;
        double* comp = j == 0 ? &vh.k : j == 1 ? &vh.p : &vh.q;
        double step = h[static_cast<std::size_t>(j)];
        if (j == 0 && vh.k + step > 0.99) step = -step;
        if (j == 2 && vh.q + step > opt_.Ltilde_max_factor) step = -step;
        *comp += step;
        residuals(vh, rh);
        for (std::size_t i = 0; i < m; ++i) J[i][static_cast<std::size_t>(j)] = (rh[i] - r[i]) / step;
      }
      std::array<std::array<double, 3>, 3> A{};
      std::array<double, 3> g{};
      for (std::size_t i = 0; i < m; ++i) {
        for (int a = 0; a < 3; ++a) {
          g[a] += J[i][a] * r[i];
          for (int b = 0; b < 3; ++b) A[a][b] += J[i][a] * J[i][b];
        }
      }
      bool improved = false;
      for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
        auto M = A;
        for (int a = 0; a < 3; ++a) M[a][a] += lambda * std::max(A[a][a], 1e-12);
        std::array<double, 3> d{};
        if (!solve3(M, g, d)) {
          lambda *= 10.0;
          continue;
        }
        const FitVars trial = clamp({v.k - d[0], v.p - d[1], v.q - d[2]});
        std::vector<double> rt;
        const double ct = residuals(trial, rt);
        if (ct < cost) {
          const double rel = (cost - ct) / cost;
          v = trial;
          r = std::move(rt);
          cost = ct;
          lambda = std::max(lambda / 3.0, 1e-12);
          improved = true;
          if (rel < 1e-12) return v;
        } else {
          lambda *= 4.0;
        }
      }
      if (!improved) break;
    }
    return v;
  }

 private:
  static bool solve3(const std::array<std::array<double, 3>, 3>& M, const std::array<double, 3>& b,
                     std::array<double, 3>& x) {
    const double det = M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                       M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                       M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
    if (!std::isfinite(det) || std::fabs(det) < 1e-300) return false;
    for (int c = 0; c < 3; ++c) {
      auto N = M;
      for (int r = 0; r < 3; ++r) N[r][c] = b[r];
      x[c] = (N[0][0] * (N[1][1] * N[2][2] - N[1][2] * N[2][1]) -
              N[0][1] * (N[1][0] * N[2][2] - N[1][2] * N[2][0]) +
              N[0][2] * (N[1][0] * N[2][1] - N[1][1] * N[2][0])) /
             det;
    }
    return true;
  }

  const ObservedShape& obs_;
  StiffnessSpec st_;
  FitOptions opt_;
  std::size_t n_;
  std::vector<Point2> model_;
  std::vector<double> s_;
};

// Parameter cells of the round-trip tolerance: (dk, dLtilde, dphase).
inline bool same_minimum(const ElasticaParams& a, const ElasticaParams& b, double L) {
  const double dp = std::fabs(a.phase() - b.phase());
  return std::fabs(a.k - b.k) <= 0.005 && std::fabs(a.Ltilde - b.Ltilde) <= 0.02 * L &&
         std::min(dp, 1.0 - dp) <= 0.02;
}

}  // namespace detail

/// Multi-start damped least squares over (k, s0, Ltilde). Distinct local
/// minima are reported as separate candidates, best first.
inline CandidateSet fit_elastica(const ObservedShape& obs, const StiffnessSpec& stiffness,
                                 const FitOptions& opt = {}) {
  obs.validate();
  if (std::fabs(obs.L - stiffness.L) > 1e-9 * stiffness.L) {
    throw std::invalid_argument("observation length does not match stiffness.L");
  }
  if (opt.starts < 1 || opt.refine < 1) throw std::invalid_argument("fit needs >= 1 start");
  const double L = stiffness.L;
  detail::FitProblem problem(obs, stiffness, opt);

  CandidateSet out;
  const double straight_tol = opt.straight_tol > 0.0 ? opt.straight_tol : 1e-4 * L;
  const double straight = problem.straight_distance();
  if (straight <= straight_tol) {
    out.degenerate = true;
    const ElasticaParams like = opt.hints.empty() ? ElasticaParams{0.0, 0.0, L} : opt.hints.front();
    out.candidates.push_back({ElasticaParams{0.0, like.s0, like.Ltilde}, straight});
    return out;
  }

  // Screening over a Halton sequence; q = Ltilde / L drawn uniformly in 1/q.
  std::vector<std::pair<double, detail::FitVars>> screened;
  screened.reserve(static_cast<std::size_t>(opt.starts));
  const double inv_hi = 1.0 / opt.Ltilde_max_factor;
  for (int i = 0; i < opt.starts; ++i) {
    const auto idx = static_cast<std::uint64_t>(i + 1);
    const double k = opt.k_lo + (opt.k_hi - opt.k_lo) * detail::radical_inverse(idx, 2);
    const double p = detail::radical_inverse(idx, 3);
    const double inv_q = inv_hi + (1.0 - inv_hi) * detail::radical_inverse(idx, 5);
    const detail::FitVars v{k, p, 1.0 / inv_q};
    screened.emplace_back(problem.mean_distance(v), v);
  }
  std::stable_sort(screened.begin(), screened.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<detail::FitVars> seeds;
  for (const auto& h : opt.hints) {
    if (h.degenerate()) continue;
    seeds.push_back({h.k, h.phase(), h.Ltilde / L});
  }
  for (int i = 0; i < opt.refine && i < static_cast<int>(screened.size()); ++i) {
    seeds.push_back(screened[static_cast<std::size_t>(i)].second);
  }

  std::vector<Candidate> found;
  for (const auto& seed : seeds) {
    const auto v = problem.refine(seed);
    found.push_back({problem.params(v), problem.mean_distance(v)});
  }
  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.residual, a.params.k, a.params.s0, a.params.Ltilde) <
           std::tie(b.residual, b.params.k, b.params.s0, b.params.Ltilde);
  });
  for (const auto& c : found) {
    if (!(c.residual < 0.2 * L)) continue;
    const bool dup = std::any_of(out.candidates.begin(), out.candidates.end(), [&](const Candidate& o) {
      return detail::same_minimum(o.params, c.params, L);
    });
    if (!dup) out.candidates.push_back(c);
  }
  if (out.candidates.empty()) {
    throw FitError("no candidate with residual below 0.2 L",
                   found.empty() ? std::numeric_limits<double>::infinity() : found.front().residual);
  }
  return out;
}

inline CandidateSet fit_elastica(const ObservedShape& obs, const StiffnessSpec& stiffness,
                                 int starts) {
  FitOptions opt;
  opt.starts = starts;
  return fit_elastica(obs, stiffness, opt);
}

}  // namespace dloplace

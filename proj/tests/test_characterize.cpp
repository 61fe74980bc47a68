#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dloplace/characterize.hpp"

using namespace dloplace;
constexpr double pi = std::numbers::pi;

namespace {

constexpr double L = 0.3;
const StiffnessSpec kRod{1.0, L};

DLOShape truth_of(double k, double phase, double Lt, const Pose& base = Pose{0.02, 0.05, 0.3}, int n = 50) {
  return eval_shape(base, ElasticaParams{k, phase * Lt, Lt}, kRod, n);
}

DLOShape rotated_about_base(const DLOShape& s, double a) {
  DLOShape r = s;
  const double c = std::cos(a), sn = std::sin(a);
  for (auto& st : r.samples) {
    const double dx = st.x - s.base.x, dy = st.y - s.base.y;
    st.x = s.base.x + c * dx - sn * dy;
    st.y = s.base.y + sn * dx + c * dy;
    st.phi = wrap_angle(st.phi + a);
  }
  return r;
}

}  // namespace

TEST(ShapeError, IdenticalAndRigidOffset) {
  const auto a = truth_of(0.5, 0.3, 0.7);
  EXPECT_EQ(shape_error(a, a), 0.0);
  auto b = a;
  for (auto& st : b.samples) st.y += 0.004;
  EXPECT_NEAR(shape_error(a, b), 0.004, 1e-15);
}

TEST(ShapeError, ResamplesTheCoarserInput) {
  const auto fine = truth_of(0.5, 0.3, 0.7, Pose{}, 400);
  const auto coarse = truth_of(0.5, 0.3, 0.7, Pose{}, 100);
  EXPECT_LT(shape_error(fine, coarse), 1e-4 * L);
  EXPECT_EQ(shape_error(fine, coarse), shape_error(coarse, fine));
}

TEST(ShapeError, Pseudometric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&] { return truth_of(0.1 + 0.8 * u(rng), u(rng), L * (1 + 3 * u(rng)), Pose{}, 80); };
  for (int i = 0; i < 200; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    EXPECT_EQ(shape_error(a, b), shape_error(b, a));
    EXPECT_LE(shape_error(a, c), shape_error(a, b) + shape_error(b, c) + 1e-9);
    EXPECT_GE(shape_error(a, b), 0.0);
  }
}

TEST(ShapeError, RejectsLengthMismatch) {
  const auto a = truth_of(0.5, 0.3, 0.7);
  const auto b = eval_shape(Pose{}, ElasticaParams{0.5, 0.2, 0.7}, StiffnessSpec{1.0, 0.4}, 50);
  EXPECT_THROW(shape_error(a, b), std::invalid_argument);
}

TEST(TangentError, RigidRotationAboutBase) {
  const auto a = truth_of(0.6, 0.1, 0.9);
  EXPECT_EQ(tangent_error(a, a), 0.0);
  EXPECT_NEAR(tangent_error(a, rotated_about_base(a, 0.1)), 0.1, 1e-12);
  EXPECT_NEAR(tangent_error(rotated_about_base(a, -0.1), a), 0.1, 1e-12);
}

TEST(TangentError, WrapsAcrossPi) {
  DLOShape a = eval_shape(Pose{0.0, 0.0, pi - 0.05}, ElasticaParams{0.0, 0.0, L}, kRod, 20);
  DLOShape b = rotated_about_base(a, 0.1);
  EXPECT_NEAR(tangent_error(a, b), 0.1, 1e-12);
}

TEST(ElasticaError, ArithmeticAndSymmetry) {
  const ElasticaParams a{0.5, 0.1, 0.6}, b{0.8, 0.1, 0.6};
  EXPECT_EQ(elastica_error(a, a, L), 0.0);
  EXPECT_NEAR(elastica_error(a, b, L), 0.03, 1e-15);
  const ElasticaParams c{0.2, 0.25, 1.5};
  EXPECT_EQ(elastica_error(a, c, L), elastica_error(c, a, L));
  // Lengths enter in units of L.
  EXPECT_NEAR(elastica_error({0.5, 0.0, 0.6}, {0.5, 0.0, 0.9}, L), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(elastica_error(a, b, 0.0), std::invalid_argument);
}

TEST(AccuracyError, WeightsCombineComponents) {
  const auto planned = truth_of(0.5, 0.3, 0.7);
  const auto zero = accuracy_error(planned, planned, planned.params, AccuracyWeights::defaults(L));
  EXPECT_EQ(zero.weighted, 0.0);
  const auto est = truth_of(0.55, 0.32, 0.75);
  const auto only_shape = accuracy_error(planned, est, est.params, {1.0, 0.0, 0.0});
  EXPECT_EQ(only_shape.weighted, only_shape.shape_err);
  const auto w = AccuracyWeights::defaults(L);
  EXPECT_DOUBLE_EQ(w.shape, 1.0 / (0.01 * L));
  const auto e = accuracy_error(planned, est, est.params, w);
  EXPECT_DOUBLE_EQ(e.weighted, w.shape * e.shape_err + w.elastica * e.elastica_err + w.tangent * e.tangent_err);
  EXPECT_GT(e.shape_err, 0.0);
  EXPECT_GT(e.elastica_err, 0.0);
  EXPECT_GT(e.tangent_err, 0.0);
}

TEST(CompositeShape, ContactPortionIsStraight) {
  const Pose base{0.1, 0.0, 0.0};
  const auto s = composite_shape(base, ElasticaParams{0.7, 0.15, 0.6}, kRod, 0.1, 61);
  for (const auto& st : s.samples) {
    if (st.s <= 0.1) {
      EXPECT_EQ(st.y, 0.0);
      EXPECT_EQ(st.kappa, 0.0);
    }
  }
  EXPECT_NEAR(detail::polyline_length(detail::points_of(s)), L, 1e-3 * L);
  const auto free = composite_shape(base, ElasticaParams{0.7, 0.15, 0.6}, kRod, 0.0, 61);
  const auto direct = eval_shape(base, ElasticaParams{0.7, 0.15, 0.6}, kRod, 61);
  for (std::size_t i = 0; i < free.size(); ++i) EXPECT_EQ(free.samples[i].x, direct.samples[i].x);
}

TEST(Synthesize, NoiselessEqualsTruth) {
  const auto t = truth_of(0.4, 0.2, 0.8);
  const auto obs = synthesize_observation(t, 0.0, 9);
  ASSERT_EQ(obs.points.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(obs.points[i][0], t.samples[i].x);
    EXPECT_EQ(obs.points[i][1], t.samples[i].y);
  }
  EXPECT_EQ(obs.base, t.base);
  EXPECT_EQ(obs.L, L);
}

TEST(Synthesize, OffsetStatistics) {
  const auto t = eval_shape(Pose{}, ElasticaParams{0.4, 0.2, 0.8}, kRod, 10000);
  const double sigma = 0.003 * L;
  const auto obs = synthesize_observation(t, sigma, 17);
  double sx = 0, sy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double dx = obs.points[i][0] - t.samples[i].x, dy = obs.points[i][1] - t.samples[i].y;
    sx += dx;
    sy += dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double n = static_cast<double>(t.size());
  EXPECT_NEAR(std::sqrt(sxx / n - (sx / n) * (sx / n)), sigma, 0.1 * sigma);
  EXPECT_NEAR(std::sqrt(syy / n - (sy / n) * (sy / n)), sigma, 0.1 * sigma);
  EXPECT_LT(std::fabs(sx / n), 5 * sigma / std::sqrt(n));
}

TEST(Synthesize, DeterministicInSeed) {
  const auto t = truth_of(0.4, 0.2, 0.8);
  const auto a = synthesize_observation(t, 0.001, 5);
  const auto b = synthesize_observation(t, 0.001, 5);
  const auto c = synthesize_observation(t, 0.001, 6);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
  EXPECT_THROW(synthesize_observation(t, -1.0, 5), std::invalid_argument);
}

TEST(Fit, NoiselessRoundTripOnDatasetGrid) {
  // Deterministic sample of the (k, Ltilde, phase) dataset lattice.
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> ki(0, 186), li(0, 350), ph(0, 1);
  int recovered = 0, total = 0;
  for (int i = 0; i < 40; ++i) {
    const double k = 0.02 + 0.005 * ki(rng);
    const double Lt = L + 0.02 * L * li(rng);
    const double phase = ph(rng) ? 0.75 : 0.25;
    const auto t = truth_of(k, phase, Lt, Pose{});
    const auto set = fit_elastica(synthesize_observation(t, 0.0, 1), kRod);
    const auto& best = set.best();
    ++total;
    const bool cell = std::fabs(best.params.k - k) <= 0.005 && std::fabs(best.params.Ltilde - Lt) <= 0.02 * L &&
                      std::fabs(wrap_angle(2 * pi * (best.params.phase() - phase))) <= 2 * pi * 0.02;
    if (cell && best.residual <= 1e-6 * L) ++recovered;
  }
  // Acceptance asks for 99% over the full subsample; 40 draws allow no miss.
  EXPECT_EQ(recovered, total);
}

TEST(Fit, StraightInputIsDegenerate) {
  const auto t = eval_shape(Pose{0.0, 0.1, 0.4}, ElasticaParams{0.0, 0.0, L}, kRod, 40);
  const auto set = fit_elastica(synthesize_observation(t, 0.0, 1), kRod);
  EXPECT_TRUE(set.degenerate);
  ASSERT_EQ(set.candidates.size(), 1u);
  EXPECT_EQ(set.best().params.k, 0.0);
  EXPECT_LE(set.best().residual, 1e-12);
}

TEST(Fit, MultiValuedInstance) {
  // Long-period shapes whose observed window is nearly straight admit several
  // near-coincident parameter triples.
  const auto t = truth_of(0.72, 0.75, 6.4 * L, Pose{});
  const auto set = fit_elastica(synthesize_observation(t, 0.0, 1), kRod);
  int valid = 0;
  for (const auto& c : set.candidates) valid += c.residual <= 1e-3 * L;
  EXPECT_GE(valid, 2);
  for (std::size_t i = 1; i < set.candidates.size(); ++i) {
    EXPECT_LE(set.candidates[i - 1].residual, set.candidates[i].residual);
    EXPECT_FALSE(detail::same_minimum(set.candidates[i - 1].params, set.candidates[i].params, L));
  }
}

TEST(Fit, NoiseRobustness) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int good = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const auto t = truth_of(0.05 + 0.85 * u(rng), u(rng), L * (1 + 4 * u(rng)), Pose{});
    const auto obs = synthesize_observation(t, 0.003 * L, static_cast<std::uint64_t>(i));
    try {
      const auto set = fit_elastica(obs, kRod);
      const auto fitted = eval_shape(Pose{}, set.best().params, kRod, 50);
      good += shape_error(fitted, t) <= 0.01 * L;
    } catch (const FitError&) {
    }
  }
  EXPECT_GE(good, 190) << good << " of " << n;
}

TEST(Fit, Deterministic) {
  const auto obs = synthesize_observation(truth_of(0.6, 0.25, 1.2, Pose{}), 0.001, 4);
  const auto a = fit_elastica(obs, kRod);
  const auto b = fit_elastica(obs, kRod);
  ASSERT_EQ(a.candidates.size(), b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    EXPECT_EQ(a.candidates[i].params, b.candidates[i].params);
    EXPECT_EQ(a.candidates[i].residual, b.candidates[i].residual);
  }
}

TEST(Fit, ContactLengthIsHonoured) {
  const Pose base{0.0, 0.0, 0.0};
  const ElasticaParams p{0.7, 0.15, 0.6};
  const auto t = composite_shape(base, p, kRod, 0.09, 60);
  const auto set = fit_elastica(synthesize_observation(t, 0.0, 1), kRod);
  EXPECT_LE(set.best().residual, 1e-6 * L);
}

TEST(Fit, RejectsInvalidObservations) {
  ObservedShape few;
  few.L = L;
  few.points = {{0, 0}, {0.1, 0}, {0.2, 0}};
  EXPECT_THROW(fit_elastica(few, kRod), std::invalid_argument);
  auto obs = synthesize_observation(truth_of(0.5, 0.3, 0.7), 0.0, 1);
  for (auto& p : obs.points) p[0] *= 1.5;
  EXPECT_THROW(fit_elastica(obs, kRod), std::invalid_argument);
  auto mismatch = synthesize_observation(truth_of(0.5, 0.3, 0.7), 0.0, 1);
  EXPECT_THROW(fit_elastica(mismatch, StiffnessSpec{1.0, 0.31}), std::invalid_argument);
  FitOptions none;
  none.starts = 0;
  EXPECT_THROW(fit_elastica(mismatch, kRod, none), std::invalid_argument);
}

TEST(Fit, UnfittableInputRaisesFitError) {
  // A zigzag of the right length matches no elastica.
  ObservedShape obs;
  obs.L = L;
  const int n = 40;
  const double step = L / (n - 1);
  double x = 0.0;
  obs.points.push_back({0.0, 0.0});
  for (int i = 1; i < n; ++i) {
    const double a = (i % 2 ? 1.0 : -1.0) * 1.3;
    x += step * std::cos(a);
    obs.points.push_back({x, (i % 2) * step * std::sin(1.3)});
  }
  try {
    fit_elastica(obs, kRod);
    SUCCEED();
  } catch (const FitError& e) {
    EXPECT_GE(e.best_residual(), 0.2 * L);
  }
}

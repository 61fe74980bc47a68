#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dloplace/elastica.hpp"
#include "oracles.hpp"

using namespace dloplace;
constexpr double pi = std::numbers::pi;

namespace {

const StiffnessSpec kRod{1.0, 0.3};

double two_k_omega(const ElasticaParams& p) { return 2.0 * p.k * angular_frequency(p); }

}  // namespace

TEST(ElasticaParams, PhaseStoredModuloPeriod) {
  const ElasticaParams p{0.4, 1.3, 0.5};
  EXPECT_NEAR(p.s0, 0.3, 1e-15);
  EXPECT_NEAR(ElasticaParams(0.4, -0.1, 0.5).s0, 0.4, 1e-15);
  EXPECT_EQ(ElasticaParams(0.4, 0.5, 0.5).s0, 0.0);
  EXPECT_THROW(ElasticaParams(0.4, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(ElasticaParams(0.4, 0.0, -1.0), std::invalid_argument);
  EXPECT_THROW(ElasticaParams(1.2, 0.0, 1.0), std::domain_error);
  EXPECT_TRUE(ElasticaParams(5e-7, 0.0, 1.0).degenerate());
  EXPECT_FALSE(ElasticaParams(2e-6, 0.0, 1.0).degenerate());
}

TEST(Pose, AnglesNormalized) {
  EXPECT_NEAR(Pose(0, 0, 3 * pi / 2).phi, -pi / 2, 1e-15);
  EXPECT_DOUBLE_EQ(Pose(0, 0, -pi).phi, pi);
  EXPECT_DOUBLE_EQ(Pose(0, 0, pi).phi, pi);
  EXPECT_NEAR(Pose(0, 0, 7.0).phi, 7.0 - 2 * pi, 1e-15);
}

TEST(StiffnessSpec, RejectsNonPositive) {
  EXPECT_THROW(StiffnessSpec(0.0, 0.3), std::invalid_argument);
  EXPECT_THROW(StiffnessSpec(1.0, -0.3), std::invalid_argument);
}

TEST(AngularFrequency, Examples) {
  EXPECT_NEAR(angular_frequency(ElasticaParams{0.0, 0.0, 2 * pi}), 1.0, 1e-15);
  const ElasticaParams a{0.6, 0.0, 1.0}, b{0.6, 0.0, 2.0};
  EXPECT_NEAR(angular_frequency(b), 0.5 * angular_frequency(a), 1e-15);
  EXPECT_NEAR(angular_frequency(a), 4 * oracle::elliptic_K(0.6), 1e-11);
}

TEST(Curvature, ZeroAtInflections) {
  for (double k : {0.1, 0.5, 0.9}) {
    const ElasticaParams p{k, 0.0, 0.6};
    const double scale = two_k_omega(p);
    EXPECT_LE(std::fabs(curvature_at(p, 0.15)), 1e-9 * scale);
    EXPECT_LE(std::fabs(curvature_at(p, 0.45)), 1e-9 * scale);
    const ElasticaParams q{k, 0.1, 0.6};
    EXPECT_LE(std::fabs(curvature_at(q, 0.05)), 1e-9 * scale);
  }
}

TEST(Curvature, StraightLimitAndPeak) {
  EXPECT_EQ(curvature_at(ElasticaParams{0.0, 0.1, 0.6}, 0.2), 0.0);
  const ElasticaParams p{0.5, 0.0, 0.6};
  const double peak = two_k_omega(p);
  EXPECT_NEAR(std::fabs(curvature_at(p, 0.0)), peak, 1e-12 * peak);
  double dense = 0.0;
  for (int i = 0; i <= 20000; ++i) dense = std::max(dense, std::fabs(curvature_at(p, 0.6 * i / 20000.0)));
  EXPECT_LE(dense, peak * (1 + 1e-12));
  EXPECT_GE(dense, peak * (1 - 1e-8));
}

TEST(EvalShape, StraightAndAnchored) {
  const Pose base{0.1, 0.2, 0.5};
  const auto s = eval_shape(base, ElasticaParams{0.0, 0.0, 0.3}, kRod, 11);
  ASSERT_EQ(s.size(), 11u);
  for (const auto& st : s.samples) {
    EXPECT_NEAR(st.x, 0.1 + st.s * std::cos(0.5), 1e-15);
    EXPECT_NEAR(st.y, 0.2 + st.s * std::sin(0.5), 1e-15);
    EXPECT_EQ(st.kappa, 0.0);
  }
  EXPECT_DOUBLE_EQ(s.back().s, 0.3);
  for (double k : {0.2, 0.8}) {
    const auto c = eval_shape(Pose{}, ElasticaParams{k, 0.07, 0.5}, kRod);
    EXPECT_EQ(c.front().x, 0.0);
    EXPECT_EQ(c.front().y, 0.0);
    EXPECT_NEAR(c.front().phi, 0.0, 1e-15);
  }
  EXPECT_THROW(eval_shape(Pose{}, ElasticaParams{0.3, 0.0, 0.6}, kRod, 1), std::invalid_argument);
}

TEST(EvalShape, UniformSamplingAndChords) {
  const auto s = eval_shape(Pose{}, ElasticaParams{0.9, 0.2, 0.5}, kRod, 200);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double gap = s.samples[i].s - s.samples[i - 1].s;
    EXPECT_GT(gap, 0.0);
    EXPECT_NEAR(gap, 0.3 / 199, 1e-15);
    const double chord = std::hypot(s.samples[i].x - s.samples[i - 1].x, s.samples[i].y - s.samples[i - 1].y);
    EXPECT_LE(chord, 1.5 * gap);
  }
}

TEST(EvalShape, MatchesOdeOracleNominal) {
  const ElasticaParams p{0.5, 0.15, 0.6};
  const Pose base{0.02, 0.05, 0.3};
  const auto ode = oracle::shape_rk4(base, [&](double s) { return curvature_at(p, s); }, 0.3);
  const auto s = eval_shape(base, p, kRod, 101);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& o = ode[i * 100];
    EXPECT_NEAR(s.samples[i].x, o.x, 1e-8 * 0.3);
    EXPECT_NEAR(s.samples[i].y, o.y, 1e-8 * 0.3);
    EXPECT_NEAR(wrap_angle(s.samples[i].phi - o.phi), 0.0, 1e-7);
  }
}

TEST(EvalShape, MatchesOdeOracleOnGrid) {
  for (int i = 0; i < 20; ++i) {
    const double k = 0.05 + 0.9 * i / 19.0;
    for (double frac : {0.0, 0.125, 0.25, 0.75}) {
      const double Lt = 0.6;
      const ElasticaParams p{k, frac * Lt, Lt};
      const auto ode = oracle::shape_rk4(Pose{}, [&](double s) { return curvature_at(p, s); }, 0.3);
      const auto s = eval_shape(Pose{}, p, kRod, 51);
      double worst = 0.0, worst_phi = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        const auto& o = ode[j * 200];
        worst = std::max(worst, std::hypot(s.samples[j].x - o.x, s.samples[j].y - o.y));
        worst_phi = std::max(worst_phi, std::fabs(wrap_angle(s.samples[j].phi - o.phi)));
      }
      EXPECT_LE(worst, 1e-8 * 0.3) << "k=" << k << " frac=" << frac;
      EXPECT_LE(worst_phi, 1e-7) << "k=" << k << " frac=" << frac;
    }
  }
}

TEST(EvalShape, TangentDerivativeIsCurvature) {
  for (double k : {0.3, 0.7, 0.95}) {
    const ElasticaParams p{k, 0.05, 0.45};
    const auto s = eval_shape(Pose{}, p, kRod, 1001);
    const double h = s.samples[1].s - s.samples[0].s;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      const double d = wrap_angle(s.samples[i + 1].phi - s.samples[i - 1].phi) / (2 * h);
      EXPECT_NEAR(d, s.samples[i].kappa, 1e-4 * two_k_omega(p));
    }
  }
}

TEST(EvalShape, ArclengthPreserved) {
  for (double k : {0.1, 0.6, 0.95}) {
    const auto s = eval_shape(Pose{}, ElasticaParams{k, 0.1, 0.4}, kRod, 1000);
    double len = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
      len += std::hypot(s.samples[i].x - s.samples[i - 1].x, s.samples[i].y - s.samples[i - 1].y);
    }
    EXPECT_GE(len, 0.3 * (1 - 1e-4));
    EXPECT_LE(len, 0.3 * (1 + 1e-15));
  }
}

TEST(Energy, StraightIsZeroAndLinearInEI) {
  EXPECT_EQ(elastic_energy(eval_shape(Pose{}, ElasticaParams{0.0, 0.0, 0.3}, kRod)), 0.0);
  const ElasticaParams p{0.5, 0.15, 0.6};
  const double e1 = elastic_energy(eval_shape(Pose{}, p, kRod));
  const double e2 = elastic_energy(eval_shape(Pose{}, p, StiffnessSpec{2.0, 0.3}));
  EXPECT_GT(e1, 0.0);
  EXPECT_NEAR(e2, 2 * e1, 1e-14 * e1);
}

TEST(Energy, MatchesRefinedQuadrature) {
  for (int n : {200, 201, 2}) {
    const ElasticaParams p{0.5, 0.15, 0.6};
    const auto fine = eval_shape(Pose{}, p, kRod, 10 * 200);
    double trap = 0.0;
    for (std::size_t i = 1; i < fine.size(); ++i) {
      const double h = fine.samples[i].s - fine.samples[i - 1].s;
      trap += 0.5 * h * (std::pow(fine.samples[i].kappa, 2) + std::pow(fine.samples[i - 1].kappa, 2));
    }
    trap *= 0.5;
    const double exact =
        0.5 * oracle::adaptive_simpson([&](double s) { return std::pow(curvature_at(p, s), 2); }, 0.0, 0.3);
    const double e = elastic_energy(eval_shape(Pose{}, p, kRod, n));
    if (n == 2) {
      EXPECT_GT(e, 0.0);  // two samples: trapezoid only
      continue;
    }
    EXPECT_NEAR(e, trap, 1e-6 * trap) << n;
    EXPECT_NEAR(e, exact, 1e-8 * exact) << n;
  }
}

TEST(LambdaR, Scaling) {
  const ElasticaParams p{0.6, 0.0, 0.6};
  const double a = lambda_r(p, kRod);
  EXPECT_NEAR(lambda_r(p, StiffnessSpec{2.0, 0.3}), 2 * a, 1e-12 * a);
  EXPECT_NEAR(lambda_r(ElasticaParams{0.6, 0.0, 1.2}, kRod), a / 4, 1e-12 * a);
  EXPECT_THROW(lambda_r(ElasticaParams{0.0, 0.0, 0.6}, kRod), std::domain_error);
}

TEST(AxisAngle, Examples) {
  const double phi = 0.4;
  const ElasticaParams p{std::sqrt(0.5), 0.0, 1.0};
  EXPECT_NEAR(elastica_axis_angle(p, phi, +1), phi + pi / 2, 1e-12);
  EXPECT_NEAR(elastica_axis_angle(p, phi, -1), phi - pi / 2, 1e-12);
  EXPECT_NEAR(elastica_axis_angle(ElasticaParams{1e-5, 0.0, 1.0}, phi, 1), phi, 1e-4);
  for (double k : {0.2, 0.5, 0.9}) {
    const ElasticaParams q{k, 0.0, 1.0};
    const double up = elastica_axis_angle(q, phi, 1) - phi;
    const double down = elastica_axis_angle(q, phi, -1) - phi;
    EXPECT_NEAR(up, -down, 1e-14);
    EXPECT_NEAR(std::cos(up), 1 - 2 * k * k, 1e-14);
  }
  EXPECT_THROW(elastica_axis_angle(ElasticaParams{0.0, 0.0, 1.0}, 0.0, 1), std::domain_error);
}

TEST(AxisAngle, ConsistentWithHamiltonianAtInflection) {
  // Measured axis of an s0 = Ltilde/4 (resp. 3Ltilde/4) shape equals the +(-) branch.
  for (double k : {0.25, 0.6, 0.9}) {
    for (double frac : {0.25, 0.75}) {
      const ElasticaParams p{k, frac * 0.6, 0.6};
      const auto s = eval_shape(Pose{0, 0, 0.3}, p, kRod, 100);
      const auto axis = detail::free_frame(s).axis;
      EXPECT_NEAR(wrap_angle(axis - elastica_axis_angle(p, 0.3, frac < 0.5 ? 1 : -1)), 0.0, 1e-12);
    }
  }
}

TEST(Hamiltonian, ConstantAlongShapes) {
  for (int i = 0; i < 20; ++i) {
    const double k = 0.05 + 0.9 * i / 19.0;
    for (double frac : {0.0, 0.125, 0.25, 0.75}) {
      const auto s = eval_shape(Pose{0.0, 0.1, -0.4}, ElasticaParams{k, frac * 0.6, 0.6}, kRod, 1000);
      EXPECT_LE(hamiltonian_residual(s), 1e-6) << "k=" << k;
    }
  }
}

TEST(Hamiltonian, DetectsPerturbationAndRejectsStraight) {
  auto s = eval_shape(Pose{}, ElasticaParams{0.5, 0.0, 0.6}, kRod, 1000);
  s.samples[400].kappa *= 1.1;
  EXPECT_GT(hamiltonian_residual(s), 1e-3);
  EXPECT_THROW(hamiltonian_residual(eval_shape(Pose{}, ElasticaParams{0.0, 0.0, 0.6}, kRod, 100)),
               std::domain_error);
  EXPECT_THROW(hamiltonian_residual(eval_shape(Pose{}, ElasticaParams{0.5, 0.0, 0.6}, kRod, 9)),
               std::invalid_argument);
}

TEST(Adjoint, EulerBernoulliLaw) {
  for (double k : {0.1, 0.5, 0.9}) {
    for (double frac : {0.0, 0.25, 0.6}) {
      const ElasticaParams p{k, frac * 0.6, 0.6};
      const auto s = eval_shape(Pose{0, 0, 1.0}, p, kRod, 1000);
      const auto rec = integrate_adjoint(s);
      const double w = angular_frequency(p);
      for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(std::fabs(rec.lambda_phi[i] + kRod.EI * s.samples[i].kappa), 1e-6 * kRod.EI * w);
        EXPECT_EQ(rec.lambda_x[i], rec.lambda_x[0]);
        EXPECT_EQ(rec.lambda_y[i], rec.lambda_y[0]);
      }
      EXPECT_NEAR(std::hypot(rec.lambda_x[0], rec.lambda_y[0]), lambda_r(p, kRod), 1e-9 * lambda_r(p, kRod));
    }
  }
  EXPECT_THROW(integrate_adjoint(eval_shape(Pose{}, ElasticaParams{0.0, 0.0, 0.6}, kRod)),
               std::domain_error);
}

TEST(Inflections, CurvatureVanishes) {
  for (double k : {0.2, 0.7}) {
    const double Lt = 0.5;
    for (double frac : {0.25, 0.75}) {
      const ElasticaParams p{k, 0.0, Lt};
      EXPECT_LE(std::fabs(curvature_at(p, frac * Lt)), 1e-9 * two_k_omega(p));
    }
  }
}

TEST(GraspPose, EndOfShape) {
  const auto s = eval_shape(Pose{0, 0, 0}, ElasticaParams{0.0, 0.0, 0.3}, kRod);
  const auto g = grasp_pose(s);
  EXPECT_NEAR(g.x, 0.3, 1e-15);
  EXPECT_EQ(g.y, 0.0);
  EXPECT_EQ(g.phi, 0.0);
  const ElasticaParams p{0.6, 0.1, 0.5};
  const auto a = grasp_pose(eval_shape(Pose{}, p, kRod, 200));
  const auto b = grasp_pose(eval_shape(Pose{}, p, kRod, 2000));
  EXPECT_NEAR(a.x, b.x, 1e-6 * 0.3);
  EXPECT_NEAR(a.y, b.y, 1e-6 * 0.3);
}

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "saddlescape/landscape.hpp"
#include "test_support.hpp"

using namespace saddlescape;
using saddlescape::testing::instance_a;
using saddlescape::testing::instance_b;
using saddlescape::testing::random_dataset;
using saddlescape::testing::uniform_dim;

namespace {

CriticalPointSpec single(std::size_t index, int sign) {
  CriticalPointSpec s = CriticalPointSpec::empty(1);
  s.slots[0] = SlotPick{index, sign};
  return s;
}

template <class Fn>
void expect_error(Errc code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Brute-force count: every tuple over {empty, (j, +), (j, -)}^d1 whose
// nonempty indices strictly increase from slot to slot.
std::size_t brute_force_spec_count(std::size_t rank, std::size_t d1) {
  std::size_t count = 0;
  std::vector<std::size_t> choice(d1, 0);  // 0 = empty, else 1 + 2j + (sign bit)
  const std::size_t alphabet = 2 * rank + 1;
  std::function<void(std::size_t)> rec = [&](std::size_t slot) {
    if (slot == d1) {
      long last = -1;
      for (std::size_t c : choice) {
        if (c == 0) continue;
        const long j = static_cast<long>((c - 1) / 2);
        if (j <= last) return;
        last = j;
      }
      ++count;
      return;
    }
    for (std::size_t c = 0; c < alphabet; ++c) {
      choice[slot] = c;
      rec(slot + 1);
    }
  };
  rec(0);
  return count;
}

std::vector<CriticalPointSpec> collect(SpecStream stream) {
  std::vector<CriticalPointSpec> out;
  while (auto s = stream.next()) out.push_back(*s);
  return out;
}

}  // namespace

TEST(GlobalMinValue, Examples) {
  EXPECT_NEAR(global_min_value(instance_a(), 1), 0.0, 1e-24);
  EXPECT_NEAR(global_min_value(instance_b(), 1), 0.5, 1e-14);
  EXPECT_NEAR(global_min_value(instance_b(), 2), 0.0, 1e-24);
  EXPECT_EQ(global_min_value(Dataset(Matrix{{1, 0}, {0, 1}}, Matrix{{0, 0}}), 1), 0.0);
}

TEST(GlobalMinValue, IncludesComponentOutsideRowSpace) {
  // X has a one-dimensional row space; Y has an orthogonal component.
  const Dataset data(Matrix{{1, 0}}, Matrix{{2, 3}});
  EXPECT_NEAR(global_min_value(data, 1), 4.5, 1e-14);
}

TEST(BuildCriticalPoint, InstanceA) {
  const FactorPair z = build_critical_point(instance_a(), 1, single(0, +1));
  EXPECT_NEAR(z.w2(0, 0), std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(z.w1(0, 0), std::sqrt(6.0) / 2, 1e-15);
  EXPECT_NEAR(objective_f(z, instance_a()), 0.0, 1e-28);

  const FactorPair zero = build_critical_point(instance_a(), 1, CriticalPointSpec::empty(1));
  EXPECT_EQ(zero, FactorPair::zeros(1, 1, 1));
}

TEST(BuildCriticalPoint, InstanceBSecondPair) {
  const Dataset b = instance_b();
  const FactorPair z = build_critical_point(b, 1, single(1, +1));
  EXPECT_EQ(z.w2, (Matrix{{0}, {1}}));
  EXPECT_EQ(z.w1, (Matrix{{0, 1}}));
  EXPECT_DOUBLE_EQ(objective_g(z, b, 1.0), 4.5);
}

TEST(BuildCriticalPoint, InvalidSpecs) {
  const Dataset b = instance_b();
  CriticalPointSpec repeated = CriticalPointSpec::empty(2);
  repeated.slots[0] = SlotPick{0, 1};
  repeated.slots[1] = SlotPick{0, -1};
  expect_error(Errc::InvalidSpec, [&] { build_critical_point(b, 2, repeated); });

  CriticalPointSpec bad_rotation = CriticalPointSpec::empty(2);
  bad_rotation.rotation = Matrix{{1, 1}, {0, 1}};
  expect_error(Errc::InvalidSpec, [&] { build_critical_point(b, 2, bad_rotation); });

  expect_error(Errc::InvalidSpec, [&] { build_critical_point(b, 1, single(2, 1)); });
  expect_error(Errc::InvalidSpec, [&] { build_critical_point(b, 2, single(0, 1)); });
}

TEST(SpecStream, BaseCounts) {
  EXPECT_EQ(count_base_specs(1, 1), 3u);
  EXPECT_EQ(count_base_specs(2, 1), 5u);
  EXPECT_EQ(count_base_specs(2, 2), 13u);
  for (std::size_t r = 0; r <= 4; ++r) {
    for (std::size_t d1 = 1; d1 <= 4; ++d1) {
      const std::size_t expected = brute_force_spec_count(r, d1);
      EXPECT_EQ(count_base_specs(r, d1), expected) << "r=" << r << " d1=" << d1;
      const auto specs = collect(SpecStream(r, d1, 0, 0));
      EXPECT_EQ(specs.size(), expected);
      std::set<std::string> labels;
      for (const auto& s : specs) labels.insert(s.label());
      EXPECT_EQ(labels.size(), expected) << "duplicate spec";
    }
  }
}

TEST(SpecStream, SmallestStreamInOrder) {
  const auto specs = collect(SpecStream(1, 1, 0, 0));
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[0].label(), "[-]");
  EXPECT_EQ(specs[1].label(), "[(1,+)]");
  EXPECT_EQ(specs[2].label(), "[(1,-)]");
}

TEST(SpecStream, RotationsAreDeterministicAndOrthogonal) {
  const auto a = collect(SpecStream(2, 2, 2, 5));
  const auto b = collect(SpecStream(2, 2, 2, 5));
  ASSERT_EQ(a.size(), 13u * 3u);
  EXPECT_EQ(a, b);
  for (const auto& s : a) EXPECT_LE(orthonormality_defect(s.rotation), 1e-12);
  EXPECT_NE(a[1].rotation, Matrix::identity(2));
}

TEST(SpecStream, TooMany) {
  expect_error(Errc::TooMany, [] { SpecStream(12, 12, 0, 0); });
}

TEST(Classify, InstanceAOrigin) {
  const Dataset a = instance_a();
  const Classification c = classify(FactorPair::zeros(1, 1, 1), a, 1.0);
  ASSERT_EQ(c.kind, PointKind::StrictSaddle);
  EXPECT_EQ(c.case_tag, CaseTag::RankAtMostHidden);
  EXPECT_EQ(c.method, CurvatureMethod::Constructive);
  EXPECT_NEAR(*c.quadform, -12.0, 1e-12);
  EXPECT_NEAR(*c.rayleigh, -9.6, 1e-12);
  EXPECT_NEAR(*c.bound, -9.6, 1e-12);
}

TEST(Classify, InstanceAGlobal) {
  const Dataset a = instance_a();
  const FactorPair z = build_critical_point(a, 1, single(0, +1));
  EXPECT_EQ(classify(z, a, 1.0).kind, PointKind::GlobalMin);
  EXPECT_EQ(classify(build_critical_point(a, 1, single(0, -1)), a, 1.0).kind, PointKind::GlobalMin);
}

TEST(Classify, InstanceBCaseTwo) {
  const Dataset b = instance_b();
  const Classification c = classify(build_critical_point(b, 1, single(1, +1)), b, 1.0);
  ASSERT_EQ(c.kind, PointKind::StrictSaddle);
  EXPECT_EQ(c.case_tag, CaseTag::RankAboveHidden);
  EXPECT_NEAR(*c.quadform, -4.0, 1e-12);
  EXPECT_NEAR(c.direction->squared_norm(), 2.0, 1e-12);
  EXPECT_NEAR(*c.rayleigh, -2.0, 1e-12);
  EXPECT_NEAR(*c.bound, -4.0 / 3.0, 1e-12);
  EXPECT_EQ(*c.escape_index, 0u);
}

TEST(Classify, RejectsNonCriticalPoints) {
  expect_error(Errc::NotCritical, [] { classify(FactorPair{Matrix{{3}}, Matrix{{1}}}, instance_a(), 1.0); });
}

TEST(EscapeDirection, Examples) {
  const Dataset a = instance_a();
  const Direction da = escape_direction(FactorPair::zeros(1, 1, 1), a);
  EXPECT_DOUBLE_EQ(da.delta2(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(da.delta1(0, 0), 0.5);

  const Dataset b = instance_b();
  const Direction db = escape_direction(build_critical_point(b, 1, single(1, +1)), b);
  EXPECT_EQ(db.delta2, (Matrix{{1}, {0}}));
  EXPECT_EQ(db.delta1, (Matrix{{1, 0}}));

  expect_error(Errc::IsGlobalMin, [&] { escape_direction(build_critical_point(a, 1, single(0, 1)), a); });
  expect_error(Errc::NotCritical, [&] { escape_direction(FactorPair{Matrix{{3}}, Matrix{{2}}}, a); });
}

TEST(CurvatureBound, TiedSpectrumDegeneratesToZero) {
  // Y V has singular values (1, 1, 1): nothing lies strictly below lambda_1.
  const Dataset data(Matrix::identity(3), Matrix::identity(3));
  EXPECT_EQ(curvature_bound(data, 1), 0.0);
  EXPECT_NEAR(curvature_bound(data, 3), -2.0 / 4.0, 1e-14);
}

TEST(CurvatureBound, UsesLargestValueStrictlyBelowPivot) {
  // singular values 3, 3, 1 with d1 = 1: lambda_{r'} = 1, not the tied 3.
  const Dataset data(Matrix::identity(3), Matrix{{3, 0, 0}, {0, 3, 0}, {0, 0, 1}});
  EXPECT_NEAR(curvature_bound(data, 1), -2.0 * (3 - 1) / 4.0, 1e-14);
}

TEST(Classify, FallsBackToHessianWhenPairsAreTied) {
  // Tied singular values: a rotated mix of p_1, p_2 is still critical but
  // is not aligned with the computed singular basis.
  const Dataset data(Matrix::identity(3), Matrix{{2, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  const double c = std::cos(0.3), s = std::sin(0.3);
  const double root = std::sqrt(2.0);
  const Matrix w2{{root * c, 0}, {root * s, 0}, {0, 0}};
  const FactorPair z{w2, w2.transpose()};
  ASSERT_LE(grad_norm(z, data, 1.0), 1e-12);
  const Classification cls = classify(z, data, 1.0);
  ASSERT_EQ(cls.kind, PointKind::StrictSaddle);
  EXPECT_EQ(cls.method, CurvatureMethod::HessianEigen);
  EXPECT_LT(*cls.rayleigh, 0.0);
}

TEST(BalancedLift, ScalarExample) {
  const Dataset a = instance_a();
  const FactorPair z{Matrix{{3}}, Matrix{{1}}};
  const LiftResult lift = balanced_lift(z, a);
  ASSERT_EQ(lift.theta.size(), 1u);
  EXPECT_DOUBLE_EQ(lift.theta[0], 6.0);
  EXPECT_NEAR(lift.zbar.w2(0, 0), std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(lift.zbar.w1(0, 0), std::sqrt(6.0) / 2, 1e-15);
  EXPECT_EQ(classify_f_critical(z, a).kind, PointKind::GlobalMin);
}

TEST(BalancedLift, IdempotentOnBalancedPoints) {
  std::mt19937_64 rng(21);
  const Dataset data = random_dataset(3, 3, 6, rng);
  SpecStream stream(data.rank(), 2, 1, 3);
  while (auto spec = stream.next()) {
    const FactorPair z = build_critical_point(data, 2, *spec);
    if ((z.w2 * z.w1).max_abs() == 0.0) {
      expect_error(Errc::ZeroProduct, [&] { balanced_lift(z, data); });
      continue;
    }
    const LiftResult lift = balanced_lift(z, data);
    EXPECT_LE((lift.zbar.w2 * lift.zbar.w1 - z.w2 * z.w1).norm(), 1e-10 * (z.w2 * z.w1).norm());
    EXPECT_LE(regularizer_rho(lift.zbar, data), 1e-20 * (1 + data.lambdas()[0] * data.lambdas()[0]));
    // inner dimension equals the rank of the product
    std::size_t picked = 0;
    for (const auto& slot : spec->slots) picked += slot.has_value();
    EXPECT_EQ(lift.zbar.hidden(), picked);
  }
}

TEST(ClassifyFCritical, Examples) {
  const Dataset a = instance_a();
  const Classification origin = classify_f_critical(FactorPair::zeros(1, 1, 1), a);
  ASSERT_EQ(origin.kind, PointKind::StrictSaddle);
  EXPECT_EQ(origin.method, CurvatureMethod::HessianEigen);
  EXPECT_NEAR(*origin.rayleigh, -12.0, 1e-12);

  const Dataset zero_y(Matrix{{2}}, Matrix{{0}});
  EXPECT_EQ(classify_f_critical(FactorPair::zeros(1, 1, 1), zero_y).kind, PointKind::GlobalMin);
  expect_error(Errc::NotCritical, [&] { classify_f_critical(FactorPair{Matrix{{1}}, Matrix{{1}}}, a); });
}

TEST(ClassifyFCritical, UnbalancedNonDegenerateSaddleUsesPullback) {
  // Rescale the instance-B saddle so it stops being balanced; it stays a
  // critical point of f because f only sees the product.
  const Dataset b = instance_b();
  const FactorPair balanced = build_critical_point(b, 1, single(1, +1));
  const FactorPair z{balanced.w2 * 2.0, balanced.w1 * 0.5};
  ASSERT_GT(regularizer_rho(z, b), 1.0);
  const Classification c = classify_f_critical(z, b);
  ASSERT_EQ(c.kind, PointKind::StrictSaddle);
  EXPECT_EQ(c.method, CurvatureMethod::LiftPullback);
  EXPECT_LT(*c.rayleigh, 0.0);
  EXPECT_EQ(*c.bound, 0.0);

  // the pullback preserves the curvature value of the lifted direction
  const LiftResult lift = balanced_lift(z, b);
  const Direction dbar = escape_direction(lift.zbar, b);
  const Direction d = pull_back(dbar, z, lift, b);
  EXPECT_NEAR(hessian_quadform_g(z, d, b, 0.0), hessian_quadform_g(lift.zbar, dbar, b, 0.0), 1e-12);
  EXPECT_NEAR(hessian_quadform_g(z, d, b, 0.0), -4.0, 1e-12);
}

TEST(ClassifyFCritical, GeneralLinearOrbitOfRandomSaddles) {
  std::mt19937_64 rng(77);
  int pullbacks = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset data = random_dataset(3, 3, 5, rng);
    SpecStream stream(data.rank(), 2, 0, 0);
    while (auto spec = stream.next()) {
      const FactorPair balanced = build_critical_point(data, 2, *spec);
      Matrix a = gaussian_matrix(2, 2, rng);
      for (std::size_t i = 0; i < 2; ++i) a(i, i) += 3.0;
      const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
      const Matrix a_inv{{a(1, 1) / det, -a(0, 1) / det}, {-a(1, 0) / det, a(0, 0) / det}};
      const FactorPair z{balanced.w2 * a, a_inv * balanced.w1};
      const Classification c = classify_f_critical(z, data);
      ASSERT_NE(c.kind, PointKind::Unclassified) << spec->label();
      if (c.kind == PointKind::StrictSaddle) {
        EXPECT_LT(*c.rayleigh, 0.0);
        pullbacks += c.method == CurvatureMethod::LiftPullback;
      }
    }
  }
  EXPECT_GT(pullbacks, 0);
}

// --- properties over random instances --------------------------------------

TEST(Landscape, EnumeratedPointsAreCriticalBalancedAndCertified) {
  std::mt19937_64 rng(314);
  const Tolerances tol;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d0 = uniform_dim(rng, 1, 4), d1 = uniform_dim(rng, 1, 4), d2 = uniform_dim(rng, 1, 4);
    const Dataset data = random_dataset(d0, d2, d0 + uniform_dim(rng, 0, 3), rng);
    if (data.rank() * d1 > 8) continue;
    const double mu = trial % 2 == 0 ? 1.0 : 0.3;
    const double optimum = global_min_value(data, d1);
    double best = INFINITY;
    SpecStream stream = iterate_all_specs(data, d1, 1, static_cast<std::uint64_t>(trial));
    while (auto spec = stream.next()) {
      const FactorPair z = build_critical_point(data, d1, *spec);
      EXPECT_LE(grad_norm(z, data, mu), 1e-9 * data.scale()) << spec->label();
      EXPECT_LE(grad_norm(z, data, 0.0), 1e-9 * data.scale()) << spec->label();
      EXPECT_LE(imbalance(z, data).norm(), 1e-10 * std::max(1.0, data.lambdas()[0])) << spec->label();
      best = std::min(best, objective_g(z, data, mu));

      const Classification c = classify(z, data, mu, tol);
      ASSERT_NE(c.kind, PointKind::Unclassified);
      if (c.kind == PointKind::StrictSaddle) {
        EXPECT_EQ(c.method, CurvatureMethod::Constructive);
        EXPECT_LE(*c.rayleigh, *c.bound + 1e-9) << spec->label();
        const double lambda_k = data.lambdas()[*c.escape_index];
        if (data.rank() <= d1) {
          EXPECT_NEAR(*c.quadform, -2.0 * lambda_k, 1e-9 * 2.0 * lambda_k);
        } else {
          EXPECT_LE(*c.quadform, -2.0 * (data.lambdas()[d1 - 1] - data.lambdas()[d1]) + 1e-9);
        }
        // a Rayleigh quotient can never undercut the smallest eigenvalue
        EXPECT_GE(*c.rayleigh, min_curvature(z, data, mu).min_eigenvalue - 1e-9);
      }
    }
    EXPECT_NEAR(best, optimum, 1e-9 * (1.0 + optimum));
  }
}

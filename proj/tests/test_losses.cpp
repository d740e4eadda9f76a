#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "h3d/losses.hpp"
#include "oracles.hpp"

using namespace h3d;

namespace {

const LossConfig kDefault{};

LossSample sample(double p, BoxDelta delta, double p_dir, bool dir_gt) {
  LossSample s;
  s.p = p;
  s.delta = delta;
  s.p_dir = p_dir;
  s.p_dir_gt = dir_gt;
  return s;
}

BoxDelta one(int k, double v) {
  BoxDelta d;
  d[k] = v;
  return d;
}

// Plain central difference with a fixed step, independent of the analysis module.
template <class F>
double central(F f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace

TEST(LossConfig, Validate) {
  EXPECT_NO_THROW(kDefault.validate());
  LossConfig c;
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.beta_dir = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.prob_floor = 0.6;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(FocalLoss, Examples) {
  EXPECT_EQ(focal_loss(1.0, kDefault), 0.0);
  EXPECT_NEAR(focal_loss(0.5, kDefault), 0.25 * 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(0.5, kDefault), 0.043322, 1e-6);
  const double at_floor = focal_loss(0.0, kDefault);
  EXPECT_TRUE(std::isfinite(at_floor));
  EXPECT_EQ(at_floor, focal_loss(1e-7, kDefault));
  EXPECT_GT(at_floor, focal_loss(1e-6, kDefault));
}

TEST(FocalLoss, StrictlyDecreasing) {
  double prev = focal_loss(1e-6, kDefault);
  for (int i = 1; i <= 1000; ++i) {
    const double p = 1e-6 + i * (1.0 - 2e-6) / 1000;
    const double v = focal_loss(p, kDefault);
    ASSERT_LT(v, prev);
    ASSERT_GE(v, 0.0);
    prev = v;
  }
}

TEST(FocalLossNegative, ExamplesAndMirror) {
  EXPECT_EQ(focal_loss_negative(0.0, kDefault), 0.0);
  // 0.75 * 0.25 * ln 2 = 0.1299651
  EXPECT_NEAR(focal_loss_negative(0.5, kDefault), 0.1875 * std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss_negative(0.5, kDefault), 0.1299651, 1e-7);
  LossConfig mirrored;
  mirrored.alpha = 1.0 - kDefault.alpha;
  for (double p : {0.05, 0.3, 0.5, 0.77, 0.99}) {
    EXPECT_NEAR(focal_loss(p, mirrored), focal_loss_negative(1 - p, kDefault), 1e-14);
    const double g = focal_loss_negative_grad(p, kDefault);
    EXPECT_NEAR(g, central([](double x) { return focal_loss_negative(x, kDefault); }, p, 1e-6), 1e-7 * std::max(1.0, std::abs(g)));
  }
}

TEST(SmoothL1, Examples) {
  EXPECT_EQ(smooth_l1(0.0, kDefault), 0.0);
  EXPECT_EQ(smooth_l1(2.0, kDefault), 1.5);
  EXPECT_EQ(smooth_l1(-2.0, kDefault), 1.5);
  EXPECT_EQ(smooth_l1(0.5, kDefault), 0.125);
  LossConfig printed;
  printed.smoothl1_form = SmoothL1Form::AsPrinted;
  EXPECT_EQ(smooth_l1(0.5, printed), 0.25);
  EXPECT_EQ(smooth_l1(2.0, printed), 1.5);
}

TEST(SmoothL1, QuadraticIsC1AtBreakpoint) {
  const double e = 1e-9;
  EXPECT_NEAR(smooth_l1(1 - e, kDefault), smooth_l1(1 + e, kDefault), 1e-8);
  EXPECT_NEAR(smooth_l1_grad(1 - e, kDefault), smooth_l1_grad(1 + e, kDefault), 1e-8);
}

TEST(RegLoss, Examples) {
  EXPECT_EQ(reg_loss(BoxDelta{}, kDefault), 0.0);
  EXPECT_EQ(reg_loss(one(0, 0.5), kDefault), 0.125);
  BoxDelta d;
  d.dx = 2;
  d.dy = 2;
  EXPECT_EQ(reg_loss(d, kDefault), 3.0);
  EXPECT_GT(reg_loss(one(6, 1e-3), kDefault), 0.0);
}

TEST(DirLoss, Examples) {
  EXPECT_NEAR(dir_loss(1.0, true, kDefault), 0.0, 1e-6);
  EXPECT_NEAR(dir_loss(0.0, false, kDefault), 0.0, 1e-6);
  EXPECT_NEAR(dir_loss(0.5, true, kDefault), 0.693147, 1e-6);
  EXPECT_NEAR(dir_loss(0.5, false, kDefault), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(dir_loss(0.0, true, kDefault)));
  EXPECT_TRUE(std::isfinite(dir_loss(1.0, false, kDefault)));
}

TEST(BaselineLoss, Examples) {
  EXPECT_NEAR(baseline_loss(sample(1, {}, 1, true), kDefault).total, 0.0, 1e-6);
  const BaselineResult r = baseline_loss(sample(0.5, one(0, 0.5), 0.5, true), kDefault);
  EXPECT_NEAR(r.total, 0.861469, 1e-6);
  EXPECT_EQ(r.total, r.terms.l_cls + r.terms.l_reg + r.terms.l_dir);
  EXPECT_EQ(r.terms.l_cls, focal_loss(0.5, kDefault));
  EXPECT_EQ(r.terms.l_reg, reg_loss(one(0, 0.5), kDefault));
  EXPECT_EQ(r.terms.l_dir, dir_loss(0.5, true, kDefault));
}

TEST(HarmonicLoss, SpotValues) {
  for (double l_dir : {0.0, 0.3, 1.0, 7.5}) EXPECT_EQ(harmonic_total({0, 0, l_dir}, kDefault), 0.0);
  const double ln2 = std::log(2.0);
  EXPECT_NEAR(harmonic_total({ln2, ln2, 1.0}, kDefault), 2.579442, 1e-6);
  EXPECT_NEAR(harmonic_total({ln2, ln2, 1.0}, kDefault), oracle::harmonic_total(ln2, ln2, 1.0, 2.0), 1e-15);
}

TEST(HarmonicLoss, MatchesOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 5), bd(1.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    LossConfig c;
    c.beta_dir = bd(rng);
    const LossTerms t{u(rng), u(rng), u(rng)};
    EXPECT_NEAR(harmonic_total(t, c), oracle::harmonic_total(t.l_cls, t.l_reg, t.l_dir, c.beta_dir), 1e-12);
  }
}

TEST(HarmonicLoss, LargeLossLimit) {
  const LossTerms t{20, 20, 20};
  EXPECT_NEAR(harmonic_total(t, kDefault) / 60.0, 1.0, 1e-8);
}

TEST(HarmonicWeights, Bounds) {
  std::mt19937_64 rng(6);
  std::exponential_distribution<double> e(0.5);
  for (int i = 0; i < 10000; ++i) {
    const LossTerms t{i == 0 ? 0.0 : e(rng), i == 0 ? 0.0 : e(rng), e(rng)};
    const HarmonicWeights w = harmonic_weights(t, kDefault);
    ASSERT_GT(w.beta_r, 0.0);
    ASSERT_LE(w.beta_r, 1.0);
    ASSERT_GT(w.beta_c, 0.0);
    ASSERT_LE(w.beta_c, 1.0);
    ASSERT_GT(w.w_cls, 1.0);
    ASSERT_LE(w.w_cls, 2.0);
    ASSERT_GT(w.w_reg, 1.0);
    ASSERT_LE(w.w_reg, 2.0);
    ASSERT_GE(w.w_dir, 0.0);
    ASSERT_LT(w.w_dir, 1.0);
  }
}

TEST(BaselineGrads, Examples) {
  EXPECT_EQ(baseline_grads(sample(1, {}, 0.7, true), kDefault).d_p, 0.0);
  const double j = baseline_grads(sample(0.5, {}, 0.7, true), kDefault).d_p;
  EXPECT_NEAR(j, -0.298287, 1e-6);
  EXPECT_NEAR(j, -(0.5) * (2 - 1 + 2 * std::log(2.0)) / 4, 1e-15);
  EXPECT_NEAR(j, central([](double p) { return focal_loss(p, kDefault); }, 0.5, 1e-6), 1e-6 * std::abs(j));
  const GradRecord g = baseline_grads(sample(0.5, one(2, 2.0), 0.7, true), kDefault);
  EXPECT_EQ(g.d_delta[2], 1.0);
  EXPECT_EQ(baseline_grads(sample(0.5, one(2, -2.0), 0.7, true), kDefault).d_delta[2], -1.0);
}

TEST(BaselineGrads, DirSignConvention) {
  // Derivatives of the loss itself: pushing p' toward the label lowers the loss.
  EXPECT_NEAR(dir_loss_grad(0.25, true, kDefault), -4.0, 1e-12);
  EXPECT_NEAR(dir_loss_grad(0.25, false, kDefault), 1.0 / 0.75, 1e-12);
}

TEST(BaselineGrads, SeparabilityBitIdentical) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.001, 0.999), r(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const double p = u(rng);
    const double ref = baseline_grads(sample(p, {}, 0.5, true), kDefault).d_p;
    for (int k = 0; k < 20; ++k) {
      BoxDelta d;
      for (int c = 0; c < 7; ++c) d[c] = r(rng);
      const double v = baseline_grads(sample(p, d, u(rng), k % 2 == 0), kDefault).d_p;
      ASSERT_EQ(std::memcmp(&v, &ref, sizeof v), 0);
    }
  }
}

TEST(HarmonicGrads, CouplingAlongRegression) {
  for (double p : {0.05, 0.3, 0.6, 0.95}) {
    const double a = harmonic_grads(sample(p, one(0, 0.2), 0.5, true), kDefault).d_p;
    const double b = harmonic_grads(sample(p, one(0, 1.7), 0.5, true), kDefault).d_p;
    EXPECT_NE(a, b) << "p=" << p;
  }
}

TEST(HarmonicGrads, JointOptimumIsFixedPoint) {
  for (bool gt : {false, true}) {
    const GradRecord g = harmonic_grads(sample(1.0, {}, gt ? 1.0 : 0.0, gt), kDefault);
    EXPECT_EQ(g.d_p, 0.0);
    for (double v : g.d_delta) EXPECT_EQ(v, 0.0);
    // w_dir vanishes exactly when l_cls = l_reg = 0.
    EXPECT_EQ(g.d_pdir, 0.0);
  }
  for (double pd : {0.01, 0.5, 0.99}) EXPECT_EQ(harmonic_grads(sample(1.0, {}, pd, false), kDefault).d_pdir, 0.0);
}

TEST(HarmonicGrads, FormulaStructure) {
  const LossSample s = sample(0.4, one(3, 0.7), 0.3, false);
  const LossTerms t = loss_terms(s, kDefault);
  const ComponentGrads c = component_grads(s, kDefault);
  const double br = std::exp(-t.l_reg), bc = std::exp(-t.l_cls);
  const GradRecord g = harmonic_grads(s, kDefault);
  EXPECT_NEAR(g.d_p, (1 + br) * c.dcls_dp + (t.l_reg - t.l_dir / 2) * (-bc * c.dcls_dp), 1e-14);
  EXPECT_NEAR(g.d_delta[3], (1 + bc) * c.dreg_ddelta[3] + (t.l_cls - t.l_dir / 2) * (-br * c.dreg_ddelta[3]), 1e-14);
  EXPECT_NEAR(g.d_pdir, (1 - (br + bc) / 2) * c.ddir_dpdir, 1e-14);
  EXPECT_NEAR(g.loss, harmonic_loss(s, kDefault).total, 1e-15);
}

TEST(HarmonicGrads, MatchCentralDifferences) {
  // Coarse sanity check with a plain stencil; the tight check lives in the analysis tests.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 0.95), r(-2.5, 2.5);
  for (int i = 0; i < 300; ++i) {
    BoxDelta d;
    for (int c = 0; c < 7; ++c) d[c] = r(rng);
    const LossSample s = sample(u(rng), d, u(rng), i % 2 == 0);
    const GradRecord g = harmonic_grads(s, kDefault);
    auto f_p = [&](double x) {
      LossSample t = s;
      t.p = x;
      return harmonic_loss(t, kDefault).total;
    };
    auto f_pd = [&](double x) {
      LossSample t = s;
      t.p_dir = x;
      return harmonic_loss(t, kDefault).total;
    };
    EXPECT_NEAR(g.d_p, central(f_p, s.p, 1e-6), 1e-6 * std::max(1.0, std::abs(g.d_p)));
    EXPECT_NEAR(g.d_pdir, central(f_pd, s.p_dir, 1e-6), 1e-6 * std::max(1.0, std::abs(g.d_pdir)));
    for (int k = 0; k < 7; ++k) {
      if (std::abs(std::abs(d[k]) - 1.0) < 1e-3) continue;
      auto f_d = [&](double x) {
        LossSample t = s;
        t.delta[k] = x;
        return harmonic_loss(t, kDefault).total;
      };
      EXPECT_NEAR(g.d_delta[k], central(f_d, d[k], 1e-6), 1e-6 * std::max(1.0, std::abs(g.d_delta[k])));
    }
  }
}

TEST(LossKind, Strings) {
  EXPECT_EQ(parse_loss_kind("baseline"), LossKind::Baseline);
  EXPECT_EQ(parse_loss_kind(to_string(LossKind::Harmonic)), LossKind::Harmonic);
  EXPECT_THROW(parse_loss_kind("other"), std::invalid_argument);
  EXPECT_EQ(parse_smoothl1_form(to_string(SmoothL1Form::AsPrinted)), SmoothL1Form::AsPrinted);
}

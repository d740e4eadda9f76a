#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "h3d/eval.hpp"
#include "oracles.hpp"

using namespace h3d;

namespace {

Box3D car(double x, double y, double yaw = 0.0) { return Box3D::make(x, y, 0, 4, 2, 1.5, yaw); }

// 3 gts, 4 dets: exact, pi-flipped, far-away FP, shifted by 1 m along the
// length (IoU 0.6).
FrameResult golden_frame() {
  FrameResult f;
  f.gts = {car(0, 0), car(20, 0), car(0, 20)};
  f.dets = {{car(0, 0), 0.9}, {car(20, 0, kPi), 0.8}, {car(-20, -20), 0.7}, {car(1, 20), 0.6}};
  return f;
}

FrameResult random_frame(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-10, 10), jitter(-0.8, 0.8), ang(-kPi, kPi), u(0, 1);
  FrameResult f;
  const int n = 1 + static_cast<int>(u(rng) * 5);
  for (int i = 0; i < n; ++i) f.gts.push_back(car(pos(rng), pos(rng), ang(rng)));
  for (const Box3D& g : f.gts) {
    if (u(rng) < 0.8) f.dets.push_back({car(g.x + jitter(rng), g.y + jitter(rng), g.yaw + 2 * jitter(rng)), u(rng)});
  }
  const int fps = static_cast<int>(u(rng) * 3);
  for (int i = 0; i < fps; ++i) f.dets.push_back({car(pos(rng), pos(rng), ang(rng)), u(rng)});
  return f;
}

}  // namespace

TEST(Nms, Examples) {
  const auto kept = nms({{car(0, 0), 0.8}, {car(0, 0), 0.9}}, 0.5, IouKind::Bev);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);

  EXPECT_EQ(nms({{car(0, 0), 0.5}, {car(10, 0), 0.6}, {car(20, 0), 0.7}}, 0.5, IouKind::Bev).size(), 3u);

  const Box3D a = Box3D::make(0, 0, 0, 2, 2, 1, 0);
  const Box3D b = Box3D::make(1.5, 0, 0, 2, 2, 1, 0);
  const Box3D c = Box3D::make(3, 0, 0, 2, 2, 1, 0);
  ASSERT_GT(bev_iou(a, b), 0.1);
  ASSERT_GT(bev_iou(b, c), 0.1);
  ASSERT_EQ(bev_iou(a, c), 0.0);
  const auto chain = nms({{c, 0.7}, {b, 0.8}, {a, 0.9}}, 0.1, IouKind::Bev);
  ASSERT_EQ(chain.size(), 2u);
  EXPECT_EQ(chain[0].box, a);
  EXPECT_EQ(chain[1].box, c);
}

TEST(Nms, TiesKeepInputOrder) {
  const auto kept = nms({{car(0, 0), 0.5}, {car(0.1, 0), 0.5}}, 0.5, IouKind::Bev);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].box.x, 0.0);
}

TEST(Nms, OutputSortedAndThresholdStrict) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const FrameResult f = random_frame(rng);
    const auto kept = nms(f.dets, 0.3, IouKind::Bev);
    for (std::size_t k = 1; k < kept.size(); ++k) EXPECT_GE(kept[k - 1].score, kept[k].score);
    for (std::size_t p = 0; p < kept.size(); ++p) {
      for (std::size_t q = p + 1; q < kept.size(); ++q) EXPECT_LE(bev_iou(kept[p].box, kept[q].box), 0.3);
    }
  }
}

TEST(Match, Examples) {
  FrameResult f;
  f.gts = {car(0, 0)};
  f.dets = {{car(0, 0), 0.5}};
  FrameMatch m = match_frame(f, 0.7, IouKind::Bev);
  EXPECT_TRUE(m.dets[0].tp);
  EXPECT_EQ(m.dets[0].gt, 0);
  EXPECT_DOUBLE_EQ(m.dets[0].iou, 1.0);

  f.dets = {{car(0, 0), 0.4}, {car(0.1, 0), 0.6}};
  m = match_frame(f, 0.7, IouKind::Bev);
  EXPECT_TRUE(m.dets[1].tp);
  EXPECT_FALSE(m.dets[0].tp);

  f.dets = {{car(0.73373, 0), 0.9}};
  m = match_frame(f, 0.7, IouKind::Bev);
  EXPECT_NEAR(bev_iou(f.dets[0].box, f.gts[0]), 0.69, 1e-4);
  EXPECT_FALSE(m.dets[0].tp);
  EXPECT_FALSE(m.gt_matched[0]);
}

TEST(Match, PermutationInvariant) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    FrameResult f = random_frame(rng);
    const FrameMatch a = match_frame(f, 0.5, IouKind::Bev);
    std::vector<std::size_t> perm(f.dets.size());
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
    std::shuffle(perm.begin(), perm.end(), rng);
    FrameResult g = f;
    for (std::size_t k = 0; k < perm.size(); ++k) g.dets[k] = f.dets[perm[k]];
    const FrameMatch b = match_frame(g, 0.5, IouKind::Bev);
    EXPECT_EQ(a.gt_matched, b.gt_matched);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      EXPECT_EQ(b.dets[k].tp, a.dets[perm[k]].tp);
      EXPECT_EQ(b.dets[k].gt, a.dets[perm[k]].gt);
    }
  }
}

TEST(Ap40, Examples) {
  FrameResult f;
  f.gts = {car(0, 0), car(10, 0)};
  f.dets = {{car(0, 0), 0.9}, {car(10, 0), 0.8}};
  EXPECT_EQ(ap40({f}, 0.7, IouKind::Bev), 1.0);

  f.dets = {{car(0, 0), 0.9}};
  EXPECT_EQ(ap40({f}, 0.7, IouKind::Bev), 0.5);

  f.dets.clear();
  EXPECT_EQ(ap40({f}, 0.7, IouKind::Bev), 0.0);

  EXPECT_THROW(ap40({FrameResult{}}, 0.7, IouKind::Bev), EvalError);
  EXPECT_THROW(ap40({}, 0.7, IouKind::Bev), EvalError);
}

TEST(Ap40, PooledAcrossFrames) {
  FrameResult a, b;
  a.gts = {car(0, 0)};
  a.dets = {{car(0, 0), 0.9}};
  b.gts = {car(0, 0)};
  b.dets = {{car(0, 0), 0.8}};
  EXPECT_EQ(ap40({a, b}, 0.7, IouKind::Bev), 1.0);
}

TEST(Aos40, Examples) {
  FrameResult f;
  f.gts = {car(0, 0), car(10, 0)};
  f.dets = {{car(0, 0), 0.9}, {car(10, 0), 0.8}};
  EXPECT_EQ(aos40({f}, 0.7, IouKind::Bev), ap40({f}, 0.7, IouKind::Bev));

  f.dets = {{car(0, 0, kPi), 0.9}, {car(10, 0, kPi), 0.8}};
  EXPECT_EQ(ap40({f}, 0.7, IouKind::Bev), 1.0);
  EXPECT_NEAR(aos40({f}, 0.7, IouKind::Bev), 0.0, 1e-15);

  FrameResult sq;
  sq.gts = {Box3D::make(0, 0, 0, 2, 2, 1, 0)};
  sq.dets = {{Box3D::make(0, 0, 0, 2, 2, 1, kPi / 2), 0.9}};
  EXPECT_NEAR(ap40({sq}, 0.7, IouKind::Bev), 1.0, 1e-12);
  EXPECT_NEAR(aos40({sq}, 0.7, IouKind::Bev), 0.5, 1e-12);
}

TEST(Evaluate, GoldenFrame) {
  const EvalSummary s = evaluate({golden_frame()}, {0.7, 0.5}, IouKind::Bev);
  EXPECT_EQ(s.num_gt, 3);
  EXPECT_EQ(s.num_det, 4);
  const ThresholdMetrics& hi = s.at(0.7);
  EXPECT_NEAR(hi.ap, 26.0 / 40, 1e-12);
  EXPECT_NEAR(hi.aos, 19.5 / 40, 1e-12);
  EXPECT_EQ(hi.tp, 2);
  EXPECT_EQ(hi.fp, 2);
  EXPECT_EQ(hi.fn, 1);
  const ThresholdMetrics& lo = s.at(0.5);
  EXPECT_NEAR(lo.ap, 36.5 / 40, 1e-12);
  EXPECT_NEAR(lo.aos, 26.5 / 40, 1e-12);
  EXPECT_EQ(lo.tp, 3);
  EXPECT_EQ(lo.fp, 1);
  EXPECT_EQ(lo.fn, 0);
  ASSERT_TRUE(s.pearson_r.has_value());
  EXPECT_NEAR(*s.pearson_r, oracle::pearson({0.9, 0.8, 0.6}, {1.0, 1.0, 0.6}), 1e-12);
  EXPECT_THROW(s.at(0.3), std::out_of_range);
}

TEST(Evaluate, PerfectAndEmpty) {
  FrameResult f;
  f.gts = {car(0, 0), car(10, 0, 1.0)};
  f.dets = {{f.gts[0], 1.0}, {f.gts[1], 1.0}};
  const EvalSummary p = evaluate({f}, {0.7, 0.5}, IouKind::Iou3d);
  for (const auto& t : p.per_threshold) {
    EXPECT_EQ(t.ap, 1.0);
    EXPECT_EQ(t.aos, 1.0);
  }
  f.dets.clear();
  const EvalSummary e = evaluate({f}, {0.7}, IouKind::Bev);
  EXPECT_EQ(e.at(0.7).ap, 0.0);
  EXPECT_EQ(e.at(0.7).fn, 2);
  EXPECT_FALSE(e.pearson_r.has_value());
}

TEST(Evaluate, RandomInvariants) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    std::vector<FrameResult> frames;
    for (int k = 0; k < 3; ++k) frames.push_back(random_frame(rng));
    double prev_ap = 2.0;
    for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double ap = ap40(frames, thr, IouKind::Bev);
      const double aos = aos40(frames, thr, IouKind::Bev);
      EXPECT_LE(aos, ap + 1e-12);
      EXPECT_LE(ap, prev_ap + 1e-12);
      prev_ap = ap;
    }
    const double before = ap40(frames, 0.5, IouKind::Bev);
    frames[0].dets.push_back({car(100, 100), 0.0});
    EXPECT_LE(ap40(frames, 0.5, IouKind::Bev), before);
  }
}

TEST(Pearson, Examples) {
  EXPECT_NEAR(*pearson({0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}), 1.0, 1e-15);
  EXPECT_NEAR(*pearson({0.1, 0.5, 0.9}, {0.9, 0.5, 0.1}), -1.0, 1e-15);
  // Hand dataset: sxy = 0.02, sxx = 0.02, syy = 0.04667, r = 0.6547.
  const std::vector<double> x{0.9, 0.8, 0.7}, y{0.8, 0.9, 0.6};
  EXPECT_NEAR(*pearson(x, y), oracle::pearson(x, y), 1e-12);
  EXPECT_NEAR(*pearson(x, y), 0.654654, 1e-6);
  EXPECT_FALSE(pearson({1.0}, {2.0}).has_value());
  EXPECT_FALSE(pearson({1.0, 1.0}, {2.0, 3.0}).has_value());
}

TEST(Pearson, ConfidenceIouCorrelation) {
  FrameResult f;
  f.gts = {car(0, 0), car(10, 0), car(20, 0)};
  f.dets = {{car(0, 0), 0.0}, {car(10.5, 0), 0.0}, {car(21, 0), 0.0}};
  for (auto& d : f.dets) d.score = bev_iou(d.box, f.gts[static_cast<std::size_t>(&d - f.dets.data())]);
  EXPECT_NEAR(*confidence_iou_correlation({f}, IouKind::Bev), 1.0, 1e-12);
  for (auto& d : f.dets) d.score = 1.0 - d.score;
  EXPECT_NEAR(*confidence_iou_correlation({f}, IouKind::Bev), -1.0, 1e-12);
  for (auto& d : f.dets) d.score = 0.5;
  EXPECT_FALSE(confidence_iou_correlation({f}, IouKind::Bev).has_value());
}

TEST(Summary, JsonAndTable) {
  const EvalSummary s = evaluate({golden_frame()}, {0.7, 0.5}, IouKind::Bev);
  const auto j = nlohmann::json::parse(summary_json(s));
  EXPECT_EQ(j["iou_kind"], "bev");
  EXPECT_EQ(j["num_gt"], 3);
  EXPECT_EQ(j["thresholds"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["thresholds"][0]["ap"].get<double>(), 26.0 / 40);
  EXPECT_EQ(summary_json(s), summary_json(evaluate({golden_frame()}, {0.7, 0.5}, IouKind::Bev)));
  EXPECT_NE(summary_table(s).find("0.7"), std::string::npos);
}

TEST(IouKindStrings, Parse) {
  EXPECT_EQ(parse_iou_kind("3d"), IouKind::Iou3d);
  EXPECT_EQ(parse_iou_kind("bev"), IouKind::Bev);
  EXPECT_THROW(parse_iou_kind("2d"), std::invalid_argument);
}

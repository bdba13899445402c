#include "longexp/motionblur.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "longexp/burst_io.h"
#include "longexp/errors.h"
#include "longexp/synth.h"

namespace longexp {
namespace {

constexpr double kPi = std::numbers::pi;

Image textured(int w, int h, Vec2 offset = {}, std::uint64_t seed = 3) {
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(x, y) = static_cast<float>(
          0.1 + 0.8 * value_noise((x + offset.x) / 4.0, (y + offset.y) / 4.0, seed));
  return img;
}

Image constant_field(int w, int h, Vec2 v) {
  Image f(w, h, 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.set_vec2(x, y, v);
  return f;
}

KernelMap kernel(int w, int h, Vec2 d, float weight) {
  return {constant_field(w, h, d), Image(w, h, 1, weight)};
}

double rms_diff(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s / a.data().size());
}

// ----- flow and kernels -----

TEST(FlowTest, IdenticalFramesGiveZeroFlow) {
  const Image a = textured(64, 48);
  const Image f = estimate_flow(a, a);
  for (float v : f.data()) EXPECT_NEAR(v, 0.0f, 1e-4);
}

TEST(FlowTest, GlobalShift) {
  const Image a = textured(128, 96);
  const Image b = textured(128, 96, {10.0, 0.0});  // b(x) = a(x + 10)
  const Image da = estimate_flow(b, a);
  const Image db = estimate_flow(a, b);
  for (int y = 16; y < 80; y += 3)
    for (int x = 16; x < 100; x += 3) {
      EXPECT_NEAR(da.at(x, y, 0), 10.0, 0.5);
      EXPECT_NEAR(da.at(x, y, 1), 0.0, 0.5);
    }
  for (int y = 16; y < 80; y += 3)
    for (int x = 28; x < 112; x += 3) {
      EXPECT_NEAR(db.at(x, y, 0), -10.0, 0.5);
      EXPECT_NEAR(db.at(x, y, 1), 0.0, 0.5);
    }
}

TEST(KernelTest, IdenticalFramesGiveZeroSegmentsAndEvenWeights) {
  const Image a = textured(64, 48);
  const KernelPair k = predict_kernels(a, a);
  for (float v : k.a.delta.data()) EXPECT_NEAR(v, 0.0f, 1e-4);
  for (float v : k.b.delta.data()) EXPECT_NEAR(v, 0.0f, 1e-4);
  for (float v : k.a.weight.data()) EXPECT_FLOAT_EQ(v, 0.5f);
  for (float v : k.b.weight.data()) EXPECT_FLOAT_EQ(v, 0.5f);
  EXPECT_EQ(k.clamped_pixels, 0);
}

TEST(KernelTest, WeightsSumToOne) {
  Image da = constant_field(20, 10, {3, 0});
  Image db = constant_field(20, 10, {-3, 0});
  da.set_vec2(5, 5, {9, 4});  // inconsistent pixel
  const KernelPair k = kernels_from_flows(da, db);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) EXPECT_NEAR(k.a.weight.at(x, y) + k.b.weight.at(x, y), 1.0f, 1e-6);
  EXPECT_LT(k.a.weight.at(5, 5), 0.5f);  // weight moves to the consistent side
}

TEST(KernelTest, LargeDisparityClampedAndFlagged) {
  const KernelPair k = kernels_from_flows(constant_field(16, 16, {70, 0}), constant_field(16, 16, {-70, 0}));
  EXPECT_EQ(k.clamped_pixels, 256);
  EXPECT_DOUBLE_EQ(k.clamp_fraction, 1.0);
  EXPECT_NEAR(k.a.delta.at(3, 3, 0), 64.0f, 1e-4);
  EXPECT_NEAR(k.b.delta.at(3, 3, 0), -64.0f, 1e-4);
  try {
    check_disparity(k);
    FAIL() << "expected fallback";
  } catch (const FallbackError& e) {
    EXPECT_EQ(e.reason(), FallbackReason::kDisparityOverflow);
  }
}

TEST(KernelTest, SmallClampFractionTolerated) {
  Image da = constant_field(10, 10, {1, 0});
  Image db = constant_field(10, 10, {-1, 0});
  for (int x = 0; x < 10; ++x) da.set_vec2(x, 0, {80, 0});  // 10% exactly
  const KernelPair k = kernels_from_flows(da, db);
  EXPECT_EQ(k.clamped_pixels, 10);
  EXPECT_NO_THROW(check_disparity(k));
}

TEST(KernelTest, ResizeScalesSegments) {
  const KernelMap k = kernel(16, 12, {2, -1}, 0.5f);
  const KernelMap r = resize_kernel(k, 64, 48);
  EXPECT_NEAR(r.delta.at(10, 10, 0), 8.0f, 1e-5);
  EXPECT_NEAR(r.delta.at(10, 10, 1), -4.0f, 1e-5);
  EXPECT_NEAR(r.weight.at(10, 10), 0.5f, 1e-6);
}

TEST(AdaptiveSamplesTest, TwoPerPixelClamped) {
  EXPECT_EQ(adaptive_samples(0.0), 2);
  EXPECT_EQ(adaptive_samples(0.4), 2);
  EXPECT_EQ(adaptive_samples(3.2), 7);
  EXPECT_EQ(adaptive_samples(10.0), 20);
  EXPECT_EQ(adaptive_samples(1000.0), 256);
  EXPECT_EQ(adaptive_samples(1000.0, 64), 64);
}

// ----- line-kernel integral -----

// Direct per-pixel evaluation with no shared state.
double brute_force_pixel(const Image& a, const Image& b, const KernelMap& ka,
                         const KernelMap& kb, int x, int y, int c, bool ramp) {
  double out = 0.0;
  for (int i = 0; i < 2; ++i) {
    const Image& img = i == 0 ? a : b;
    const KernelMap& k = i == 0 ? ka : kb;
    const double dx = k.delta.at(x, y, 0), dy = k.delta.at(x, y, 1);
    const int n_total = adaptive_samples(std::hypot(dx, dy));
    double wsum = 0.0, sum = 0.0;
    for (int n = 0; n < n_total; ++n) {
      const double wn = ramp ? 1.0 - double(n) / n_total : 1.0;
      const double t = double(n) / (n_total - 1);
      double sx = std::clamp(x + t * dx, 0.0, img.width() - 1.0);
      double sy = std::clamp(y + t * dy, 0.0, img.height() - 1.0);
      const int x0 = std::min(static_cast<int>(std::floor(sx)), img.width() - 2);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), img.height() - 2);
      const double fx = sx - x0, fy = sy - y0;
      const double v = (1 - fx) * (1 - fy) * img.at(x0, y0, c) + fx * (1 - fy) * img.at(x0 + 1, y0, c) +
                       (1 - fx) * fy * img.at(x0, y0 + 1, c) + fx * fy * img.at(x0 + 1, y0 + 1, c);
      sum += wn * v;
      wsum += wn;
    }
    out += k.weight.at(x, y) * sum / wsum;
  }
  return out;
}

TEST(RenderPairTest, ZeroSegmentsAverage) {
  const Image a(8, 8, 3, 0.2f), b(8, 8, 3, 0.6f);
  const Image out = render_pair_linear(a, b, kernel(8, 8, {}, 0.5f), kernel(8, 8, {}, 0.5f));
  for (float v : out.data()) EXPECT_NEAR(v, 0.4f, 1e-6);
}

TEST(RenderPairTest, MatchesBruteForceOnRandomInputs) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0), d(-6.0, 6.0);
  for (int trial = 0; trial < 4; ++trial) {
    Image a(32, 32, 1), b(32, 32, 1);
    KernelMap ka{Image(32, 32, 2), Image(32, 32, 1)}, kb{Image(32, 32, 2), Image(32, 32, 1)};
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        a.at(x, y) = static_cast<float>(u(rng));
        b.at(x, y) = static_cast<float>(u(rng));
        ka.delta.set_vec2(x, y, {d(rng), d(rng)});
        kb.delta.set_vec2(x, y, {d(rng), d(rng)});
        const double w = u(rng);
        ka.weight.at(x, y) = static_cast<float>(w);
        kb.weight.at(x, y) = static_cast<float>(1.0 - w);
      }
    for (bool ramp : {true, false}) {
      RenderOptions opt;
      opt.ramp = ramp;
      const Image out = render_pair_linear(a, b, ka, kb, opt, 2);
      double sq = 0.0;
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const double e = out.at(x, y) - brute_force_pixel(a, b, ka, kb, x, y, 0, ramp);
          sq += e * e;
        }
      EXPECT_LE(std::sqrt(sq / 1024.0), 1e-4);
    }
  }
}

TEST(RenderPairTest, ImpulseStreakConservesMass) {
  const int w = 64, h = 16;
  Image a(w, h, 1), b(w, h, 1);
  a.at(20, 8) = 1.0f;
  b.at(30, 8) = 1.0f;
  // b(x) = a(x - 10): delta_a = (-10, 0), delta_b = (10, 0).
  const Image out = render_pair_linear(a, b, kernel(w, h, {-10, 0}, 0.5f), kernel(w, h, {10, 0}, 0.5f));
  double mass = 0.0;
  for (float v : out.data()) mass += v;
  EXPECT_NEAR(mass, 1.0, 1e-3);
  for (int x = 10; x <= 40; ++x) {
    if (x < 20 || x > 30) EXPECT_LT(out.at(x, 8), 1e-6) << x;
  }
  for (int x = 21; x < 30; ++x) EXPECT_GT(out.at(x, 8), 0.0f) << x;
}

// ----- instantaneous flow, spline, extrapolation -----

TEST(InstantaneousFlowTest, StraightPath) {
  const Vec2 d = instantaneous_flow({4, 0}, {4, 0});
  EXPECT_NEAR(d.x, 4.0, 1e-12);
  EXPECT_NEAR(d.y, 0.0, 1e-12);
}

TEST(InstantaneousFlowTest, HarmonicMeanOfCollinear) {
  EXPECT_NEAR(norm(instantaneous_flow({2, 0}, {6, 0})), 3.0, 1e-12);
}

TEST(InstantaneousFlowTest, DoublingBackIsZero) {
  const Vec2 d = instantaneous_flow({3, 0}, {-3, 0});
  EXPECT_EQ(d.x, 0.0);
  EXPECT_EQ(d.y, 0.0);
}

TEST(InstantaneousFlowTest, ZeroInputIsZero) {
  EXPECT_EQ(norm(instantaneous_flow({0, 0}, {5, 1})), 0.0);
  EXPECT_EQ(norm(instantaneous_flow({5, 1}, {0, 0})), 0.0);
}

TEST(InstantaneousFlowTest, ArcCorrectionOnCircle) {
  // Chords of a unit-speed circle: the tangent magnitude is the arc length
  // per step, not the chord length.
  const double step = 0.3, r = 10.0;
  const Vec2 prev{r * std::cos(-step), r * std::sin(-step)}, cur{r, 0.0};
  const Vec2 next{r * std::cos(step), r * std::sin(step)};
  const Vec2 d = instantaneous_flow(next - cur, cur - prev);
  EXPECT_NEAR(d.x, 0.0, 1e-9);
  // theta between chords is the step angle; chord * theta / sin(theta)
  const double chord = norm(next - cur);
  EXPECT_NEAR(d.y, chord * step / std::sin(step), 1e-9);
}

TEST(InstantaneousFlowTest, SmallAngleSeriesIsContinuous) {
  const double a = instantaneous_flow({5, 0}, {5 * std::cos(9.9e-4), 5 * std::sin(9.9e-4)}).x;
  const double b = instantaneous_flow({5, 0}, {5 * std::cos(1.01e-3), 5 * std::sin(1.01e-3)}).x;
  EXPECT_NEAR(a, b, 1e-7);
}

TEST(SplineTest, DegeneratesToLine) {
  const CubicPath p = build_spline({2, 3}, {5, 0}, {5, 0}, {5, 0});
  for (double t = 0.0; t <= 1.0; t += 0.125) {
    const Vec2 q = p.at(t);
    EXPECT_NEAR(q.x, 2.0 + 5.0 * t, 1e-12);
    EXPECT_NEAR(q.y, 3.0, 1e-12);
  }
}

TEST(SplineTest, ConstraintsHoldExactly) {
  const CubicPath p = build_spline({1.5, -2}, {7, 3}, {2, 9}, {-4, 1});
  EXPECT_EQ(p.at(0.0), (Vec2{1.5, -2}));
  EXPECT_EQ(p.at(1.0), (Vec2{8.5, 1}));
  EXPECT_EQ(p.derivative(0.0), (Vec2{2, 9}));
  EXPECT_EQ(p.derivative(1.0), (Vec2{-4, 1}));
}

TEST(SplineTest, NinetyDegreeTurnMatchesHermiteBasis) {
  const Vec2 o{0, 0}, plus{10, 10}, m0{10, 0}, m1{0, 10};
  const CubicPath p = build_spline(o, plus, m0, m1);
  double max_dev = 0.0, oracle_dev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    const Vec2 q = p.at(t);
    max_dev = std::max(max_dev, std::abs(cross(plus, q - o)) / norm(plus));
    // Hermite basis evaluated independently.
    const double h10 = t * t * t - 2 * t * t + t, h01 = -2 * t * t * t + 3 * t * t;
    const double h11 = t * t * t - t * t;
    const Vec2 r = m0 * h10 + plus * h01 + m1 * h11;
    oracle_dev = std::max(oracle_dev, std::abs(cross(plus, r)) / norm(plus));
  }
  EXPECT_NEAR(max_dev, oracle_dev, 1e-9);
  EXPECT_GT(max_dev, 0.5);
}

TEST(ExtrapolateTest, CollinearEqualSpacing) {
  const Vec2 d = extrapolate_flow_endpoint({0, 0}, {1, 0}, {2, 0});
  EXPECT_NEAR(d.x, 3.0, 1e-12);
  EXPECT_NEAR(d.y, 0.0, 1e-12);
}

TEST(ExtrapolateTest, DegenerateRepeatsC) {
  EXPECT_EQ(extrapolate_flow_endpoint({0, 0}, {2, 2}, {2, 2}), (Vec2{2, 2}));
}

TEST(ExtrapolateTest, LengthNeverExceedsLastStep) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 200; ++i) {
    const Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    EXPECT_LE(norm(extrapolate_flow_endpoint(a, b, c) - c), norm(c - b) + 1e-12);
  }
}

TEST(ExtrapolateTest, ContinuesTurn) {
  // Quarter-circle points continue around the circle.
  const Vec2 a{10, 0}, b{0, 10}, c{-10, 0};
  const Vec2 d = extrapolate_flow_endpoint(a, b, c);
  EXPECT_NEAR(d.x, 0.0, 1e-9);
  EXPECT_NEAR(d.y, -10.0, 1e-9);
}

// ----- accumulation -----

FlowSequence uniform_flows(int w, int h, int pairs, Vec2 v) {
  FlowSequence seq;
  for (int k = 0; k < pairs; ++k) {
    seq.forward.push_back(constant_field(w, h, v));
    seq.backward.push_back(constant_field(w, h, v));
    seq.weight_a.emplace_back(w, h, 1, 0.5f);
    seq.weight_b.emplace_back(w, h, 1, 0.5f);
  }
  return seq;
}

TEST(AccumulateTest, ZeroFlowIdenticalFramesReturnsInput) {
  Image f = textured(24, 16);
  const Image out = accumulate_burst({f, f}, uniform_flows(24, 16, 1, {}));
  for (std::size_t i = 0; i < f.data().size(); ++i) EXPECT_NEAR(out.data()[i], f.data()[i], 1e-4);
}

TEST(AccumulateTest, UniformFieldStaysUniform) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-8, 8);
  FlowSequence seq = uniform_flows(32, 24, 3, {});
  for (Image* f : {&seq.forward[0], &seq.forward[1], &seq.forward[2], &seq.backward[0],
                   &seq.backward[1], &seq.backward[2]})
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 32; ++x) f->set_vec2(x, y, {d(rng), d(rng)});
  const Image gray(32, 24, 3, 0.37f);
  for (bool spline : {true, false}) {
    AccumulateOptions opt;
    opt.spline = spline;
    const Image out = accumulate_burst({gray, gray, gray, gray}, seq, opt);
    for (float v : out.data()) EXPECT_NEAR(v, 0.37f, 1e-3);
  }
}

TEST(AccumulateTest, DoublingSamplesConverges) {
  std::vector<Image> frames;
  for (int k = 0; k < 3; ++k) frames.push_back(textured(40, 30, {3.0 * k, 1.0 * k}));
  const FlowSequence seq = uniform_flows(40, 30, 2, {-3, -1});
  AccumulateOptions a, b;
  a.fixed_samples = 64;
  b.fixed_samples = 128;
  EXPECT_LT(rms_diff(accumulate_burst(frames, seq, a), accumulate_burst(frames, seq, b)), 1e-3);
}

TEST(AccumulateTest, SoftGammaRaisesClippedTrailPeak) {
  const int w = 48, h = 8;
  Image a(w, h, 1, 0.05f), b(w, h, 1, 0.05f);
  a.at(10, 4) = 1.0f;
  b.at(26, 4) = 1.0f;
  const FlowSequence seq = uniform_flows(w, h, 1, {16, 0});
  AccumulateOptions soft, linear;
  linear.soft_gamma_k = 1.0;
  const Image s = accumulate_burst({a, b}, seq, soft);
  const Image l = accumulate_burst({a, b}, seq, linear);
  float peak_s = 0.0f, peak_l = 0.0f;
  for (int x = 12; x < 25; ++x) {
    peak_s = std::max(peak_s, s.at(x, 4));
    peak_l = std::max(peak_l, l.at(x, 4));
  }
  EXPECT_GE(peak_s, peak_l);
  EXPECT_GT(peak_l, 0.05f);
}

TEST(AccumulateTest, MismatchedInputsRejected) {
  const Image f(8, 8, 1);
  EXPECT_THROW(accumulate_burst({f, f, f}, uniform_flows(8, 8, 1, {})), InputError);
  EXPECT_THROW(accumulate_burst({f}, FlowSequence{}), InputError);
}

TEST(AccumulateTest, AppendPairOrientsFlowsForward) {
  KernelPair pair;
  pair.a = kernel(8, 6, {2, 0}, 0.25f);   // samples a on b's grid
  pair.b = kernel(8, 6, {-2, 0}, 0.75f);  // samples b on a's grid
  FlowSequence seq;
  append_pair(seq, pair, 16, 12);
  ASSERT_EQ(seq.pairs(), 1);
  EXPECT_NEAR(seq.forward[0].at(5, 5, 0), -4.0f, 1e-5);
  EXPECT_NEAR(seq.backward[0].at(5, 5, 0), -4.0f, 1e-5);
  EXPECT_NEAR(seq.weight_a[0].at(5, 5), 0.25f, 1e-6);
  EXPECT_NEAR(seq.weight_b[0].at(5, 5), 0.75f, 1e-6);
}

TEST(WarpImageTest, IntegerShift) {
  const Image img = textured(20, 10);
  const Image out = warp_image(img, constant_field(20, 10, {2, 1}));
  EXPECT_EQ(out.at(3, 4), img.at(5, 5));
}

}  // namespace
}  // namespace longexp

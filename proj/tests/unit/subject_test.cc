#include "longexp/subject.h"

#include <gtest/gtest.h>

#include <filesystem>

#include "longexp/burst_io.h"
#include "longexp/errors.h"

namespace longexp {
namespace {

namespace fs = std::filesystem;

FaceRegion region(Vec2 c, double inner, double outer) {
  FaceRegion r;
  r.center = c;
  r.inner_radius = inner;
  r.outer_radius = outer;
  return r;
}

TEST(SaliencyTest, ThresholdDefault) { EXPECT_EQ(kSaliencyThreshold, 0.43); }

TEST(SaliencyTest, ConstantOneStaysOne) {
  const Image s = threshold_saliency(Image(6, 4, 1, 1.0f));
  for (float v : s.data()) EXPECT_EQ(v, 1.0f);
}

TEST(SaliencyTest, ConstantBelowThresholdBecomesZero) {
  const Image s = threshold_saliency(Image(6, 4, 1, 0.4f));
  for (float v : s.data()) EXPECT_EQ(v, 0.0f);
}

TEST(SaliencyTest, ValuesBelowThresholdAreExactlyZeroAndMaxIsOne) {
  Image raw(3, 1, 1);
  raw.at(0, 0) = 0.42f;
  raw.at(1, 0) = 0.5f;
  raw.at(2, 0) = 0.8f;
  const Image s = threshold_saliency(raw);
  EXPECT_EQ(s.at(0, 0), 0.0f);
  EXPECT_NEAR(s.at(1, 0), 0.5f / 0.8f, 1e-6);
  EXPECT_EQ(s.at(2, 0), 1.0f);
}

TEST(SaliencyTest, ThresholdingIsIdempotent) {
  Image raw(16, 1, 1);
  for (int x = 0; x < 16; ++x) raw.at(x, 0) = x / 15.0f;
  const Image once = threshold_saliency(raw);
  const Image twice = threshold_saliency(once);
  for (int x = 0; x < 16; ++x) EXPECT_NEAR(once.at(x, 0), twice.at(x, 0), 1e-7);
}

TEST(SaliencyTest, GaussianPriorPeaksAtCenter) {
  const Image s = load_or_synthesize_saliency(63, 47, std::nullopt);
  EXPECT_EQ(s.at(31, 23), 1.0f);
  EXPECT_EQ(s.at(0, 0), 0.0f);  // corner falls below the threshold
}

TEST(SaliencyTest, ExternalMapDimensionMismatch) {
  const fs::path p = fs::temp_directory_path() / "longexp_saliency_mismatch.png";
  write_png_gray(p, Image(8, 8, 1, 1.0f));
  EXPECT_THROW(load_or_synthesize_saliency(16, 8, p), InputError);
  const Image ok = load_or_synthesize_saliency(8, 8, p);
  EXPECT_EQ(ok.at(3, 3), 1.0f);
  fs::remove(p);
}

TEST(SmootherstepTest, Endpoints) {
  EXPECT_EQ(smootherstep(0.0), 0.0);
  EXPECT_EQ(smootherstep(1.0), 1.0);
}

TEST(SmootherstepTest, Midpoint) { EXPECT_DOUBLE_EQ(smootherstep(0.5), 0.5); }

TEST(SmootherstepTest, FlatDerivativeAtEndpoints) {
  const double h = 1e-4;
  EXPECT_NEAR((smootherstep(h) - smootherstep(0.0)) / h, 0.0, 1e-6);
  EXPECT_NEAR((smootherstep(1.0) - smootherstep(1.0 - h)) / h, 0.0, 1e-6);
}

TEST(FaceSignalTest, NoRegionsIsZero) {
  const Image f = face_signal({}, 10, 8);
  for (float v : f.data()) EXPECT_EQ(v, 0.0f);
}

TEST(FaceSignalTest, CenterIsOneAndMidRadiusIsHalf) {
  const Image f = face_signal({region({20, 20}, 4, 12)}, 41, 41);
  EXPECT_EQ(f.at(20, 20), 1.0f);
  EXPECT_NEAR(f.at(28, 20), 0.5f, 1e-6);  // radius 8 = (4 + 12) / 2
  EXPECT_EQ(f.at(33, 20), 0.0f);
}

TEST(FaceSignalTest, MonotoneInDistance) {
  const Image f = face_signal({region({0, 0}, 3, 15)}, 20, 1);
  for (int x = 1; x < 20; ++x) EXPECT_LE(f.at(x, 0), f.at(x - 1, 0));
}

TEST(FaceSignalTest, MultipleRegionsTakeMax) {
  const Image f = face_signal({region({5, 5}, 2, 6), region({9, 5}, 2, 6)}, 15, 11);
  EXPECT_EQ(f.at(5, 5), 1.0f);
  EXPECT_EQ(f.at(9, 5), 1.0f);
  EXPECT_EQ(f.at(7, 5), 1.0f);
}

TEST(FaceSignalTest, SegmentationMultiplies) {
  Image seg(21, 21, 1, 1.0f);
  seg.at(10, 10) = 0.25f;
  const Image f = face_signal({region({10, 10}, 3, 6)}, 21, 21, &seg);
  EXPECT_EQ(f.at(10, 10), 0.25f);
  EXPECT_EQ(f.at(11, 10), 1.0f);
}

TEST(FaceSignalTest, InvalidRadiiRejected) {
  EXPECT_THROW(face_signal({region({1, 1}, 5, 5)}, 4, 4), InputError);
  EXPECT_THROW(face_signal({region({1, 1}, 0, 5)}, 4, 4), InputError);
}

TEST(CombineTest, NoFacesNormalizesSaliency) {
  Image s(2, 1, 1);
  s.at(0, 0) = 0.5f;
  s.at(1, 0) = 0.25f;
  const Image w = combine_subject_weights(s, Image(2, 1, 1));
  EXPECT_EQ(w.at(0, 0), 1.0f);
  EXPECT_EQ(w.at(1, 0), 0.5f);
}

TEST(CombineTest, FacePixelReachesOne) {
  Image f(3, 1, 1);
  f.at(1, 0) = 1.0f;
  const Image w = combine_subject_weights(Image(3, 1, 1, 1.0f), f);
  EXPECT_EQ(w.at(1, 0), 1.0f);
  EXPECT_EQ(w.at(0, 0), 0.5f);
}

TEST(CombineTest, ZeroSaliencyStaysZero) {
  const Image w = combine_subject_weights(Image(3, 2, 1), Image(3, 2, 1, 1.0f));
  for (float v : w.data()) EXPECT_EQ(v, 0.0f);
}

TEST(CombineTest, ArgmaxInvariantToSaliencyScale) {
  Image s(4, 1, 1), f(4, 1, 1);
  s.at(0, 0) = 0.6f;
  s.at(1, 0) = 0.9f;
  s.at(2, 0) = 0.5f;
  f.at(2, 0) = 1.0f;
  Image s2 = s;
  for (float& v : s2.data()) v *= 0.3f;
  const Image a = combine_subject_weights(s, f);
  const Image b = combine_subject_weights(s2, f);
  for (int x = 0; x < 4; ++x) {
    EXPECT_NEAR(a.at(x, 0), b.at(x, 0), 1e-6);
    EXPECT_GE(a.at(x, 0), 0.0f);
    EXPECT_LE(a.at(x, 0), 1.0f);
  }
  EXPECT_EQ(a.at(2, 0), 1.0f);
}

TEST(FaceRegionTest, ConvertsBetweenLevels) {
  const FaceRegion full = region({803.5, 403.5}, 80, 160);
  const FaceRegion low = full.converted(level_geometry(Level::kFull), level_geometry(Level::kLow));
  EXPECT_DOUBLE_EQ(low.center.x, 100.0);
  EXPECT_DOUBLE_EQ(low.center.y, 50.0);
  EXPECT_DOUBLE_EQ(low.inner_radius, 10.0);
  EXPECT_DOUBLE_EQ(low.outer_radius, 20.0);
}

}  // namespace
}  // namespace longexp

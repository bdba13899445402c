#include "longexp/tracking.h"

#include <gtest/gtest.h>

#include <cmath>

#include "longexp/alignment.h"
#include "longexp/synth.h"

namespace longexp {
namespace {

// Smooth random texture sampled with a horizontal/vertical offset, so that
// frame(x) = texture(x + offset).
Image textured(int w, int h, Vec2 offset = {}, std::uint64_t seed = 3) {
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = (x + offset.x) / 3.0;
      const double v = (y + offset.y) / 3.0;
      img.at(x, y) = static_cast<float>(0.15 + 0.7 * value_noise(u, v, seed));
    }
  }
  return img;
}

TEST(HarrisTest, FlatImageHasNoResponse) {
  const Image r = harris_response(Image(20, 20, 1, 0.5f), 0.04);
  for (float v : r.data()) EXPECT_EQ(v, 0.0f);
}

TEST(HarrisTest, CornerBeatsEdge) {
  Image img(20, 20, 1);
  for (int y = 10; y < 20; ++y)
    for (int x = 10; x < 20; ++x) img.at(x, y) = 1.0f;
  const Image r = harris_response(img, 0.04);
  EXPECT_GT(r.at(10, 10), r.at(10, 16));
  EXPECT_GT(r.at(10, 10), 0.0f);
}

TEST(DetectTest, WeightOneGivesOneFeaturePerTexturedCell) {
  const Image img = textured(60, 40);
  const auto pts = detect_features(img, Image(60, 40, 1, 1.0f), 5);
  EXPECT_EQ(pts.size(), 12u * 8u);
  std::vector<int> per_cell(12 * 8, 0);
  for (const Vec2& p : pts) ++per_cell[static_cast<int>(p.y) / 5 * 12 + static_cast<int>(p.x) / 5];
  for (int c : per_cell) EXPECT_EQ(c, 1);
}

TEST(DetectTest, WeightZeroGivesNothing) {
  EXPECT_TRUE(detect_features(textured(60, 40), Image(60, 40, 1), 5).empty());
}

TEST(DetectTest, HalfWeightIsBinomial) {
  const Image img = textured(200, 150);
  const auto pts = detect_features(img, Image(200, 150, 1, 0.5f), 11);
  const double cells = 40.0 * 30.0;
  const double sigma = std::sqrt(cells * 0.25);
  EXPECT_NEAR(static_cast<double>(pts.size()), cells * 0.5, 3.0 * sigma);
}

TEST(DetectTest, SeedDeterminesSample) {
  const Image img = textured(100, 80);
  const Image w(100, 80, 1, 0.5f);
  const auto a = detect_features(img, w, 1);
  const auto b = detect_features(img, w, 1);
  const auto c = detect_features(img, w, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(DetectTest, OccupiedCellsSkipped) {
  const Image img = textured(20, 10);
  std::vector<bool> occupied(8, false);
  occupied[0] = occupied[5] = true;
  const auto pts = detect_features(img, Image(20, 10, 1, 1.0f), 0, {}, &occupied);
  EXPECT_EQ(pts.size(), 6u);
  for (const Vec2& p : pts) {
    const int cell = static_cast<int>(p.y) / 5 * 4 + static_cast<int>(p.x) / 5;
    EXPECT_NE(cell, 0);
    EXPECT_NE(cell, 5);
  }
}

std::vector<Vec2> interior_seeds(const Image& img, int margin) {
  std::vector<Vec2> out;
  for (const Vec2& p : detect_features(img, Image(img.width(), img.height(), 1, 1.0f), 0)) {
    if (p.x >= margin && p.y >= margin && p.x < img.width() - margin &&
        p.y < img.height() - margin)
      out.push_back(p);
  }
  return out;
}

TEST(TrackFeaturesTest, StaticSceneTracksWholeBurst) {
  const Image img = textured(80, 60);
  const std::vector<Image> frames(5, img);
  const auto seeds = interior_seeds(img, 8);
  const TrackSet set = track_features(frames, seeds);
  ASSERT_EQ(set.tracks.size(), seeds.size());
  for (const Track& t : set.tracks) {
    EXPECT_EQ(t.points.size(), 5u);
    for (const Vec2& p : t.points) EXPECT_LT(norm(p - t.points[0]), 1e-6);
  }
}

TEST(TrackFeaturesTest, GlobalTranslationSteps) {
  std::vector<Image> frames;
  for (int f = 0; f < 5; ++f) frames.push_back(textured(120, 80, {-3.0 * f, 0.0}));
  std::vector<Vec2> seeds;
  for (const Vec2& p : interior_seeds(frames[0], 8))
    if (p.x < 90) seeds.push_back(p);
  const TrackSet set = track_features(frames, seeds);
  int full_length = 0;
  for (const Track& t : set.tracks) {
    for (std::size_t k = 1; k < t.points.size(); ++k) {
      const Vec2 step = t.points[k] - t.points[k - 1];
      EXPECT_NEAR(step.x, 3.0, 0.5);
      EXPECT_NEAR(step.y, 0.0, 0.5);
    }
    if (t.points.size() == 5) ++full_length;
  }
  EXPECT_GT(full_length, static_cast<int>(seeds.size()) * 9 / 10);
}

TEST(TrackFeaturesTest, ExitingFeatureEndsTrack) {
  std::vector<Image> frames;
  for (int f = 0; f < 6; ++f) frames.push_back(textured(80, 60, {-6.0 * f, 0.0}));
  const TrackSet set = track_features(frames, {Vec2{60.0, 30.0}});
  ASSERT_EQ(set.tracks.size(), 1u);
  const Track& t = set.tracks[0];
  EXPECT_LT(t.points.size(), 6u);
  EXPECT_GE(t.points.size(), 2u);
  for (const Vec2& p : t.points) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, 79.0);
  }
}

TEST(TrackPointTest, ForwardBackwardRecoversStart) {
  const Image a = textured(80, 60);
  const Image b = textured(80, 60, {-2.3, 1.4});
  const ImagePyramid pa = build_pyramid(a, 3);
  const ImagePyramid pb = build_pyramid(b, 3);
  const TrackingParams params;
  for (const Vec2& p : interior_seeds(a, 10)) {
    const auto q = track_point(pa, pb, p, params);
    ASSERT_TRUE(q.has_value());
    const auto back = track_point(pb, pa, *q, params);
    ASSERT_TRUE(back.has_value());
    EXPECT_LT(norm(*back - p), 1.0);
    EXPECT_NEAR(q->x - p.x, 2.3, 0.2);
    EXPECT_NEAR(q->y - p.y, -1.4, 0.2);
  }
}

TEST(TrackPointTest, FlatWindowIsLost) {
  const Image flat(40, 40, 1, 0.5f);
  const ImagePyramid p = build_pyramid(flat, 3);
  EXPECT_FALSE(track_point(p, p, {20, 20}, TrackingParams{}).has_value());
}

TEST(TrackerTest, RespawnsInEmptiedCells) {
  Tracker tracker(80, 60, TrackingParams{}, 9);
  const Image ones(80, 60, 1, 1.0f);
  tracker.add_frame(textured(80, 60));
  tracker.spawn(ones, ones);
  tracker.add_frame(textured(80, 60, {-4.0, 0.0}));
  tracker.spawn(ones, ones);
  tracker.add_frame(textured(80, 60, {-8.0, 0.0}));
  const TrackSet set = tracker.track_set();
  EXPECT_EQ(set.num_frames, 3);
  EXPECT_EQ(tracker.num_frames(), 3);
  bool respawned = false;
  for (const Track& t : set.tracks) {
    EXPECT_GE(t.points.size(), 2u);
    EXPECT_EQ(t.weight, 1.0);
    if (t.start == 1) respawned = true;
  }
  EXPECT_TRUE(respawned);
}

TEST(TrackLengthTest, ZeroMotionIsZero) {
  Track t;
  t.points = {{10, 10}, {10, 10}, {10, 10}};
  AlignmentSolution sol;
  sol.width = 300;
  sol.height = 400;
  for (int i = 0; i < 3; ++i) sol.append(Similarity2D{}, MeshWarp{});
  EXPECT_EQ(track_length_diag_pct(t, sol), 0.0);
}

TEST(TrackLengthTest, StraightTrackPercentOfDiagonal) {
  AlignmentSolution sol;
  sol.width = 300;
  sol.height = 400;  // diagonal 500
  for (int i = 0; i < 4; ++i) sol.append(Similarity2D{}, MeshWarp{});
  Track t;
  t.points = {{0, 0}, {50, 0}, {100, 0}, {150, 0}};
  EXPECT_NEAR(track_length_diag_pct(t, sol), 30.0, 1e-12);
}

TEST(TrackLengthTest, MotionCanceledByAlignmentIsZero) {
  AlignmentSolution sol;
  sol.width = 300;
  sol.height = 400;
  Track t;
  t.start = 1;
  for (int i = 0; i < 4; ++i) {
    Similarity2D g;
    g.t = {-7.0 * i, 2.0 * i};  // maps frame -> base
    sol.append(g, MeshWarp{});
    if (i >= 1) t.points.push_back({20.0 + 7.0 * i, 30.0 - 2.0 * i});
  }
  EXPECT_NEAR(track_length_diag_pct(t, sol), 0.0, 1e-9);
}

}  // namespace
}  // namespace longexp

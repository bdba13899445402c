#include "longexp/selection.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "longexp/errors.h"

namespace longexp {

SelectionPolicy SelectionPolicy::for_mode(BlurMode mode) {
  SelectionPolicy p;
  if (mode == BlurMode::kBackground) {
    p.percentile = 80.0;
    p.target_pct_diag = 2.8;
    p.max_frames = 9;  // 8 past frames plus the base
  }
  return p;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(pct, 0.0, 100.0) / 100.0 * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - lo) * (values[hi] - values[lo]);
}

double estimate_scene_velocity(const std::vector<Image>& frames,
                               const SelectionPolicy& policy,
                               std::uint64_t seed) {
  if (frames.size() < 5) {
    throw InputError("scene velocity needs the last 5 frames");
  }
  const std::vector<Image> recent(frames.end() - 5, frames.end());
  const Image ones(recent[0].width(), recent[0].height(), 1, 1.0f);
  const TrackSet tracks = track_features(
      recent, detect_features(recent[0], ones, seed), TrackingParams{});
  AlignmentSolution solution;
  solution.width = tracks.width;
  solution.height = tracks.height;
  for (int k = 0; k < 5; ++k) align_foreground_frame(tracks, k, solution, {}, false);
  std::vector<double> steps;
  for (const Track& t : tracks.tracks) {
    for (int f = t.start + 1; f < t.end(); ++f) {
      steps.push_back(norm(solution.to_base(f, t.at(f)) -
                           solution.to_base(f - 1, t.at(f - 1))));
    }
  }
  return 100.0 * percentile(steps, policy.percentile) / solution.diagonal();
}

CapturePlan plan_capture(double velocity_pct_per_frame,
                         const SelectionPolicy& policy,
                         double frame_rate_hz) {
  if (velocity_pct_per_frame < 0.0) throw InputError("negative velocity");
  CapturePlan plan;
  const double cap_frames = policy.max_duration_s * frame_rate_hz;
  plan.frames = velocity_pct_per_frame > 0.0
                    ? policy.target_pct_diag / velocity_pct_per_frame
                    : std::numeric_limits<double>::infinity();
  plan.duration_s = std::min(plan.frames / frame_rate_hz, policy.max_duration_s);
  const int span = std::max(
      1, static_cast<int>(std::ceil(std::min(plan.frames, cap_frames) - 1e-9)));
  plan.stride = std::max(1, (span + policy.max_frames - 2) / (policy.max_frames - 1));
  for (int i = 0; i <= span; i += plan.stride) plan.selected_indices.push_back(i);
  return plan;
}

SelectionStatus selection_satisfied(const TrackSet& tracks,
                                    const AlignmentSolution& solution,
                                    const SelectionPolicy& policy) {
  SelectionStatus status;
  std::vector<double> lengths;
  for (const Track& t : tracks.tracks) {
    const int end = std::min(t.end(), solution.num_frames());
    if (end - t.start < 2) continue;
    double length = 0.0;
    for (int f = t.start + 1; f < end; ++f) {
      length += norm(solution.to_base(f, t.at(f)) -
                     solution.to_base(f - 1, t.at(f - 1)));
    }
    lengths.push_back(100.0 * length / solution.diagonal());
  }
  status.current_length_pct = percentile(lengths, policy.percentile);
  status.satisfied = status.current_length_pct >= policy.target_pct_diag;
  if (!status.satisfied && solution.num_frames() >= policy.max_frames) {
    status.satisfied = true;
    status.forced = true;
  }
  return status;
}

}  // namespace longexp

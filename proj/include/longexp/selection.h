#ifndef LONGEXP_SELECTION_H_
#define LONGEXP_SELECTION_H_

#include <cstdint>
#include <vector>

#include "longexp/alignment.h"
#include "longexp/burst_io.h"
#include "longexp/tracking.h"

namespace longexp {

struct SelectionPolicy {
  double percentile = 98.0;
  double target_pct_diag = 30.0;
  // Frames processed including the base.
  int max_frames = 12;
  double max_duration_s = 7.0;

  static SelectionPolicy for_mode(BlurMode mode);
};

struct CapturePlan {
  double frames = 0.0;  // target / velocity, before any cap
  double duration_s = 0.0;
  int stride = 1;
  std::vector<int> selected_indices;
};

// Linear interpolation between closest ranks; pct in [0, 100].
double percentile(std::vector<double> values, double pct);

// Tracks over the given low-resolution frames (at least 5), aligns them
// globally and returns the policy percentile of aligned per-frame step
// lengths, in percent of the diagonal per frame.
double estimate_scene_velocity(const std::vector<Image>& frames,
                               const SelectionPolicy& policy,
                               std::uint64_t seed = 0);

CapturePlan plan_capture(double velocity_pct_per_frame,
                         const SelectionPolicy& policy,
                         double frame_rate_hz = 30.0);

struct SelectionStatus {
  bool satisfied = false;
  bool forced = false;  // stopped by the frame cap
  double current_length_pct = 0.0;
};

// Aligned track lengths over the frames processed so far, compared with the
// policy target; the cap forces a stop once solution holds max_frames.
SelectionStatus selection_satisfied(const TrackSet& tracks,
                                    const AlignmentSolution& solution,
                                    const SelectionPolicy& policy);

}  // namespace longexp

#endif  // LONGEXP_SELECTION_H_

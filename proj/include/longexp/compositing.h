#ifndef LONGEXP_COMPOSITING_H_
#define LONGEXP_COMPOSITING_H_

#include <vector>

#include "longexp/alignment.h"
#include "longexp/image.h"
#include "longexp/subject.h"
#include "longexp/tracking.h"

namespace longexp {

struct CompositeParams {
  double alpha = 0.16;
  double beta = 0.32;
  double reference_percentile = 99.0;
  // Lower bound on the reference magnitude so sub-pixel jitter in a static
  // burst does not get stretched to a full mask.
  double min_reference_px = 1.0;
  int guided_radius = 8;
  double guided_eps = 1e-3;
  // Faces moving less than this (percent of diagonal) are kept sharp.
  double face_motion_threshold_pct = 1.0;
};

struct FlowMask {
  Image magnitude;  // |F|, per-pixel max over pairs
  Image mask;       // M_flow in [0, 1]
  double reference = 0.0;
};

// flows: 2-channel fields of equal size, one or more per pair.
FlowMask compute_flow_mask(const std::vector<Image>& flows,
                           const CompositeParams& params = {});

// Applies the M_flow rescaling to precomputed magnitudes.
FlowMask flow_mask_from_magnitude(const Image& magnitude,
                                  const CompositeParams& params = {});

// Guided filter of `mask` using the luminance of `guide`; output in [0, 1].
Image refine_mask_edge_aware(const Image& mask, const Image& guide,
                             int radius = 8, double eps = 1e-3);

// Mean aligned per-track movement (percent of diagonal) of tracks whose base
// position lies inside the region; the region is in low-res coordinates.
double face_motion_mean(const FaceRegion& region, const TrackSet& tracks,
                        const AlignmentSolution& alignment);

// Feathered regions whose motion_mean is below the threshold; 1 = keep sharp.
Image face_protection_mask(const std::vector<FaceRegion>& regions, int width,
                           int height, double threshold_pct = 1.0);

// M = 1 - max(1 - M_flow, protection).
Image combine_masks(const Image& flow_mask, const Image& protection);

// out = M * blurred_up + (1 - M) * sharp with blurred and M upsampled to the
// sharp frame's size.
Image composite_final(const Image& sharp, const Image& blurred,
                      const Image& mask);

}  // namespace longexp

#endif  // LONGEXP_COMPOSITING_H_

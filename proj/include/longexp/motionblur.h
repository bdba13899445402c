#ifndef LONGEXP_MOTIONBLUR_H_
#define LONGEXP_MOTIONBLUR_H_

#include <vector>

#include "longexp/image.h"

namespace longexp {

// Flow convention used throughout: a sampling flow F from `source` onto the
// grid of `target` satisfies target(x) ~ source(x + F(x)).

struct FlowParams {
  int max_levels = 6;
  int min_level_size = 12;
  int window_radius = 3;
  // Integer block search around the propagated estimate, in level pixels.
  // The coarsest level searches far enough to reach max_search_px at full
  // input resolution.
  int top_search_radius = 4;
  int search_radius = 2;
  double max_search_px = 96.0;
  int warps_per_level = 5;
  // Tikhonov term added to the windowed structure tensor.
  double regularization = 1e-4;
  int median_radius = 2;
};

// Coarse-to-fine block matching refined by dense Lucas-Kanade, on
// luminance. Returns a 2-channel field.
Image estimate_flow(const Image& target, const Image& source,
                    const FlowParams& params = {});

// Line kernel of one input frame: segment delta (2 channels) and weight W.
struct KernelMap {
  Image delta;
  Image weight;
};

struct KernelPair {
  KernelMap a;
  KernelMap b;
  int clamped_pixels = 0;
  double clamp_fraction = 0.0;
};

struct KernelParams {
  double max_disparity_px = 64.0;  // low resolution
  double max_clamp_fraction = 0.10;
  // Logistic on forward-backward error (px) for the W split.
  double consistency_midpoint_px = 2.0;
  double consistency_scale_px = 0.5;
  FlowParams flow;
};

// Builds kernels from the two sampling flows of a pair: delta_a samples
// frame a on b's grid, delta_b samples frame b on a's grid. Segments longer
// than the cap are clamped and counted.
KernelPair kernels_from_flows(const Image& delta_a, const Image& delta_b,
                              const KernelParams& params = {});

// Estimates both flows with estimate_flow and builds kernels. Throws
// FallbackError when more than max_clamp_fraction of pixels were clamped.
KernelPair predict_kernels(const Image& frame_a, const Image& frame_b,
                           const KernelParams& params = {});

// Throws FallbackError if the pair exceeds the clamp budget.
void check_disparity(const KernelPair& pair, const KernelParams& params = {});

// Bilinear upsampling of a kernel map to another resolution; segment
// lengths scale with the size ratio.
KernelMap resize_kernel(const KernelMap& map, int width, int height);

// Samples along a segment for a segment of the given length in pixels:
// two per pixel, at least 2.
int adaptive_samples(double length_px, int max_samples = 256);

struct RenderOptions {
  bool ramp = true;        // w_n = 1 - n/N, otherwise uniform
  int fixed_samples = 0;   // 0 selects adaptive_samples
};

// Line-kernel integral of one pair: each frame is averaged along its segment
// with ramp weights and scaled by W. Kernels at image resolution.
Image render_pair_linear(const Image& a, const Image& b, const KernelMap& ka,
                         const KernelMap& kb, const RenderOptions& options = {},
                         int workers = 1);

// Tangent at a frame from the displacements to the next (plus) and from the
// previous (minus) frame, both pointing forward in time.
Vec2 instantaneous_flow(const Vec2& plus, const Vec2& minus);

struct CubicPath {
  Vec2 p0, p1, m0, m1;
  Vec2 at(double t) const;
  Vec2 derivative(double t) const;
};

// Hermite cubic with rho(0) = (x, y), rho(1) = (x, y) + plus,
// rho'(0) = tangent0, rho'(1) = tangent1.
CubicPath build_spline(const Vec2& origin, const Vec2& plus,
                       const Vec2& tangent0, const Vec2& tangent1);

// Continues the path A -> B -> C by one step: A mirrored across the
// perpendicular bisector of BC, with |CD| clamped to |BC|.
Vec2 extrapolate_flow_endpoint(const Vec2& a, const Vec2& b, const Vec2& c);

// Motion between consecutive aligned frames at render resolution, forward
// oriented. forward[k] lives on frame k's grid (frame k -> k+1),
// backward[k] on frame k+1's grid (also frame k -> k+1). weight_a[k] and
// weight_b[k] are the W maps of frames k and k+1 for pair k.
struct FlowSequence {
  std::vector<Image> forward;
  std::vector<Image> backward;
  std::vector<Image> weight_a;
  std::vector<Image> weight_b;

  int pairs() const { return static_cast<int>(forward.size()); }
};

// Converts a pair's kernels to the forward/backward motion fields.
void append_pair(FlowSequence& seq, const KernelPair& pair, int width,
                 int height);

struct AccumulateOptions {
  bool spline = true;
  double soft_gamma_k = 3.0;
  int max_samples = 256;
  int fixed_samples = 0;  // 0 selects adaptive sampling
  int workers = 1;
};

// Sums 2K passes (forward and backward per pair) of samples along the motion
// paths, weighted by path speed and the linear inter-frame falloff, then
// normalizes. Inputs are aligned half-resolution frames in linear light.
Image accumulate_burst(const std::vector<Image>& frames,
                       const FlowSequence& flows,
                       const AccumulateOptions& options = {});

// out(p) = image(p + displacement(p)), bilinear with edge clamp.
Image warp_image(const Image& image, const Image& displacement);

}  // namespace longexp

#endif  // LONGEXP_MOTIONBLUR_H_

#ifndef LONGEXP_PIPELINE_H_
#define LONGEXP_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "longexp/alignment.h"
#include "longexp/burst_io.h"
#include "longexp/compositing.h"
#include "longexp/motionblur.h"
#include "longexp/selection.h"
#include "longexp/subject.h"
#include "longexp/tracking.h"

namespace longexp {

enum class FlowSource { kAuto, kClassical, kFile };

struct PipelineConfig {
  std::optional<BlurMode> mode;  // overrides the manifest
  // Selection overrides; unset fields use the mode defaults.
  std::optional<double> percentile;
  std::optional<double> target_pct_diag;
  std::optional<int> max_frames;

  TrackingParams tracking;
  // Sampling floor for background tracks in background-blur mode.
  double background_sampling_floor = 0.2;
  SolverParams solver;
  ClusterParams cluster;
  MeshParams mesh;
  bool use_mesh = true;
  KernelParams kernels;
  FlowSource flow_source = FlowSource::kAuto;
  bool spline = true;
  ColorParams color;
  int max_samples = 256;
  CompositeParams composite;

  std::uint64_t seed = 1;
  int workers = 1;
  bool debug_dumps = false;

  SelectionPolicy policy(BlurMode m) const;
};

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& config,
                 const std::filesystem::path& path);
// JSON text of every effective setting, defaults included.
std::string config_snapshot(const PipelineConfig& config);
PipelineConfig config_from_json_text(const std::string& text);

// Inputs prepared for the stages, in processing order (position 0 is the
// base frame; background mode walks backwards in time).
struct BurstContext {
  BurstManifest manifest;
  BlurMode mode = BlurMode::kForeground;
  std::vector<int> order;      // burst indices
  std::vector<Image> full;     // linear RGB
  std::vector<Image> half;     // linear RGB
  std::vector<Image> low;      // luminance
  SubjectWeightMap subject;    // low resolution, base frame
  std::vector<FaceRegion> faces_low;
};

BurstContext prepare_burst(const BurstManifest& manifest,
                           const PipelineConfig& config);

struct TrackingResult {
  TrackSet tracks;
  int frames_processed = 0;
};

// Incremental loop: track each new frame, align it, refill empty cells and
// stop once the selection criterion holds.
TrackingResult run_tracking(const BurstContext& ctx,
                            const PipelineConfig& config);

struct AlignmentResult {
  AlignmentSolution solution;
  std::vector<BackgroundStepReport> steps;
};

AlignmentResult run_alignment(const BurstContext& ctx, const TrackSet& tracks,
                              const PipelineConfig& config);

struct SelectionResult {
  int frames_processed = 0;
  std::vector<int> selected_frames;  // burst indices in processing order
  double trail_length_pct = 0.0;
  bool satisfied = false;
  bool forced = false;
};

SelectionResult run_selection(const BurstContext& ctx, const TrackSet& tracks,
                              const AlignmentResult& alignment,
                              const PipelineConfig& config);

struct RenderResult {
  Image blurred;         // half resolution, linear RGB
  Image flow_magnitude;  // half resolution, max over pairs
  double max_clamp_fraction = 0.0;
};

// zero_flow replaces every kernel with a zero-length segment. When given,
// clamp_seen receives the largest clamp fraction even if a pair overflows.
RenderResult run_render(const BurstContext& ctx,
                        const AlignmentResult& alignment,
                        const SelectionResult& selection,
                        const PipelineConfig& config, bool zero_flow = false,
                        double* clamp_seen = nullptr);

struct CompositeResult {
  Image long_exposure;  // full resolution, linear RGB
  Image mask;           // half resolution
};

CompositeResult run_composite(const BurstContext& ctx, const TrackSet& tracks,
                              const AlignmentResult& alignment,
                              const RenderResult& render,
                              const PipelineConfig& config);

struct RunReport {
  bool fallback = false;
  std::string fallback_reason;
  std::string fallback_detail;
  BlurMode mode = BlurMode::kForeground;
  int base_index = 0;
  std::optional<SelectionResult> selection;
  std::vector<BackgroundStepReport> solver_steps;
  double max_clamp_fraction = 0.0;
  std::optional<double> scene_velocity_pct;
  std::optional<CapturePlan> capture_plan;

  std::string to_json() const;
};

// Writes conventional.png, long_exposure.png (unless falling back) and
// report.json into out_dir.
RunReport run(const BurstManifest& manifest, const PipelineConfig& config,
              const std::filesystem::path& out_dir);

// Stage artifacts.
void save_tracks(const TrackSet& tracks, const std::filesystem::path& path);
TrackSet load_tracks(const std::filesystem::path& path);
void save_alignment(const AlignmentResult& alignment,
                    const std::filesystem::path& path);
AlignmentResult load_alignment(const std::filesystem::path& path);
void save_selection(const SelectionResult& selection,
                    const std::filesystem::path& path);
SelectionResult load_selection(const std::filesystem::path& path);
void save_render(const RenderResult& render, const std::filesystem::path& dir);
RenderResult load_render(const std::filesystem::path& dir);

}  // namespace longexp

#endif  // LONGEXP_PIPELINE_H_

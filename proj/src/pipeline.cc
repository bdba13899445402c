#include "longexp/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "longexp/errors.h"

namespace longexp {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string flow_source_name(FlowSource s) {
  switch (s) {
    case FlowSource::kAuto: return "auto";
    case FlowSource::kClassical: return "classical";
    case FlowSource::kFile: return "file";
  }
  return "auto";
}

FlowSource flow_source_from(const std::string& s) {
  if (s == "auto") return FlowSource::kAuto;
  if (s == "classical") return FlowSource::kClassical;
  if (s == "file") return FlowSource::kFile;
  throw InputError("unknown flow source: " + s);
}

json selection_json(const SelectionPolicy& p) {
  return {{"percentile", p.percentile},
          {"target_pct_diag", p.target_pct_diag},
          {"max_frames", p.max_frames},
          {"max_duration_s", p.max_duration_s}};
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["mode"] = c.mode ? json(to_string(*c.mode)) : json(nullptr);
  json sel = json::object();
  if (c.percentile) sel["percentile"] = *c.percentile;
  if (c.target_pct_diag) sel["target_pct_diag"] = *c.target_pct_diag;
  if (c.max_frames) sel["max_frames"] = *c.max_frames;
  j["selection"] = sel;
  j["tracking"] = {{"grid_cell_px", c.tracking.grid_cell_px},
                   {"harris_k", c.tracking.harris_k},
                   {"harris_rel_threshold", c.tracking.harris_rel_threshold},
                   {"window_radius", c.tracking.window_radius},
                   {"pyramid_levels", c.tracking.pyramid_levels},
                   {"max_iterations", c.tracking.max_iterations},
                   {"max_residual_rms", c.tracking.max_residual_rms},
                   {"max_forward_backward_px", c.tracking.max_forward_backward_px},
                   {"background_sampling_floor", c.background_sampling_floor}};
  j["solver"] = {{"lambda_f", c.solver.lambda_f},
                 {"lambda_b", c.solver.lambda_b},
                 {"roll_fraction", c.solver.roll_fraction},
                 {"max_iters", c.solver.max_iters},
                 {"tol", c.solver.tol},
                 {"min_flow_px", c.solver.min_flow_px}};
  j["mesh"] = {{"enabled", c.use_mesh},
               {"cols", c.mesh.cols},
               {"rows", c.mesh.rows},
               {"support_radius_cells", c.mesh.support_radius_cells},
               {"min_points", c.mesh.min_points},
               {"max_neighbor_delta_cells", c.mesh.max_neighbor_delta_cells},
               {"max_subject_weight", c.mesh.max_subject_weight}};
  j["kernels"] = {{"source", flow_source_name(c.flow_source)},
                  {"max_disparity_px", c.kernels.max_disparity_px},
                  {"max_clamp_fraction", c.kernels.max_clamp_fraction}};
  j["render"] = {{"spline", c.spline},
                 {"soft_gamma_k", c.color.soft_gamma_k},
                 {"max_samples", c.max_samples}};
  j["compositing"] = {{"alpha", c.composite.alpha},
                      {"beta", c.composite.beta},
                      {"reference_percentile", c.composite.reference_percentile},
                      {"min_reference_px", c.composite.min_reference_px},
                      {"guided_radius", c.composite.guided_radius},
                      {"guided_eps", c.composite.guided_eps},
                      {"face_motion_threshold_pct", c.composite.face_motion_threshold_pct}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["debug_dumps"] = c.debug_dumps;
  return j;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  if (j.contains("mode") && !j["mode"].is_null()) {
    c.mode = blur_mode_from_string(j["mode"].get<std::string>());
  }
  if (j.contains("selection")) {
    const json& s = j["selection"];
    if (s.contains("percentile")) c.percentile = s["percentile"].get<double>();
    if (s.contains("target_pct_diag")) c.target_pct_diag = s["target_pct_diag"].get<double>();
    if (s.contains("max_frames")) c.max_frames = s["max_frames"].get<int>();
  }
  if (j.contains("tracking")) {
    const json& t = j["tracking"];
    read_opt(t, "grid_cell_px", c.tracking.grid_cell_px);
    read_opt(t, "harris_k", c.tracking.harris_k);
    read_opt(t, "harris_rel_threshold", c.tracking.harris_rel_threshold);
    read_opt(t, "window_radius", c.tracking.window_radius);
    read_opt(t, "pyramid_levels", c.tracking.pyramid_levels);
    read_opt(t, "max_iterations", c.tracking.max_iterations);
    read_opt(t, "max_residual_rms", c.tracking.max_residual_rms);
    read_opt(t, "max_forward_backward_px", c.tracking.max_forward_backward_px);
    read_opt(t, "background_sampling_floor", c.background_sampling_floor);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    read_opt(s, "lambda_f", c.solver.lambda_f);
    read_opt(s, "lambda_b", c.solver.lambda_b);
    read_opt(s, "roll_fraction", c.solver.roll_fraction);
    read_opt(s, "max_iters", c.solver.max_iters);
    read_opt(s, "tol", c.solver.tol);
    read_opt(s, "min_flow_px", c.solver.min_flow_px);
  }
  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    read_opt(m, "enabled", c.use_mesh);
    read_opt(m, "cols", c.mesh.cols);
    read_opt(m, "rows", c.mesh.rows);
    read_opt(m, "support_radius_cells", c.mesh.support_radius_cells);
    read_opt(m, "min_points", c.mesh.min_points);
    read_opt(m, "max_neighbor_delta_cells", c.mesh.max_neighbor_delta_cells);
    read_opt(m, "max_subject_weight", c.mesh.max_subject_weight);
  }
  if (j.contains("kernels")) {
    const json& k = j["kernels"];
    if (k.contains("source")) c.flow_source = flow_source_from(k["source"].get<std::string>());
    read_opt(k, "max_disparity_px", c.kernels.max_disparity_px);
    read_opt(k, "max_clamp_fraction", c.kernels.max_clamp_fraction);
  }
  if (j.contains("render")) {
    const json& r = j["render"];
    read_opt(r, "spline", c.spline);
    read_opt(r, "soft_gamma_k", c.color.soft_gamma_k);
    read_opt(r, "max_samples", c.max_samples);
  }
  if (j.contains("compositing")) {
    const json& m = j["compositing"];
    read_opt(m, "alpha", c.composite.alpha);
    read_opt(m, "beta", c.composite.beta);
    read_opt(m, "reference_percentile", c.composite.reference_percentile);
    read_opt(m, "min_reference_px", c.composite.min_reference_px);
    read_opt(m, "guided_radius", c.composite.guided_radius);
    read_opt(m, "guided_eps", c.composite.guided_eps);
    read_opt(m, "face_motion_threshold_pct", c.composite.face_motion_threshold_pct);
  }
  read_opt(j, "seed", c.seed);
  read_opt(j, "workers", c.workers);
  read_opt(j, "debug_dumps", c.debug_dumps);
  if (c.workers < 1) throw InputError("workers must be >= 1");
  if (c.solver.lambda_f < 0 || c.solver.lambda_b < 0) {
    throw InputError("solver weights must be non-negative");
  }
  if (c.composite.alpha >= c.composite.beta) {
    throw InputError("compositing requires alpha < beta");
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing artifact: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("malformed artifact " + path.string() + ": " + e.what());
  }
}

json vec_json(const Vec2& v) { return json::array({v.x, v.y}); }
Vec2 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

// Low-resolution map re-expressed in the coordinates of `frame`.
Image map_to_frame(const Image& base_map, int frame,
                   const AlignmentSolution& solution) {
  if (frame == 0) return base_map;
  Image out(base_map.width(), base_map.height(), 1);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const Vec2 b = solution.to_base(frame, {static_cast<double>(x), static_cast<double>(y)});
      out.at(x, y) = base_map.sample(b.x, b.y);
    }
  }
  return out;
}

// Raises the map around tracks still followed in `frame` to their recorded
// subject weight, so features spawned next to a moving subject inherit it.
void carry_track_weights(Image& map, const TrackSet& tracks, int frame, int radius) {
  for (const Track& t : tracks.tracks) {
    if (!t.valid(frame) || t.weight <= 0.0) continue;
    const Vec2 p = t.at(frame);
    const int cx = static_cast<int>(std::lround(p.x)), cy = static_cast<int>(std::lround(p.y));
    for (int y = std::max(0, cy - radius); y <= std::min(map.height() - 1, cy + radius); ++y) {
      for (int x = std::max(0, cx - radius); x <= std::min(map.width() - 1, cx + radius); ++x) {
        map.at(x, y) = std::max(map.at(x, y), static_cast<float>(t.weight));
      }
    }
  }
}

void align_frame(const TrackSet& tracks, int frame, BlurMode mode,
                 const PipelineConfig& config, AlignmentResult& result) {
  if (mode == BlurMode::kForeground) {
    align_foreground_frame(tracks, frame, result.solution, config.mesh, config.use_mesh);
  } else {
    const BackgroundStepReport step = align_background_frame(
        tracks, frame, result.solution, config.solver, config.cluster);
    if (frame > 0) result.steps.push_back(step);
  }
}

Image low_displacement(int frame, const AlignmentSolution& solution) {
  Image field(solution.width, solution.height, 2);
  for (int y = 0; y < solution.height; ++y) {
    for (int x = 0; x < solution.width; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      field.set_vec2(x, y, solution.from_base(frame, p) - p);
    }
  }
  return field;
}

}  // namespace

SelectionPolicy PipelineConfig::policy(BlurMode m) const {
  SelectionPolicy p = SelectionPolicy::for_mode(m);
  if (percentile) p.percentile = *percentile;
  if (target_pct_diag) p.target_pct_diag = *target_pct_diag;
  if (max_frames) p.max_frames = *max_frames;
  return p;
}

PipelineConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path));
}

void save_config(const PipelineConfig& config, const fs::path& path) {
  write_text(path, config_to_json(config).dump(2) + "\n");
}

PipelineConfig config_from_json_text(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
}

std::string config_snapshot(const PipelineConfig& config) {
  json j = config_to_json(config);
  j["effective_selection"] = {
      {"foreground_blur", selection_json(config.policy(BlurMode::kForeground))},
      {"background_blur", selection_json(config.policy(BlurMode::kBackground))}};
  j["subject"] = {{"saliency_threshold", kSaliencyThreshold}};
  return j.dump(2);
}

BurstContext prepare_burst(const BurstManifest& manifest,
                           const PipelineConfig& config) {
  manifest.validate();
  BurstContext ctx;
  ctx.manifest = manifest;
  ctx.mode = config.mode.value_or(manifest.mode);
  const int n = static_cast<int>(manifest.frame_paths.size());
  const SelectionPolicy policy = config.policy(ctx.mode);
  const int step = ctx.mode == BlurMode::kForeground ? 1 : -1;
  for (int i = manifest.base_index; i >= 0 && i < n; i += step) {
    if (static_cast<int>(ctx.order.size()) >= policy.max_frames) break;
    ctx.order.push_back(i);
  }
  BurstManifest subset = manifest;
  subset.frame_paths.clear();
  for (int i : ctx.order) subset.frame_paths.push_back(manifest.frame_paths[i]);
  subset.base_index = 0;
  std::vector<Frame> frames = load_burst(subset, config.workers);
  for (Frame& f : frames) {
    ctx.half.push_back(downsample(f.pixels, 2));
    ctx.low.push_back(luminance(downsample(f.pixels, 8)));
    ctx.full.push_back(std::move(f.pixels));
  }
  const int lw = ctx.low[0].width(), lh = ctx.low[0].height();
  const Image saliency = load_or_synthesize_saliency(lw, lh, manifest.saliency_map);
  std::optional<Image> segmentation;
  if (manifest.segmentation_mask) {
    segmentation = read_png_gray(*manifest.segmentation_mask);
    if (segmentation->width() != lw || segmentation->height() != lh) {
      throw InputError("segmentation mask does not match low-resolution size");
    }
  }
  for (const FaceRegion& f : manifest.faces) {
    ctx.faces_low.push_back(f.converted(level_geometry(Level::kFull), level_geometry(Level::kLow)));
  }
  ctx.subject = build_subject_map(saliency, ctx.faces_low,
                                  segmentation ? &*segmentation : nullptr);
  return ctx;
}

TrackingResult run_tracking(const BurstContext& ctx,
                            const PipelineConfig& config) {
  const int n = static_cast<int>(ctx.low.size());
  if (n < 2) {
    throw FallbackError(FallbackReason::kTooFewFrames,
                        "at least two frames are required");
  }
  const int w = ctx.low[0].width(), h = ctx.low[0].height();
  const SelectionPolicy policy = config.policy(ctx.mode);
  Image sampling(w, h, 1, 1.0f);
  if (ctx.mode == BlurMode::kBackground) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        sampling.at(x, y) = std::max(ctx.subject.weight.at(x, y),
                                     static_cast<float>(config.background_sampling_floor));
      }
    }
  }
  Tracker tracker(w, h, config.tracking, config.seed);
  AlignmentResult alignment;
  alignment.solution.width = w;
  alignment.solution.height = h;
  int processed = 0;
  for (int k = 0; k < n; ++k) {
    tracker.add_frame(ctx.low[k]);
    const TrackSet current = tracker.track_set();
    align_frame(current, k, ctx.mode, config, alignment);
    processed = k + 1;
    if (k > 0 && selection_satisfied(current, alignment.solution, policy).satisfied) break;
    if (k + 1 < n) {
      Image subject = map_to_frame(ctx.subject.weight, k, alignment.solution);
      if (ctx.mode == BlurMode::kForeground && k > 0) {
        // Foreground subjects move against the aligned base frame.
        carry_track_weights(subject, current, k, 2 * config.tracking.grid_cell_px);
      }
      tracker.spawn(map_to_frame(sampling, k, alignment.solution), subject);
    }
  }
  TrackingResult result;
  result.tracks = tracker.track_set();
  result.frames_processed = processed;
  return result;
}

AlignmentResult run_alignment(const BurstContext& ctx, const TrackSet& tracks,
                              const PipelineConfig& config) {
  AlignmentResult result;
  result.solution.width = tracks.width;
  result.solution.height = tracks.height;
  if (tracks.num_frames < 2) {
    throw FallbackError(FallbackReason::kTooFewFrames, "fewer than two tracked frames");
  }
  for (int k = 0; k < tracks.num_frames; ++k) {
    align_frame(tracks, k, ctx.mode, config, result);
  }
  return result;
}

SelectionResult run_selection(const BurstContext& ctx, const TrackSet& tracks,
                              const AlignmentResult& alignment,
                              const PipelineConfig& config) {
  const SelectionStatus status =
      selection_satisfied(tracks, alignment.solution, config.policy(ctx.mode));
  SelectionResult result;
  result.frames_processed = alignment.solution.num_frames();
  for (int k = 0; k < result.frames_processed; ++k) {
    result.selected_frames.push_back(ctx.order[k]);
  }
  result.trail_length_pct = status.current_length_pct;
  result.satisfied = status.satisfied;
  result.forced = status.forced;
  return result;
}

RenderResult run_render(const BurstContext& ctx,
                        const AlignmentResult& alignment,
                        const SelectionResult& selection,
                        const PipelineConfig& config, bool zero_flow,
                        double* clamp_seen) {
  const int frames = selection.frames_processed;
  if (frames < 2) {
    throw FallbackError(FallbackReason::kTooFewFrames, "nothing to blur");
  }
  const AlignmentSolution& sol = alignment.solution;
  const int hw = ctx.half[0].width(), hh = ctx.half[0].height();
  std::vector<Image> half, low;
  for (int k = 0; k < frames; ++k) {
    half.push_back(warp_image(ctx.half[k], compose_warp(k, sol, hw, hh)));
    low.push_back(warp_image(ctx.low[k], low_displacement(k, sol)));
  }
  const bool from_file =
      config.flow_source == FlowSource::kFile ||
      (config.flow_source == FlowSource::kAuto && ctx.manifest.flow_dir.has_value());
  if (config.flow_source == FlowSource::kFile && !ctx.manifest.flow_dir) {
    throw InputError("flow source 'file' requires flow_dir in the manifest");
  }
  RenderResult result;
  result.flow_magnitude = Image(hw, hh, 1);
  FlowSequence seq;
  for (int k = 0; k + 1 < frames; ++k) {
    KernelPair pair;
    if (zero_flow) {
      const Image zero(sol.width, sol.height, 2);
      pair = kernels_from_flows(zero, zero, config.kernels);
    } else if (from_file) {
      const Image flow = read_raw_float(*ctx.manifest.flow_dir /
                                        ("pair_" + std::to_string(k) + ".raw"));
      if (flow.width() != sol.width || flow.height() != sol.height || flow.channels() != 4) {
        throw InputError("pair flow " + std::to_string(k) +
                         " must be a 4-channel low-resolution field");
      }
      Image da(sol.width, sol.height, 2), db(sol.width, sol.height, 2);
      for (int y = 0; y < sol.height; ++y) {
        for (int x = 0; x < sol.width; ++x) {
          da.at(x, y, 0) = flow.at(x, y, 0);
          da.at(x, y, 1) = flow.at(x, y, 1);
          db.at(x, y, 0) = flow.at(x, y, 2);
          db.at(x, y, 1) = flow.at(x, y, 3);
        }
      }
      pair = kernels_from_flows(da, db, config.kernels);
    } else {
      const Image da = estimate_flow(low[k + 1], low[k], config.kernels.flow);
      const Image db = estimate_flow(low[k], low[k + 1], config.kernels.flow);
      pair = kernels_from_flows(da, db, config.kernels);
    }
    result.max_clamp_fraction = std::max(result.max_clamp_fraction, pair.clamp_fraction);
    if (clamp_seen) *clamp_seen = result.max_clamp_fraction;
    check_disparity(pair, config.kernels);
    append_pair(seq, pair, hw, hh);
    for (int y = 0; y < hh; ++y) {
      for (int x = 0; x < hw; ++x) {
        const float m = static_cast<float>(std::max(norm(seq.forward.back().vec2_at(x, y)),
                                                    norm(seq.backward.back().vec2_at(x, y))));
        result.flow_magnitude.at(x, y) = std::max(result.flow_magnitude.at(x, y), m);
      }
    }
  }
  AccumulateOptions options;
  options.spline = config.spline;
  options.soft_gamma_k = config.color.soft_gamma_k;
  options.max_samples = config.max_samples;
  options.workers = config.workers;
  result.blurred = accumulate_burst(half, seq, options);
  return result;
}

CompositeResult run_composite(const BurstContext& ctx, const TrackSet& tracks,
                              const AlignmentResult& alignment,
                              const RenderResult& render,
                              const PipelineConfig& config) {
  const CompositeParams& p = config.composite;
  const FlowMask flow = flow_mask_from_magnitude(render.flow_magnitude, p);
  const Image refined =
      refine_mask_edge_aware(flow.mask, ctx.half[0], p.guided_radius, p.guided_eps);
  std::vector<FaceRegion> faces_half;
  for (FaceRegion f : ctx.faces_low) {
    f.motion_mean = face_motion_mean(f, tracks, alignment.solution);
    faces_half.push_back(f.converted(level_geometry(Level::kLow), level_geometry(Level::kHalf)));
  }
  const Image protection = face_protection_mask(
      faces_half, refined.width(), refined.height(), p.face_motion_threshold_pct);
  CompositeResult result;
  result.mask = combine_masks(refined, protection);
  result.long_exposure = composite_final(ctx.full[0], render.blurred, result.mask);
  return result;
}

std::string RunReport::to_json() const {
  json j;
  j["status"] = fallback ? "fallback" : "ok";
  j["fallback_reason"] = fallback ? json(fallback_reason) : json(nullptr);
  if (fallback) j["fallback_detail"] = fallback_detail;
  j["mode"] = to_string(mode);
  j["base_index"] = base_index;
  if (selection) {
    j["frames_processed"] = selection->frames_processed;
    j["selected_frames"] = selection->selected_frames;
    j["trail_length_pct"] = selection->trail_length_pct;
    j["selection_satisfied"] = selection->satisfied;
    j["selection_forced"] = selection->forced;
  }
  json steps = json::array();
  for (std::size_t k = 0; k < solver_steps.size(); ++k) {
    const auto& s = solver_steps[k];
    steps.push_back({{"frame", k + 1},
                     {"e_f", s.e_f},
                     {"e_b", s.e_b},
                     {"estimated_roll", s.estimated_roll},
                     {"iterations", s.iterations},
                     {"subject_tracks", s.subject_count},
                     {"background_vectors", s.background_count}});
  }
  j["solver_steps"] = steps;
  j["max_clamp_fraction"] = max_clamp_fraction;
  if (scene_velocity_pct) {
    j["capture_plan"] = {{"velocity_pct_per_frame", *scene_velocity_pct},
                         {"duration_s", capture_plan->duration_s},
                         {"stride", capture_plan->stride},
                         {"selected_indices", capture_plan->selected_indices}};
  }
  return j.dump(2) + "\n";
}

RunReport run(const BurstManifest& manifest, const PipelineConfig& config,
              const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const BurstContext ctx = prepare_burst(manifest, config);
  RunReport report;
  report.mode = ctx.mode;
  report.base_index = ctx.order[0];
  write_png_srgb(out_dir / "conventional.png", ctx.full[0]);
  const SelectionPolicy policy = config.policy(ctx.mode);
  if (ctx.low.size() >= 5) {
    const std::vector<Image> first(ctx.low.begin(), ctx.low.begin() + 5);
    report.scene_velocity_pct = estimate_scene_velocity(first, policy, config.seed);
    report.capture_plan = plan_capture(*report.scene_velocity_pct, policy,
                                       manifest.frame_rate_hz);
  }
  try {
    const TrackingResult tracking = run_tracking(ctx, config);
    const AlignmentResult alignment = run_alignment(ctx, tracking.tracks, config);
    report.solver_steps = alignment.steps;
    report.selection = run_selection(ctx, tracking.tracks, alignment, config);
    const RenderResult render = run_render(ctx, alignment, *report.selection, config,
                                           false, &report.max_clamp_fraction);
    const CompositeResult composite =
        run_composite(ctx, tracking.tracks, alignment, render, config);
    write_png_srgb(out_dir / "long_exposure.png", composite.long_exposure);
    if (config.debug_dumps) {
      save_tracks(tracking.tracks, out_dir / "tracks.json");
      save_alignment(alignment, out_dir / "alignment.json");
      save_selection(*report.selection, out_dir / "selection.json");
      write_png_gray(out_dir / "mask.png", composite.mask);
    }
  } catch (const FallbackError& e) {
    report.fallback = true;
    report.fallback_reason = to_string(e.reason());
    report.fallback_detail = e.what();
    fs::remove(out_dir / "long_exposure.png");
  }
  write_text(out_dir / "report.json", report.to_json());
  return report;
}

void save_tracks(const TrackSet& tracks, const fs::path& path) {
  json j;
  j["width"] = tracks.width;
  j["height"] = tracks.height;
  j["grid_cell_px"] = tracks.grid_cell_px;
  j["num_frames"] = tracks.num_frames;
  json list = json::array();
  for (const Track& t : tracks.tracks) {
    json points = json::array();
    for (const Vec2& p : t.points) points.push_back(vec_json(p));
    list.push_back({{"start_frame", t.start},
                    {"weight", t.weight},
                    {"active", t.active},
                    {"points", points}});
  }
  j["tracks"] = list;
  write_text(path, j.dump() + "\n");
}

TrackSet load_tracks(const fs::path& path) {
  const json j = read_json(path);
  TrackSet set;
  set.width = j.at("width").get<int>();
  set.height = j.at("height").get<int>();
  set.grid_cell_px = j.at("grid_cell_px").get<int>();
  set.num_frames = j.at("num_frames").get<int>();
  for (const json& t : j.at("tracks")) {
    Track track;
    track.start = t.at("start_frame").get<int>();
    track.weight = t.at("weight").get<double>();
    track.active = t.at("active").get<bool>();
    for (const json& p : t.at("points")) track.points.push_back(json_vec(p));
    set.tracks.push_back(std::move(track));
  }
  return set;
}

void save_alignment(const AlignmentResult& alignment, const fs::path& path) {
  const AlignmentSolution& sol = alignment.solution;
  json j;
  j["width"] = sol.width;
  j["height"] = sol.height;
  json frames = json::array();
  for (int k = 0; k < sol.num_frames(); ++k) {
    const Similarity2D& g = sol.global[k];
    json f = {{"s", g.s}, {"theta", g.theta}, {"t", vec_json(g.t)}};
    const MeshWarp& m = sol.mesh[k];
    if (!m.empty()) {
      json d = json::array();
      for (int jj = 0; jj <= m.rows(); ++jj) {
        for (int ii = 0; ii <= m.cols(); ++ii) d.push_back(vec_json(m.displacement(ii, jj)));
      }
      f["mesh"] = {{"cols", m.cols()},
                   {"rows", m.rows()},
                   {"support_radius", m.support_radius()},
                   {"displacements", d}};
    }
    frames.push_back(f);
  }
  j["frames"] = frames;
  json steps = json::array();
  for (const auto& s : alignment.steps) {
    steps.push_back({{"e_f", s.e_f},
                     {"e_b", s.e_b},
                     {"estimated_roll", s.estimated_roll},
                     {"iterations", s.iterations},
                     {"subject_tracks", s.subject_count},
                     {"background_vectors", s.background_count}});
  }
  j["steps"] = steps;
  write_text(path, j.dump(2) + "\n");
}

AlignmentResult load_alignment(const fs::path& path) {
  const json j = read_json(path);
  AlignmentResult result;
  result.solution.width = j.at("width").get<int>();
  result.solution.height = j.at("height").get<int>();
  for (const json& f : j.at("frames")) {
    Similarity2D g;
    g.s = f.at("s").get<double>();
    g.theta = f.at("theta").get<double>();
    g.t = json_vec(f.at("t"));
    MeshWarp mesh;
    if (f.contains("mesh")) {
      const json& m = f["mesh"];
      MeshParams params;
      params.cols = m.at("cols").get<int>();
      params.rows = m.at("rows").get<int>();
      mesh = MeshWarp(result.solution.width, result.solution.height, params);
      const json& d = m.at("displacements");
      int idx = 0;
      for (int jj = 0; jj <= mesh.rows(); ++jj) {
        for (int ii = 0; ii <= mesh.cols(); ++ii) mesh.displacement(ii, jj) = json_vec(d.at(idx++));
      }
    }
    result.solution.append(g, std::move(mesh));
  }
  for (const json& s : j.at("steps")) {
    BackgroundStepReport r;
    r.e_f = s.at("e_f").get<double>();
    r.e_b = s.at("e_b").get<double>();
    r.estimated_roll = s.at("estimated_roll").get<double>();
    r.iterations = s.at("iterations").get<int>();
    r.subject_count = s.at("subject_tracks").get<int>();
    r.background_count = s.at("background_vectors").get<int>();
    result.steps.push_back(r);
  }
  return result;
}

void save_selection(const SelectionResult& selection, const fs::path& path) {
  json j = {{"frames_processed", selection.frames_processed},
            {"selected_frames", selection.selected_frames},
            {"trail_length_pct", selection.trail_length_pct},
            {"satisfied", selection.satisfied},
            {"forced", selection.forced}};
  write_text(path, j.dump(2) + "\n");
}

SelectionResult load_selection(const fs::path& path) {
  const json j = read_json(path);
  SelectionResult s;
  s.frames_processed = j.at("frames_processed").get<int>();
  s.selected_frames = j.at("selected_frames").get<std::vector<int>>();
  s.trail_length_pct = j.at("trail_length_pct").get<double>();
  s.satisfied = j.at("satisfied").get<bool>();
  s.forced = j.at("forced").get<bool>();
  return s;
}

void save_render(const RenderResult& render, const fs::path& dir) {
  fs::create_directories(dir);
  write_raw_float(dir / "blurred.raw", render.blurred);
  write_raw_float(dir / "flow_magnitude.raw", render.flow_magnitude);
  write_text(dir / "render.json",
             json{{"max_clamp_fraction", render.max_clamp_fraction}}.dump(2) + "\n");
}

RenderResult load_render(const fs::path& dir) {
  RenderResult r;
  r.blurred = read_raw_float(dir / "blurred.raw");
  r.flow_magnitude = read_raw_float(dir / "flow_magnitude.raw");
  r.max_clamp_fraction = read_json(dir / "render.json").at("max_clamp_fraction").get<double>();
  return r;
}

}  // namespace longexp

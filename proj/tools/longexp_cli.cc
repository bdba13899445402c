// Command-line front end: full pipeline runs, individual stages working on a
// shared artifact directory, and the synthetic burst generator.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "longexp/errors.h"
#include "longexp/pipeline.h"
#include "longexp/synth.h"

namespace fs = std::filesystem;
using namespace longexp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFallback = 2;

struct CommonOptions {
  std::string manifest;
  std::string config;
  std::string work;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> workers;
};

void add_common(CLI::App* app, CommonOptions& o, bool needs_work) {
  app->add_option("--manifest", o.manifest, "Burst manifest (JSON)")->required();
  app->add_option("--config", o.config, "Pipeline config (JSON)");
  if (needs_work) {
    app->add_option("--work", o.work, "Artifact directory shared by stages")->required();
  }
  app->add_option("--seed", o.seed, "RNG seed (overrides config)");
  app->add_option("--mode", o.mode, "foreground_blur | background_blur");
  app->add_option("--workers", o.workers, "Worker threads");
}

PipelineConfig make_config(const CommonOptions& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.mode) c.mode = blur_mode_from_string(*o.mode);
  if (o.workers) c.workers = *o.workers;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Computational long-exposure synthesis from bursts"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string run_out;
  bool run_debug = false;
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline");
  add_common(run_cmd, run_opts, false);
  run_cmd->add_option("--out", run_out, "Output directory")->required();
  run_cmd->add_flag("--debug", run_debug, "Also write stage dumps and the mask");

  CommonOptions stage_opts;
  auto* track_cmd = app.add_subcommand("track", "Track features (writes tracks.json)");
  add_common(track_cmd, stage_opts, true);
  auto* align_cmd = app.add_subcommand("align", "Align frames (writes alignment.json)");
  add_common(align_cmd, stage_opts, true);
  auto* select_cmd = app.add_subcommand("select", "Frame selection (writes selection.json)");
  add_common(select_cmd, stage_opts, true);
  bool zero_flow = false;
  auto* render_cmd = app.add_subcommand("render", "Motion blur (writes render/)");
  add_common(render_cmd, stage_opts, true);
  render_cmd->add_flag("--zero-flow", zero_flow, "Use zero-length kernels");
  std::string composite_out;
  auto* composite_cmd = app.add_subcommand("composite", "Final composite");
  add_common(composite_cmd, stage_opts, true);
  composite_cmd->add_option("--out", composite_out, "Output directory (default: work)");

  std::string preset = "moving_disc";
  std::string synth_out;
  std::uint64_t synth_seed = 1;
  std::optional<int> synth_frames;
  std::string synth_mode = "foreground_blur";
  bool synth_flows = false;
  bool synth_saliency = true;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic burst");
  synth_cmd->add_option("--preset", preset,
                        "static | moving_disc | panning_subject | parallax | "
                        "disparity_overflow | constant_velocity");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Texture and noise seed");
  synth_cmd->add_option("--frames", synth_frames, "Number of frames");
  synth_cmd->add_option("--mode", synth_mode, "Mode recorded in the manifest");
  synth_cmd->add_flag("--flows", synth_flows, "Write exact pair flows");
  synth_cmd->add_flag("--saliency,!--no-saliency", synth_saliency,
                      "Write the subject saliency map");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      SynthScene scene = synth_preset(preset, synth_seed);
      if (synth_frames) scene.num_frames = *synth_frames;
      const SynthOutput out = write_synth_burst(SynthRenderer(scene), synth_out,
                                                blur_mode_from_string(synth_mode),
                                                synth_saliency, synth_flows);
      std::cout << out.manifest.string() << "\n";
      return kExitOk;
    }
    if (*run_cmd) {
      PipelineConfig config = make_config(run_opts);
      config.debug_dumps |= run_debug;
      const RunReport report = run(load_manifest(run_opts.manifest), config, run_out);
      std::cout << report.to_json();
      return report.fallback ? kExitFallback : kExitOk;
    }

    const PipelineConfig config = make_config(stage_opts);
    const fs::path work = stage_opts.work;
    fs::create_directories(work);
    const BurstContext ctx = prepare_burst(load_manifest(stage_opts.manifest), config);
    if (*track_cmd) {
      const TrackingResult r = run_tracking(ctx, config);
      save_tracks(r.tracks, work / "tracks.json");
      std::cout << "tracks: " << r.tracks.tracks.size() << ", frames: "
                << r.frames_processed << "\n";
    } else if (*align_cmd) {
      save_alignment(run_alignment(ctx, load_tracks(work / "tracks.json"), config),
                     work / "alignment.json");
    } else if (*select_cmd) {
      const SelectionResult s =
          run_selection(ctx, load_tracks(work / "tracks.json"),
                        load_alignment(work / "alignment.json"), config);
      save_selection(s, work / "selection.json");
      std::cout << "selected:";
      for (int i : s.selected_frames) std::cout << " " << i;
      std::cout << "\ntrail_length_pct: " << s.trail_length_pct << "\n";
    } else if (*render_cmd) {
      save_render(run_render(ctx, load_alignment(work / "alignment.json"),
                             load_selection(work / "selection.json"), config,
                             zero_flow),
                  work / "render");
    } else if (*composite_cmd) {
      const fs::path out = composite_out.empty() ? work : fs::path(composite_out);
      fs::create_directories(out);
      const CompositeResult r = run_composite(
          ctx, load_tracks(work / "tracks.json"), load_alignment(work / "alignment.json"),
          load_render(work / "render"), config);
      write_png_srgb(out / "conventional.png", ctx.full[0]);
      write_png_srgb(out / "long_exposure.png", r.long_exposure);
    }
    return kExitOk;
  } catch (const FallbackError& e) {
    std::cerr << "fallback: " << e.what() << "\n";
    return kExitFallback;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

#include "hdmap/hdmap.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

int report(hdmap_status status, const char* what) {
  if (status == HDMAP_OK) return 0;
  std::fprintf(stderr, "hdmap %s: %s\n", what, hdmap_last_error());
  return static_cast<int>(status);
}

int build_map(const std::string& data, const std::string& config_path, const std::string& out) {
  hdmap_dataset* dataset = nullptr;
  hdmap_config* config = nullptr;
  hdmap_result* result = nullptr;
  hdmap_status st = hdmap_dataset_load(data.c_str(), &dataset);
  if (st == HDMAP_OK) st = hdmap_config_load(config_path.empty() ? nullptr : config_path.c_str(), &config);
  if (st == HDMAP_OK) st = hdmap_pipeline_run(dataset, config, &result);
  if (st == HDMAP_OK) st = hdmap_result_write(result, out.c_str());
  if (st == HDMAP_OK) {
    std::printf("lanes=%zu road_area=%.3f curb_delta=%.4f\n", hdmap_result_lane_count(result),
                hdmap_result_road_area(result), hdmap_result_curb_delta(result));
  }
  const int code = report(st, "build-map");
  hdmap_result_free(result);
  hdmap_config_free(config);
  hdmap_dataset_free(dataset);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lidar and camera HD map builder"};
  app.set_version_flag("--version", hdmap_version());
  app.require_subcommand(1);

  std::string spec, out, data, config, pred, gt;
  std::int64_t seed = -1;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->add_option("--spec", spec, "Scenario file (key=value)")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Random seed (overrides the scenario file)")->check(CLI::NonNegativeNumber);
  sim->add_option("--out", out, "Output dataset directory")->required();

  auto* build = app.add_subcommand("build-map", "Build a road polygon and lanes from a dataset");
  build->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  build->add_option("--config", config, "Pipeline config (key=value)")->check(CLI::ExistingFile);
  build->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Score a built map against ground truth");
  eval->add_option("--pred", pred, "build-map output directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gt", gt, "Dataset root or ground-truth directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out, "Report file")->required();

  auto* plot = app.add_subcommand("plot", "Render a built map as SVG");
  plot->add_option("--pred", pred, "build-map output directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--gt", gt, "Dataset root or ground-truth directory")->check(CLI::ExistingDirectory);
  plot->add_option("--out", out, "SVG file")->required();

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) return report(hdmap_simulate(spec.c_str(), seed, out.c_str()), "simulate");
  if (build->parsed()) return build_map(data, config, out);
  if (eval->parsed()) return report(hdmap_evaluate(pred.c_str(), gt.c_str(), out.c_str()), "evaluate");
  return report(hdmap_plot(pred.c_str(), gt.empty() ? nullptr : gt.c_str(), out.c_str()), "plot");
}

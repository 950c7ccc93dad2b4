#include "hdmap/hdmap.h"

#include "hdmap/error.hpp"
#include "hdmap/io.hpp"
#include "hdmap/pipeline.hpp"
#include "hdmap/scenario.hpp"

#include <exception>
#include <memory>
#include <new>
#include <string>

struct hdmap_dataset {
  hdmap::DatasetBundle bundle;
};

struct hdmap_config {
  hdmap::PipelineConfig config;
};

struct hdmap_result {
  hdmap::PipelineResult result;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
hdmap_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return HDMAP_OK;
  } catch (const hdmap::Error& e) {
    g_last_error = e.what();
    return static_cast<hdmap_status>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return HDMAP_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HDMAP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HDMAP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return HDMAP_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw hdmap::invalid_argument(std::string(name) + " is null");
}

}  // namespace

extern "C" {

const char* hdmap_last_error(void) { return g_last_error.c_str(); }

const char* hdmap_version(void) { return "0.1.0"; }

hdmap_status hdmap_simulate(const char* spec_path, int64_t seed, const char* out_dir) {
  return guarded([&] {
    require(spec_path, "spec_path");
    require(out_dir, "out_dir");
    hdmap::ScenarioSpec spec = hdmap::io::read_scenario_spec(spec_path);
    if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
    const auto recordings = hdmap::gen_scenario(spec);
    const std::filesystem::path root(out_dir);
    if (recordings.size() == 1) {
      hdmap::io::write_dataset(root, recordings.front().bundle);
    } else {
      for (const auto& rec : recordings) hdmap::io::write_dataset(root / rec.name, rec.bundle);
    }
  });
}

hdmap_status hdmap_dataset_load(const char* root, hdmap_dataset** out) {
  return guarded([&] {
    require(root, "root");
    require(out, "out");
    *out = nullptr;
    auto ds = std::make_unique<hdmap_dataset>();
    ds->bundle = hdmap::io::load_dataset(root);
    *out = ds.release();
  });
}

size_t hdmap_dataset_frame_count(const hdmap_dataset* dataset) { return dataset ? dataset->bundle.frames.size() : 0; }

void hdmap_dataset_free(hdmap_dataset* dataset) { delete dataset; }

hdmap_status hdmap_config_load(const char* path, hdmap_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto cfg = std::make_unique<hdmap_config>();
    if (path) cfg->config = hdmap::io::read_config(path);
    *out = cfg.release();
  });
}

hdmap_status hdmap_config_set(hdmap_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    hdmap::PipelineConfig copy = config->config;
    copy.set(key, value);
    copy.validate();
    config->config = copy;
  });
}

void hdmap_config_free(hdmap_config* config) { delete config; }

hdmap_status hdmap_pipeline_run(const hdmap_dataset* dataset, const hdmap_config* config, hdmap_result** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(config, "config");
    require(out, "out");
    *out = nullptr;
    auto res = std::make_unique<hdmap_result>();
    res->result = hdmap::run_pipeline(dataset->bundle, config->config);
    *out = res.release();
  });
}

hdmap_status hdmap_result_write(const hdmap_result* result, const char* out_dir) {
  return guarded([&] {
    require(result, "result");
    require(out_dir, "out_dir");
    hdmap::io::write_result(out_dir, result->result);
  });
}

size_t hdmap_result_lane_count(const hdmap_result* result) { return result ? result->result.lanes.size() : 0; }

double hdmap_result_road_area(const hdmap_result* result) {
  return result ? hdmap::polygon_area(result->result.road) : 0.0;
}

double hdmap_result_curb_delta(const hdmap_result* result) { return result ? result->result.curb_delta : 0.0; }

void hdmap_result_free(hdmap_result* result) { delete result; }

hdmap_status hdmap_evaluate(const char* pred_dir, const char* gt_dir, const char* out_file) {
  return guarded([&] {
    require(pred_dir, "pred_dir");
    require(gt_dir, "gt_dir");
    require(out_file, "out_file");
    const auto report = hdmap::io::evaluate_directories(pred_dir, gt_dir);
    hdmap::io::atomic_write(out_file, hdmap::io::format_key_values(report));
  });
}

hdmap_status hdmap_plot(const char* pred_dir, const char* gt_dir, const char* out_file) {
  return guarded([&] {
    require(pred_dir, "pred_dir");
    require(out_file, "out_file");
    const std::filesystem::path pred(pred_dir);
    hdmap::io::PlotLayers layers;
    layers.road = hdmap::io::read_road_polygon(pred / "road_polygon.csv");
    layers.lanes = hdmap::io::read_lanes(pred);
    if (gt_dir) {
      const auto gt = hdmap::io::ground_truth_dir(gt_dir);
      layers.gt_road = hdmap::io::read_road_polygon(gt / "road.csv");
      layers.gt_lanes = hdmap::io::read_ground_truth_lanes(gt);
    }
    hdmap::io::atomic_write(out_file, hdmap::io::render_svg(layers));
  });
}

}  // extern "C"

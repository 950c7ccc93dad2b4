#ifndef HDMAP_HDMAP_H
#define HDMAP_HDMAP_H

#include <stddef.h>
#include <stdint.h>

#if defined(HDMAP_BUILDING_LIBRARY)
#define HDMAP_API __attribute__((visibility("default")))
#else
#define HDMAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hdmap_status {
  HDMAP_OK = 0,
  HDMAP_ERR_INVALID_ARGUMENT = 1,
  HDMAP_ERR_IO = 2,
  HDMAP_ERR_PARSE = 3,
  HDMAP_ERR_NUMERIC = 4,
  HDMAP_ERR_INTERNAL = 5
} hdmap_status;

typedef struct hdmap_dataset hdmap_dataset;
typedef struct hdmap_config hdmap_config;
typedef struct hdmap_result hdmap_result;

/* Message for the most recent failure on the calling thread ("" if none). */
HDMAP_API const char* hdmap_last_error(void);
HDMAP_API const char* hdmap_version(void);

/* Generates a synthetic dataset from a key=value scenario file. A negative
   seed keeps the seed from the file. Multi-recording scenarios write one
   dataset per recording into out_dir/<name>. */
HDMAP_API hdmap_status hdmap_simulate(const char* spec_path, int64_t seed, const char* out_dir);

HDMAP_API hdmap_status hdmap_dataset_load(const char* root, hdmap_dataset** out);
HDMAP_API size_t hdmap_dataset_frame_count(const hdmap_dataset* dataset);
HDMAP_API void hdmap_dataset_free(hdmap_dataset* dataset);

/* path may be NULL for defaults. */
HDMAP_API hdmap_status hdmap_config_load(const char* path, hdmap_config** out);
HDMAP_API hdmap_status hdmap_config_set(hdmap_config* config, const char* key, const char* value);
HDMAP_API void hdmap_config_free(hdmap_config* config);

HDMAP_API hdmap_status hdmap_pipeline_run(const hdmap_dataset* dataset, const hdmap_config* config,
                                          hdmap_result** out);
HDMAP_API hdmap_status hdmap_result_write(const hdmap_result* result, const char* out_dir);
HDMAP_API size_t hdmap_result_lane_count(const hdmap_result* result);
HDMAP_API double hdmap_result_road_area(const hdmap_result* result);
HDMAP_API double hdmap_result_curb_delta(const hdmap_result* result);
HDMAP_API void hdmap_result_free(hdmap_result* result);

/* gt_dir may be a dataset root or a directory holding road.csv/lane_K.csv. */
HDMAP_API hdmap_status hdmap_evaluate(const char* pred_dir, const char* gt_dir, const char* out_file);

/* gt_dir may be NULL. */
HDMAP_API hdmap_status hdmap_plot(const char* pred_dir, const char* gt_dir, const char* out_file);

#ifdef __cplusplus
}
#endif

#endif

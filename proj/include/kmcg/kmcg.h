/* C interface to the kmcg motion style transfer library.
 *
 * Every function returning kmcg_status leaves a message retrievable with
 * kmcg_last_error() (per thread) when it fails. Strings handed out through
 * char** parameters are owned by the caller and released with kmcg_string_free.
 */
#ifndef KMCG_KMCG_H
#define KMCG_KMCG_H

#include <stddef.h>

#if defined(KMCG_BUILDING_LIBRARY)
#define KMCG_API __attribute__((visibility("default")))
#else
#define KMCG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kmcg_status {
  KMCG_OK = 0,
  KMCG_ERR_USAGE = 1,     /* bad argument or configuration */
  KMCG_ERR_DATA = 2,      /* malformed or missing input data */
  KMCG_ERR_IO = 3,        /* filesystem failure */
  KMCG_ERR_NUMERICAL = 4, /* divergence or non-finite values */
  KMCG_ERR_INTERNAL = 5   /* broken internal invariant */
} kmcg_status;

typedef struct kmcg_config kmcg_config;
typedef struct kmcg_motion kmcg_motion;
typedef struct kmcg_model kmcg_model;

typedef void (*kmcg_log_fn)(const char* message, void* user);

KMCG_API const char* kmcg_version(void);
KMCG_API const char* kmcg_last_error(void);
KMCG_API const char* kmcg_status_name(kmcg_status status);
/* Progress messages from commands. NULL silences them. */
KMCG_API void kmcg_set_log(kmcg_log_fn fn, void* user);
KMCG_API void kmcg_string_free(char* s);

/* Run configuration: flat dotted keys such as "train.steps". */
KMCG_API kmcg_status kmcg_config_new(kmcg_config** out);
KMCG_API void kmcg_config_free(kmcg_config* cfg);
KMCG_API kmcg_status kmcg_config_load(kmcg_config* cfg, const char* path);
KMCG_API kmcg_status kmcg_config_set(kmcg_config* cfg, const char* key, const char* value);
KMCG_API kmcg_status kmcg_config_get(const kmcg_config* cfg, const char* key, char** value);
KMCG_API kmcg_status kmcg_config_text(const kmcg_config* cfg, char** text);
KMCG_API size_t kmcg_config_key_count(void);
KMCG_API kmcg_status kmcg_config_key_info(size_t index, const char** name, const char** help);

/* Commands. `force` allows overwriting existing outputs. */
KMCG_API kmcg_status kmcg_cmd_synth(const kmcg_config* cfg, int force);
KMCG_API kmcg_status kmcg_cmd_train(const kmcg_config* cfg, const char* domain, int force);
KMCG_API kmcg_status kmcg_cmd_transfer(const kmcg_config* cfg, const char* source_path,
                                       const char* source_domain, const char* target_domain,
                                       const char* output_path, int force);
KMCG_API kmcg_status kmcg_cmd_transfer_dir(const kmcg_config* cfg, const char* source_dir,
                                           const char* source_domain, const char* target_domain,
                                           const char* output_dir, int force);
KMCG_API kmcg_status kmcg_cmd_cycle(const kmcg_config* cfg, const char* domain_a,
                                    const char* domain_b, int force, char** report_text);
KMCG_API kmcg_status kmcg_cmd_evaluate(const kmcg_config* cfg, const char* outputs_dir,
                                       const char* real_dir, const char* source_dir, int force,
                                       char** report_text);
KMCG_API kmcg_status kmcg_cmd_keyframes(const kmcg_config* cfg, const char* motion_path,
                                        char** text);

/* Motion files. Frames are exchanged row-major (frame by frame). */
KMCG_API kmcg_status kmcg_motion_load(const char* path, kmcg_motion** out);
KMCG_API void kmcg_motion_free(kmcg_motion* motion);
KMCG_API kmcg_status kmcg_motion_save(const kmcg_motion* motion, const char* path);
KMCG_API kmcg_status kmcg_motion_shape(const kmcg_motion* motion, size_t* frames, size_t* dims);
KMCG_API kmcg_status kmcg_motion_frames(const kmcg_motion* motion, double* out, size_t count);
KMCG_API const char* kmcg_motion_domain(const kmcg_motion* motion);

/* Trained domain models. */
KMCG_API kmcg_status kmcg_model_load(const char* path, kmcg_model** out);
KMCG_API void kmcg_model_free(kmcg_model* model);
KMCG_API const char* kmcg_model_domain(const kmcg_model* model);

/* One transfer with the sampler, guidance and mode settings of `cfg`. */
KMCG_API kmcg_status kmcg_transfer(const kmcg_config* cfg, const kmcg_model* source,
                                   const kmcg_model* target, const kmcg_motion* input,
                                   kmcg_motion** output);

#ifdef __cplusplus
}
#endif

#endif

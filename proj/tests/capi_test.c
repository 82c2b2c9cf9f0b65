/* Exercises the C interface from plain C. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "kmcg/kmcg.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: failed: %s (last error: %s)\n", __FILE__, \
              __LINE__, #cond, kmcg_last_error());                     \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static int log_lines = 0;
static void count_log(const char* message, void* user) {
  (void)message;
  ++*(int*)user;
}

static void set(kmcg_config* cfg, const char* key, const char* value) {
  EXPECT(kmcg_config_set(cfg, key, value) == KMCG_OK);
}

int main(int argc, char** argv) {
  const char* root = argc > 1 ? argv[1] : "capi_work";
  char path[1024], path2[1024], dir[1024];

  EXPECT(strlen(kmcg_version()) > 0);
  EXPECT(strcmp(kmcg_status_name(KMCG_ERR_DATA), "data error") == 0);

  kmcg_config* cfg = NULL;
  EXPECT(kmcg_config_new(&cfg) == KMCG_OK);
  EXPECT(kmcg_config_key_count() > 10);
  const char* name = NULL;
  const char* help = NULL;
  EXPECT(kmcg_config_key_info(0, &name, &help) == KMCG_OK && name && help);
  EXPECT(kmcg_config_key_info(100000, &name, &help) == KMCG_ERR_USAGE);

  EXPECT(kmcg_config_set(cfg, "no.such.key", "1") == KMCG_ERR_USAGE);
  EXPECT(strstr(kmcg_last_error(), "no.such.key") != NULL);
  EXPECT(kmcg_config_set(cfg, NULL, "1") == KMCG_ERR_USAGE);

  snprintf(dir, sizeof dir, "%s/data", root);
  set(cfg, "paths.data_dir", dir);
  snprintf(dir, sizeof dir, "%s/ckpt", root);
  set(cfg, "paths.checkpoint_dir", dir);
  snprintf(dir, sizeof dir, "%s/reports", root);
  set(cfg, "paths.report_dir", dir);
  set(cfg, "synth.sequences", "3");
  set(cfg, "synth.frames", "40");
  set(cfg, "synth.dims", "3");
  set(cfg, "model.hidden", "8");
  set(cfg, "model.blocks", "1");
  set(cfg, "model.time_dim", "4");
  set(cfg, "model.kernel", "3");
  set(cfg, "schedule.T", "100");
  set(cfg, "train.steps", "5");
  set(cfg, "train.batch_size", "2");
  set(cfg, "train.warmup", "1");
  set(cfg, "train.loss_window", "2");
  set(cfg, "sampler.steps", "5");
  set(cfg, "keyframes.count", "3");
  set(cfg, "keyframes.min_gap", "5");
  set(cfg, "cycle.samples", "2");

  char* value = NULL;
  EXPECT(kmcg_config_get(cfg, "train.steps", &value) == KMCG_OK && strcmp(value, "5") == 0);
  kmcg_string_free(value);
  char* text = NULL;
  EXPECT(kmcg_config_text(cfg, &text) == KMCG_OK && strstr(text, "synth.frames = 40") != NULL);
  kmcg_string_free(text);

  kmcg_set_log(count_log, &log_lines);
  EXPECT(kmcg_cmd_synth(cfg, 1) == KMCG_OK);
  EXPECT(kmcg_cmd_synth(cfg, 0) == KMCG_ERR_USAGE);
  EXPECT(kmcg_cmd_train(cfg, "styleA", 1) == KMCG_OK);
  EXPECT(kmcg_cmd_train(cfg, "styleB", 1) == KMCG_OK);
  EXPECT(kmcg_cmd_train(cfg, "missing", 1) == KMCG_ERR_DATA);
  EXPECT(log_lines > 0);
  kmcg_set_log(NULL, NULL);

  snprintf(path, sizeof path, "%s/data/styleA/seq0000.motion", root);
  kmcg_motion* motion = NULL;
  EXPECT(kmcg_motion_load(path, &motion) == KMCG_OK);
  size_t frames = 0, dims = 0;
  EXPECT(kmcg_motion_shape(motion, &frames, &dims) == KMCG_OK && frames == 40 && dims == 3);
  EXPECT(strcmp(kmcg_motion_domain(motion), "styleA") == 0);
  double* values = malloc(sizeof(double) * frames * dims);
  EXPECT(kmcg_motion_frames(motion, values, frames * dims) == KMCG_OK);
  EXPECT(kmcg_motion_frames(motion, values, 3) == KMCG_ERR_USAGE);

  kmcg_model* a = NULL;
  kmcg_model* b = NULL;
  snprintf(path2, sizeof path2, "%s/ckpt/styleA.ckpt", root);
  EXPECT(kmcg_model_load(path2, &a) == KMCG_OK);
  snprintf(path2, sizeof path2, "%s/ckpt/styleB.ckpt", root);
  EXPECT(kmcg_model_load(path2, &b) == KMCG_OK);
  EXPECT(strcmp(kmcg_model_domain(b), "styleB") == 0);
  kmcg_model* bad = NULL;
  EXPECT(kmcg_model_load(path, &bad) == KMCG_ERR_DATA && bad == NULL);

  set(cfg, "transfer.mode", "gradient");
  kmcg_motion* out = NULL;
  EXPECT(kmcg_transfer(cfg, a, b, motion, &out) == KMCG_OK);
  EXPECT(strcmp(kmcg_motion_domain(out), "styleB") == 0);
  double* transferred = malloc(sizeof(double) * frames * dims);
  EXPECT(kmcg_motion_frames(out, transferred, frames * dims) == KMCG_OK);
  snprintf(path2, sizeof path2, "%s/out.motion", root);
  EXPECT(kmcg_motion_save(out, path2) == KMCG_OK);

  set(cfg, "transfer.mode", "explicit");
  kmcg_motion* none = NULL;
  EXPECT(kmcg_transfer(cfg, a, b, motion, &none) == KMCG_ERR_USAGE && none == NULL);
  set(cfg, "transfer.mode", "vanilla");

  snprintf(path2, sizeof path2, "%s/single.motion", root);
  EXPECT(kmcg_cmd_transfer(cfg, path, "styleA", "styleB", path2, 1) == KMCG_OK);
  snprintf(dir, sizeof dir, "%s/outputs/vanilla", root);
  snprintf(path2, sizeof path2, "%s/data/styleA", root);
  EXPECT(kmcg_cmd_transfer_dir(cfg, path2, "styleA", "styleB", dir, 1) == KMCG_OK);

  char* report = NULL;
  snprintf(dir, sizeof dir, "%s/outputs", root);
  snprintf(path, sizeof path, "%s/data/styleB", root);
  EXPECT(kmcg_cmd_evaluate(cfg, dir, path, path2, 1, &report) == KMCG_OK);
  EXPECT(report && strstr(report, "fmd.vanilla = ") != NULL);
  kmcg_string_free(report);
  report = NULL;
  EXPECT(kmcg_cmd_cycle(cfg, "styleA", "styleB", 1, &report) == KMCG_OK);
  EXPECT(report && strstr(report, "cycle.mean = ") != NULL);
  kmcg_string_free(report);

  snprintf(path, sizeof path, "%s/data/styleA/seq0001.motion", root);
  EXPECT(kmcg_cmd_keyframes(cfg, path, &text) == KMCG_OK && strncmp(text, "index saliency", 14) == 0);
  kmcg_string_free(text);

  EXPECT(kmcg_motion_load("/nonexistent/file.motion", &none) != KMCG_OK);
  EXPECT(kmcg_motion_load(NULL, &none) == KMCG_ERR_USAGE);

  free(values);
  free(transferred);
  kmcg_motion_free(out);
  kmcg_motion_free(motion);
  kmcg_model_free(a);
  kmcg_model_free(b);
  kmcg_config_free(cfg);
  kmcg_motion_free(NULL);
  kmcg_model_free(NULL);
  kmcg_config_free(NULL);

  if (failures) fprintf(stderr, "%d C API checks failed\n", failures);
  else printf("C API checks passed\n");
  return failures ? 1 : 0;
}

#include "kmcg/kmcg.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "kmcg/commands.hpp"
#include "kmcg/error.hpp"

struct kmcg_config {
  kmcg::RunConfig cfg;
};

struct kmcg_motion {
  kmcg::MotionClip clip;
};

struct kmcg_model {
  std::shared_ptr<const kmcg::DomainModel> model;
};

namespace {

thread_local std::string g_last_error;
kmcg_log_fn g_log = nullptr;
void* g_log_user = nullptr;

kmcg_status status_of(kmcg::ErrorKind kind) {
  switch (kind) {
    case kmcg::ErrorKind::usage: return KMCG_ERR_USAGE;
    case kmcg::ErrorKind::data: return KMCG_ERR_DATA;
    case kmcg::ErrorKind::io: return KMCG_ERR_IO;
    case kmcg::ErrorKind::numerical: return KMCG_ERR_NUMERICAL;
    case kmcg::ErrorKind::contract: return KMCG_ERR_INTERNAL;
  }
  return KMCG_ERR_INTERNAL;
}

template <typename F>
kmcg_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return KMCG_OK;
  } catch (const kmcg::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KMCG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KMCG_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  kmcg::require(p != nullptr, kmcg::ErrorKind::usage, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

kmcg::LogFn logger() {
  if (!g_log) return {};
  return [fn = g_log, user = g_log_user](const std::string& msg) { fn(msg.c_str(), user); };
}

}  // namespace

extern "C" {

const char* kmcg_version(void) { return "0.1.0"; }

const char* kmcg_last_error(void) { return g_last_error.c_str(); }

const char* kmcg_status_name(kmcg_status status) {
  switch (status) {
    case KMCG_OK: return "ok";
    case KMCG_ERR_USAGE: return "usage error";
    case KMCG_ERR_DATA: return "data error";
    case KMCG_ERR_IO: return "io error";
    case KMCG_ERR_NUMERICAL: return "numerical error";
    case KMCG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void kmcg_set_log(kmcg_log_fn fn, void* user) {
  g_log = fn;
  g_log_user = user;
}

void kmcg_string_free(char* s) { std::free(s); }

kmcg_status kmcg_config_new(kmcg_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new kmcg_config();
  });
}

void kmcg_config_free(kmcg_config* cfg) { delete cfg; }

kmcg_status kmcg_config_load(kmcg_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "cfg");
    need(path, "path");
    kmcg::load_config_file(cfg->cfg, path);
  });
}

kmcg_status kmcg_config_set(kmcg_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

kmcg_status kmcg_config_get(const kmcg_config* cfg, const char* key, char** value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    *value = dup_string(cfg->cfg.get(key));
  });
}

kmcg_status kmcg_config_text(const kmcg_config* cfg, char** text) {
  return guarded([&] {
    need(cfg, "cfg");
    need(text, "text");
    *text = dup_string(kmcg::config_text(cfg->cfg));
  });
}

size_t kmcg_config_key_count(void) { return kmcg::config_keys().size(); }

kmcg_status kmcg_config_key_info(size_t index, const char** name, const char** help) {
  return guarded([&] {
    const auto& keys = kmcg::config_keys();
    kmcg::require(index < keys.size(), kmcg::ErrorKind::usage, "config key index out of range");
    if (name) *name = keys[index].name.c_str();
    if (help) *help = keys[index].help.c_str();
  });
}

kmcg_status kmcg_cmd_synth(const kmcg_config* cfg, int force) {
  return guarded([&] {
    need(cfg, "cfg");
    kmcg::cmd_synth(cfg->cfg, force != 0, logger());
  });
}

kmcg_status kmcg_cmd_train(const kmcg_config* cfg, const char* domain, int force) {
  return guarded([&] {
    need(cfg, "cfg");
    need(domain, "domain");
    kmcg::cmd_train(cfg->cfg, domain, force != 0, logger());
  });
}

kmcg_status kmcg_cmd_transfer(const kmcg_config* cfg, const char* source_path,
                              const char* source_domain, const char* target_domain,
                              const char* output_path, int force) {
  return guarded([&] {
    need(cfg, "cfg");
    need(source_path, "source_path");
    need(source_domain, "source_domain");
    need(target_domain, "target_domain");
    need(output_path, "output_path");
    kmcg::cmd_transfer(cfg->cfg, source_path, source_domain, target_domain, output_path,
                       force != 0, logger());
  });
}

kmcg_status kmcg_cmd_transfer_dir(const kmcg_config* cfg, const char* source_dir,
                                  const char* source_domain, const char* target_domain,
                                  const char* output_dir, int force) {
  return guarded([&] {
    need(cfg, "cfg");
    need(source_dir, "source_dir");
    need(source_domain, "source_domain");
    need(target_domain, "target_domain");
    need(output_dir, "output_dir");
    kmcg::cmd_transfer_dir(cfg->cfg, source_dir, source_domain, target_domain, output_dir,
                           force != 0, logger());
  });
}

kmcg_status kmcg_cmd_cycle(const kmcg_config* cfg, const char* domain_a, const char* domain_b,
                           int force, char** report_text) {
  return guarded([&] {
    need(cfg, "cfg");
    need(domain_a, "domain_a");
    need(domain_b, "domain_b");
    const auto report = kmcg::cmd_cycle(cfg->cfg, domain_a, domain_b, force != 0, logger());
    if (report_text) *report_text = dup_string(kmcg::render_text(report));
  });
}

kmcg_status kmcg_cmd_evaluate(const kmcg_config* cfg, const char* outputs_dir,
                              const char* real_dir, const char* source_dir, int force,
                              char** report_text) {
  return guarded([&] {
    need(cfg, "cfg");
    need(outputs_dir, "outputs_dir");
    need(real_dir, "real_dir");
    need(source_dir, "source_dir");
    const auto report =
        kmcg::cmd_evaluate(cfg->cfg, outputs_dir, real_dir, source_dir, force != 0, logger());
    if (report_text) *report_text = dup_string(kmcg::render_text(report));
  });
}

kmcg_status kmcg_cmd_keyframes(const kmcg_config* cfg, const char* motion_path, char** text) {
  return guarded([&] {
    need(cfg, "cfg");
    need(motion_path, "motion_path");
    need(text, "text");
    *text = dup_string(kmcg::cmd_keyframes(cfg->cfg, motion_path));
  });
}

kmcg_status kmcg_motion_load(const char* path, kmcg_motion** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto m = std::make_unique<kmcg_motion>();
    m->clip = kmcg::load_motion(path);
    *out = m.release();
  });
}

void kmcg_motion_free(kmcg_motion* motion) { delete motion; }

kmcg_status kmcg_motion_save(const kmcg_motion* motion, const char* path) {
  return guarded([&] {
    need(motion, "motion");
    need(path, "path");
    kmcg::save_motion(motion->clip.motion, motion->clip.cond, path);
  });
}

kmcg_status kmcg_motion_shape(const kmcg_motion* motion, size_t* frames, size_t* dims) {
  return guarded([&] {
    need(motion, "motion");
    if (frames) *frames = static_cast<size_t>(motion->clip.motion.frames.rows());
    if (dims) *dims = static_cast<size_t>(motion->clip.motion.frames.cols());
  });
}

kmcg_status kmcg_motion_frames(const kmcg_motion* motion, double* out, size_t count) {
  return guarded([&] {
    need(motion, "motion");
    need(out, "out");
    const auto& f = motion->clip.motion.frames;
    kmcg::require(count == static_cast<size_t>(f.size()), kmcg::ErrorKind::usage,
                  "buffer size does not match frames x dims");
    for (kmcg::Index i = 0; i < f.rows(); ++i)
      for (kmcg::Index j = 0; j < f.cols(); ++j) *out++ = f(i, j);
  });
}

const char* kmcg_motion_domain(const kmcg_motion* motion) {
  return motion ? motion->clip.motion.domain.c_str() : nullptr;
}

kmcg_status kmcg_model_load(const char* path, kmcg_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto m = std::make_unique<kmcg_model>();
    m->model = std::make_shared<kmcg::DomainModel>(kmcg::load_checkpoint(path));
    *out = m.release();
  });
}

void kmcg_model_free(kmcg_model* model) { delete model; }

const char* kmcg_model_domain(const kmcg_model* model) {
  return model ? model->model->domain.c_str() : nullptr;
}

kmcg_status kmcg_transfer(const kmcg_config* cfg, const kmcg_model* source,
                          const kmcg_model* target, const kmcg_motion* input,
                          kmcg_motion** output) {
  return guarded([&] {
    need(cfg, "cfg");
    need(source, "source");
    need(target, "target");
    need(input, "input");
    need(output, "output");
    cfg->cfg.validate();
    const auto req = kmcg::make_transfer_request(cfg->cfg, input->clip, source->model,
                                                 target->model, "");
    auto m = std::make_unique<kmcg_motion>();
    m->clip.motion = kmcg::transfer(req).target;
    m->clip.cond = input->clip.cond;
    *output = m.release();
  });
}

}  // extern "C"

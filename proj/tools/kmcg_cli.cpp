// Command-line front end. Talks to the library only through kmcg.h.
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kmcg/kmcg.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code(kmcg_status s) {
  switch (s) {
    case KMCG_OK: return kExitOk;
    case KMCG_ERR_USAGE: return kExitUsage;
    case KMCG_ERR_NUMERICAL: return kExitNumerical;
    case KMCG_ERR_DATA:
    case KMCG_ERR_IO:
    case KMCG_ERR_INTERNAL: return kExitData;
  }
  return kExitData;
}

void log_to_stderr(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

struct Config {
  kmcg_config* handle = nullptr;
  Config() {
    if (kmcg_config_new(&handle) != KMCG_OK) std::abort();
  }
  ~Config() { kmcg_config_free(handle); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
};

// Adds `--<key>` for every config key to `cmd`, collecting given values.
void add_key_options(CLI::App* cmd, std::map<std::string, std::string>& values) {
  const size_t n = kmcg_config_key_count();
  for (size_t i = 0; i < n; ++i) {
    const char* name = nullptr;
    const char* help = nullptr;
    kmcg_config_key_info(i, &name, &help);
    if (std::string(name) == "seed") continue;  // global --seed
    cmd->add_option("--" + std::string(name), values[name], help)->group("Config keys");
  }
}

void print_text(char* text) {
  if (!text) return;
  std::fputs(text, stdout);
  kmcg_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion style transfer with diffusion bridges and keyframe guidance"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string seed;
  bool force = false;
  app.add_option("--config", config_path, "config file of 'key = value' lines")
      ->envname("KMCG_CONFIG");
  app.add_option("--seed", seed, "run seed (u64)");
  app.add_flag("--force", force, "overwrite existing outputs");

  std::map<std::string, std::string> keys;

  auto* synth = app.add_subcommand("synth", "write synthetic datasets, one directory per style");

  auto* train = app.add_subcommand("train", "train one model per domain");
  std::vector<std::string> train_domains;
  train->add_option("domains", train_domains, "domain names under paths.data_dir")->required();

  auto* xfer = app.add_subcommand("transfer", "transfer motion from one domain to another");
  std::string source, source_dir, from, to, output, output_dir, mode;
  auto* src_opt = xfer->add_option("--source", source, "source motion file");
  auto* src_dir_opt = xfer->add_option("--source-dir", source_dir, "directory with a manifest.txt");
  src_opt->excludes(src_dir_opt);
  xfer->add_option("--from", from, "source domain")->required();
  xfer->add_option("--to", to, "target domain")->required();
  auto* out_opt = xfer->add_option("--output", output, "output motion file (with --source)");
  auto* out_dir_opt = xfer->add_option("--output-dir", output_dir, "output directory (with --source-dir)");
  src_opt->needs(out_opt);
  src_dir_opt->needs(out_dir_opt);
  xfer->add_option("--mode", mode, "vanilla, gradient or explicit (same as --transfer.mode)");

  auto* cycle = app.add_subcommand("cycle", "cycle-consistency report for a domain pair");
  std::string cycle_a, cycle_b, samples;
  cycle->add_option("--from", cycle_a, "domain whose sequences are cycled")->required();
  cycle->add_option("--to", cycle_b, "intermediate domain")->required();
  cycle->add_option("--samples", samples, "number of sequences (same as --cycle.samples)");
  cycle->add_option("--mode", mode, "vanilla, gradient or explicit");

  auto* eval = app.add_subcommand("evaluate", "motion and pose distances of transfer outputs");
  std::string outputs, real, sources;
  eval->add_option("--outputs", outputs, "transfer output directory (or one subdirectory per mode)")
      ->required();
  eval->add_option("--real", real, "real target-domain dataset")->required();
  eval->add_option("--sources", sources, "source dataset the outputs were made from")->required();

  auto* kf = app.add_subcommand("keyframes", "print the keyframes of a motion file");
  std::string kf_file;
  kf->add_option("file", kf_file, "motion file")->required();

  for (auto* cmd : {synth, train, xfer, cycle, eval, kf}) add_key_options(cmd, keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  kmcg_set_log(log_to_stderr, nullptr);
  Config cfg;
  auto check = [](kmcg_status s) {
    if (s != KMCG_OK) {
      std::fprintf(stderr, "kmcg: %s: %s\n", kmcg_status_name(s), kmcg_last_error());
      std::exit(exit_code(s));
    }
  };

  if (!config_path.empty()) check(kmcg_config_load(cfg.handle, config_path.c_str()));
  if (!seed.empty()) check(kmcg_config_set(cfg.handle, "seed", seed.c_str()));
  for (const auto* cmd : {synth, train, xfer, cycle, eval, kf}) {
    if (!cmd->parsed()) continue;
    for (const auto& [key, value] : keys)
      if (cmd->count("--" + key) > 0) check(kmcg_config_set(cfg.handle, key.c_str(), value.c_str()));
  }
  if (!mode.empty()) check(kmcg_config_set(cfg.handle, "transfer.mode", mode.c_str()));
  if (!samples.empty()) check(kmcg_config_set(cfg.handle, "cycle.samples", samples.c_str()));

  const int f = force ? 1 : 0;
  if (synth->parsed()) {
    check(kmcg_cmd_synth(cfg.handle, f));
  } else if (train->parsed()) {
    for (const auto& d : train_domains) check(kmcg_cmd_train(cfg.handle, d.c_str(), f));
  } else if (xfer->parsed()) {
    if (source.empty() && source_dir.empty()) {
      std::fprintf(stderr, "kmcg: transfer needs --source or --source-dir\n");
      return kExitUsage;
    }
    if (!source.empty())
      check(kmcg_cmd_transfer(cfg.handle, source.c_str(), from.c_str(), to.c_str(), output.c_str(), f));
    else
      check(kmcg_cmd_transfer_dir(cfg.handle, source_dir.c_str(), from.c_str(), to.c_str(),
                                  output_dir.c_str(), f));
  } else if (cycle->parsed()) {
    char* text = nullptr;
    check(kmcg_cmd_cycle(cfg.handle, cycle_a.c_str(), cycle_b.c_str(), f, &text));
    print_text(text);
  } else if (eval->parsed()) {
    char* text = nullptr;
    check(kmcg_cmd_evaluate(cfg.handle, outputs.c_str(), real.c_str(), sources.c_str(), f, &text));
    print_text(text);
  } else if (kf->parsed()) {
    char* text = nullptr;
    check(kmcg_cmd_keyframes(cfg.handle, kf_file.c_str(), &text));
    print_text(text);
  }
  return kExitOk;
}

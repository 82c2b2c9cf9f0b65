#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "kmcg/config.hpp"
#include "kmcg/report.hpp"

namespace kmcg {

using LogFn = std::function<void(const std::string&)>;

// Every command refuses to overwrite an existing output unless `force` is set.

/// One directory per style under data_dir, each with a manifest. All styles
/// share the run seed, so they render the same content tracks.
void cmd_synth(const RunConfig& cfg, bool force, const LogFn& log = {});

/// Trains one domain model from `source` alone.
DomainModel train_domain(const DataSource& source, const RunConfig& cfg, const LogFn& log = {});

/// Trains data_dir/<domain> into checkpoint_dir/<domain>.ckpt.
std::filesystem::path cmd_train(const RunConfig& cfg, const std::string& domain, bool force,
                                const LogFn& log = {});

std::filesystem::path checkpoint_path(const RunConfig& cfg, const std::string& domain);

/// Writes the transferred motion to `output` and the per-step trace to
/// <output stem>.diag.csv.
void cmd_transfer(const RunConfig& cfg, const std::filesystem::path& source,
                  const std::string& source_domain, const std::string& target_domain,
                  const std::filesystem::path& output, bool force, const LogFn& log = {});

/// Transfers every manifest entry of `source_dir` into `output_dir`, which gets
/// a manifest and a pairs.txt (`<source entry> <output entry>` per line).
void cmd_transfer_dir(const RunConfig& cfg, const std::filesystem::path& source_dir,
                      const std::string& source_domain, const std::string& target_domain,
                      const std::filesystem::path& output_dir, bool force, const LogFn& log = {});

/// Cycles the first cycle.samples sequences of data_dir/<a> through <b> and
/// writes report_dir/cycle_<a>_<b>.{txt,csv}.
TransferReport cmd_cycle(const RunConfig& cfg, const std::string& domain_a,
                         const std::string& domain_b, bool force, const LogFn& log = {});

/// `outputs_dir` holds pairs.txt itself (one mode, named after the directory)
/// or one subdirectory with a pairs.txt per mode. Writes report_dir/evaluate.{txt,csv}.
TransferReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& outputs_dir,
                            const std::filesystem::path& real_dir,
                            const std::filesystem::path& source_dir, bool force,
                            const LogFn& log = {});

/// One `index saliency` line per keyframe.
std::string cmd_keyframes(const RunConfig& cfg, const std::filesystem::path& motion_file);

/// Request carrying the sampler, guidance and mode settings of `cfg`. The
/// request seed derives from the run seed and the file name of `name`.
TransferRequest make_transfer_request(const RunConfig& cfg, const MotionClip& clip,
                                      std::shared_ptr<const DomainModel> src,
                                      std::shared_ptr<const DomainModel> tgt,
                                      const std::string& name);

/// `step,k,residual,alpha` CSV.
std::string diagnostics_csv(const std::vector<StepDiagnostics>& diagnostics);

}  // namespace kmcg

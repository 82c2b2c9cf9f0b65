#pragma once

#include <filesystem>
#include <string>

#include "kmcg/denoiser.hpp"
#include "kmcg/motion.hpp"

namespace kmcg {

// A trained per-domain model together with the standardization it was
// trained under.
struct DomainModel {
  std::string domain;
  DenoiserModel model;
  Normalizer normalizer;
};

inline constexpr char kCheckpointMagic[] = "KMCG01";
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Binary layout (all integers little-endian u32):
///   "KMCG01" | version byte | config length | config text |
///   repeated { name length | name | rank | dims... | float32 values (row-major) }
/// The tensor list is every model parameter in declaration order followed by
/// normalizer.mean and normalizer.scale.
std::string serialize_checkpoint(const DomainModel& dm);
DomainModel deserialize_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const DomainModel& dm, const std::filesystem::path& path);
DomainModel load_checkpoint(const std::filesystem::path& path);

/// Canonical `key=value` lines describing the model; also the config block.
std::string canonical_config_text(const DomainModel& dm);

}  // namespace kmcg

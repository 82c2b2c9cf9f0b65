#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kmcg/metrics.hpp"

namespace kmcg {

struct ModeScores {
  std::string mode;
  Index pairs = 0;
  double fmd = 0.0;  // outputs vs real target set
  double fpd = 0.0;  // outputs vs their sources
  bool fpd_fallback_ridge = false;
};

struct ReportInputs {
  std::string command;
  std::string config_text;  // digested into the report
  std::vector<ModeScores> modes;
  std::optional<double> source_fmd;  // untransferred sources vs real target set
  std::optional<CycleStats> cycle;
  std::vector<std::pair<std::string, std::string>> notes;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct TransferReport {
  std::vector<std::pair<std::string, std::string>> fields;  // ordered scalar lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// Deterministic aggregation. Throws a data error naming the missing metrics
/// when there are neither mode scores nor cycle statistics.
TransferReport build_report(const ReportInputs& in);

/// `key = value` lines, a blank line, then a fixed-width table.
std::string render_text(const TransferReport& report);
/// The per-pair table as CSV.
std::string render_csv(const TransferReport& report);

/// Writes <dir>/<stem>.txt and <dir>/<stem>.csv.
void write_report(const TransferReport& report, const std::filesystem::path& dir,
                  const std::string& stem);

/// 64-bit FNV-1a, lowercase hex.
std::string digest_hex(const std::string& text);

std::string format_number(double v);

}  // namespace kmcg

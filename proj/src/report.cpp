#include "kmcg/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

std::string digest_hex(const std::string& text) {
  return fmt::format("{:016x}", fnv1a(text));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6f}", v);
}

TransferReport build_report(const ReportInputs& in) {
  if (in.modes.empty() && !in.cycle) {
    fail(ErrorKind::data, "report has no metrics: missing fmd, fpd and cycle statistics");
  }
  for (const auto& m : in.modes) {
    require(std::isfinite(m.fmd) && m.fmd >= 0 && std::isfinite(m.fpd) && m.fpd >= 0,
            ErrorKind::numerical, fmt::format("mode '{}' has invalid distances", m.mode));
  }
  TransferReport r;
  r.fields.emplace_back("command", in.command);
  r.fields.emplace_back("config_digest", digest_hex(in.config_text));
  if (in.source_fmd) r.fields.emplace_back("fmd.source", format_number(*in.source_fmd));
  for (const auto& m : in.modes) {
    r.fields.emplace_back(fmt::format("fmd.{}", m.mode), format_number(m.fmd));
    r.fields.emplace_back(fmt::format("fpd.{}", m.mode), format_number(m.fpd));
    r.fields.emplace_back(fmt::format("pairs.{}", m.mode), std::to_string(m.pairs));
    if (m.fpd_fallback_ridge)
      r.fields.emplace_back(fmt::format("warning.{}", m.mode),
                            "too few salient poses; covariance ridge raised to 1e-3");
  }
  if (in.cycle) {
    r.fields.emplace_back("cycle.mean", format_number(in.cycle->mean));
    r.fields.emplace_back("cycle.std", format_number(in.cycle->std));
    r.fields.emplace_back("cycle.pairs", std::to_string(in.cycle->per_pair.size()));
  }
  for (const auto& n : in.notes) r.fields.push_back(n);
  r.columns = in.columns;
  r.rows = in.rows;
  for (const auto& row : r.rows)
    require(row.size() == r.columns.size(), ErrorKind::contract, "report row width mismatch");
  return r;
}

std::string render_text(const TransferReport& report) {
  std::string out;
  for (const auto& [k, v] : report.fields) out += fmt::format("{} = {}\n", k, v);
  if (report.columns.empty()) return out;
  std::vector<std::size_t> width(report.columns.size());
  for (std::size_t c = 0; c < width.size(); ++c) {
    width[c] = report.columns[c].size();
    for (const auto& row : report.rows) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) s += "  ";
      s += fmt::format("{:<{}}", cells[c], width[c]);
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  out += "\n" + line(report.columns);
  for (const auto& row : report.rows) out += line(row);
  return out;
}

std::string render_csv(const TransferReport& report) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) out += (c ? "," : "") + cells[c];
    out += "\n";
  };
  line(report.columns);
  for (const auto& row : report.rows) line(row);
  return out;
}

void write_report(const TransferReport& report, const std::filesystem::path& dir,
                  const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  for (const auto& [ext, text] : {std::pair{".txt", render_text(report)},
                                  std::pair{".csv", render_csv(report)}}) {
    const auto path = dir / (stem + ext);
    std::ofstream f(path, std::ios::binary);
    f << text;
    require(static_cast<bool>(f), ErrorKind::io, fmt::format("cannot write {}", path.string()));
  }
}

}  // namespace kmcg

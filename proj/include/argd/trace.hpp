#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "argd/checkpoint.hpp"
#include "argd/error.hpp"

namespace argd {

/// Shortest-round-trip decimal rendering; stable across reruns so CSV
/// output is byte-reproducible.
inline std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

/// One per-step, per-layer training record.
struct TraceRow {
  std::size_t step = 0;
  std::size_t layer_id = 0;
  std::size_t rank = 0;
  double eta_ratio = 0.0;
  double grad_fnorm = 0.0;
  double proj_grad_fnorm = 0.0;
  bool refresh_flag = false;
  double loss = 0.0;
};

/// Minimal CSV assembler. Rows are rendered immediately; the file gets a
/// header row first and a `# config_hash=...` comment last, written
/// atomically (temp + rename).
class CsvWriter {
public:
  explicit CsvWriter(std::string header) : header_(std::move(header)) {}

  void add_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) line.push_back(',');
      line += fields[i];
    }
    lines_.push_back(std::move(line));
  }

  std::size_t row_count() const { return lines_.size(); }

  void write(const std::filesystem::path& path, std::uint64_t config_hash) const {
    std::string out = header_;
    out.push_back('\n');
    for (const std::string& line : lines_) {
      out += line;
      out.push_back('\n');
    }
    char tail[64];
    std::snprintf(tail, sizeof(tail), "# config_hash=%016llx\n",
                  static_cast<unsigned long long>(config_hash));
    out += tail;
    detail::atomic_write_file(path, out);
  }

private:
  std::string header_;
  std::vector<std::string> lines_;
};

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<TraceRow>& rows, std::uint64_t config_hash) {
  CsvWriter csv("step,layer_id,rank,eta_ratio,grad_fnorm,proj_grad_fnorm,refresh_flag,loss");
  for (const TraceRow& r : rows) {
    csv.add_row({std::to_string(r.step), std::to_string(r.layer_id), std::to_string(r.rank),
                 format_double(r.eta_ratio), format_double(r.grad_fnorm),
                 format_double(r.proj_grad_fnorm), r.refresh_flag ? "1" : "0",
                 format_double(r.loss)});
  }
  csv.write(path, config_hash);
}

}  // namespace argd

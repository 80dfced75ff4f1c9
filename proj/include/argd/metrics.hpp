#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "argd/error.hpp"

namespace argd::metrics {

/// Per-layer rank history plus the fixed rank it is compared against.
struct LayerTrace {
  std::size_t layer_id = 0;
  std::size_t in_dim = 0;   // d_j
  std::size_t out_dim = 0;  // d_{j+1}
  std::vector<std::size_t> rank_series;
  std::size_t baseline_rank = 1;

  void validate() const {
    if (rank_series.empty()) {
      throw Error(ErrorCode::invalid_argument, "layer trace: empty rank series");
    }
    for (std::size_t r : rank_series) {
      if (r < 1) throw Error(ErrorCode::invalid_argument, "layer trace: rank < 1");
    }
    if (baseline_rank < 1) {
      throw Error(ErrorCode::invalid_argument, "layer trace: baseline rank < 1");
    }
  }
};

/// Time-averaged rank of one layer: (sum_t R_t) / T.
inline double layer_effective_rank(const LayerTrace& trace) {
  trace.validate();
  double sum = 0.0;
  for (std::size_t r : trace.rank_series) sum += static_cast<double>(r);
  return sum / static_cast<double>(trace.rank_series.size());
}

inline constexpr const char* kWeightedAvgRankFormula =
    "sum_j sum_t R_t^j * (d_j + d_{j+1}) / (T * sum_j d_j * d_{j+1})";

/// Dimension-weighted average rank across layers, evaluated exactly as the
/// formula string above (note the product weights in the denominator).
inline double total_weighted_avg_rank(const std::vector<LayerTrace>& traces) {
  if (traces.empty()) {
    throw Error(ErrorCode::invalid_argument, "total_weighted_avg_rank: no traces");
  }
  const std::size_t steps = traces.front().rank_series.size();
  double numerator = 0.0;
  double denominator = 0.0;
  for (const LayerTrace& trace : traces) {
    trace.validate();
    if (trace.rank_series.size() != steps) {
      throw Error(ErrorCode::invalid_argument,
                  "total_weighted_avg_rank: layer " + std::to_string(trace.layer_id) +
                      " trace length differs");
    }
    const double dims_sum = static_cast<double>(trace.in_dim + trace.out_dim);
    for (std::size_t r : trace.rank_series) numerator += static_cast<double>(r) * dims_sum;
    denominator += static_cast<double>(trace.in_dim) * static_cast<double>(trace.out_dim);
  }
  return numerator / (static_cast<double>(steps) * denominator);
}

/// Optimizer-state elements saved versus the fixed-rank baseline:
/// (baseline - average rank) * (d_j + d_{j+1}). Negative when adaptivity
/// backfired; reported as-is.
inline double memory_reduction(const LayerTrace& trace) {
  trace.validate();
  const double adaptive = layer_effective_rank(trace);
  return (static_cast<double>(trace.baseline_rank) - adaptive) *
         static_cast<double>(trace.in_dim + trace.out_dim);
}

inline double total_memory_reduction(const std::vector<LayerTrace>& traces) {
  double total = 0.0;
  for (const LayerTrace& trace : traces) total += memory_reduction(trace);
  return total;
}

inline constexpr double kBytesPerElementBf16 = 2.0;

enum class Method { adarankgrad, galore, lora, full };

/// Optimizer-state element counts per method for a weight W in R^{n x m}
/// with n >= m. The rank argument is the adaptive average for adarankgrad
/// and the fixed rank otherwise; full ignores it (Adam keeps M and V).
inline double optimizer_state_elements(std::size_t n, std::size_t m, double rank,
                                       Method method) {
  if (n < m) {
    throw Error(ErrorCode::invalid_argument,
                "optimizer_state_elements: convention requires n >= m");
  }
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  switch (method) {
    case Method::adarankgrad:
    case Method::galore:
      return dn * rank + 2.0 * dm * rank;
    case Method::lora:
      return 2.0 * dn * rank + 2.0 * dm * rank;
    case Method::full:
      return 2.0 * dn * dm;
  }
  throw Error(ErrorCode::internal, "optimizer_state_elements: unknown method");
}

/// Per-layer and total accounting as an ordered JSON document.
inline nlohmann::ordered_json summary_json(const std::vector<LayerTrace>& traces) {
  nlohmann::ordered_json doc;
  doc["layers"] = nlohmann::ordered_json::array();
  for (const LayerTrace& trace : traces) {
    const double eff = layer_effective_rank(trace);
    const double red = memory_reduction(trace);
    nlohmann::ordered_json layer;
    layer["layer_id"] = trace.layer_id;
    layer["dims"] = {trace.in_dim, trace.out_dim};
    layer["effective_rank"] = eff;
    layer["baseline_rank"] = trace.baseline_rank;
    layer["mem_reduction_elements"] = red;
    layer["mem_reduction_bytes_bf16"] = red * kBytesPerElementBf16;
    doc["layers"].push_back(layer);
  }
  const double total = total_memory_reduction(traces);
  doc["total_weighted_avg_rank"] = total_weighted_avg_rank(traces);
  doc["total_weighted_avg_rank_formula"] = kWeightedAvgRankFormula;
  doc["total_mem_reduction_elements"] = total;
  doc["total_mem_reduction_bytes_bf16"] = total * kBytesPerElementBf16;
  return doc;
}

}  // namespace argd::metrics

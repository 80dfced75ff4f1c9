#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "argd/linalg.hpp"
#include "argd/lowrank.hpp"
#include "argd/matrix.hpp"
#include "argd/rng.hpp"

namespace argd::dyn {

/// The structured gradient system G(W) = (1/N) sum_i (A_i - B_i W C_i) with
/// PSD B_i, C_i, iterated under W_t = W_{t-1} + alpha * G_{t-1}.
struct DynamicsSystem {
  std::vector<Matrix> a_list;  // n x m
  std::vector<Matrix> b_list;  // n x n, symmetric PSD
  std::vector<Matrix> c_list;  // m x m, symmetric PSD
  Matrix w0;                   // n x m
  double alpha = 0.0;

  void validate() const {
    if (a_list.empty() || a_list.size() != b_list.size() || a_list.size() != c_list.size()) {
      throw Error(ErrorCode::invalid_argument, "dynamics: term lists must share length >= 1");
    }
    if (!(alpha > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "dynamics: step size must be > 0");
    }
    const std::size_t n = w0.rows(), m = w0.cols();
    for (std::size_t i = 0; i < a_list.size(); ++i) {
      if (a_list[i].rows() != n || a_list[i].cols() != m ||
          b_list[i].rows() != n || b_list[i].cols() != n ||
          c_list[i].rows() != m || c_list[i].cols() != m) {
        throw Error(ErrorCode::invalid_argument,
                    "dynamics: term " + std::to_string(i) + " shape mismatch");
      }
      for (const Matrix* s : {&b_list[i], &c_list[i]}) {
        const double asym = fro_norm(sub(*s, transpose(*s)));
        if (asym > 1e-10 * std::max(fro_norm(*s), 1.0)) {
          throw Error(ErrorCode::invalid_argument,
                      "dynamics: term " + std::to_string(i) + " not symmetric");
        }
        const std::vector<double> eigs = sym_eigvals(*s);
        if (eigs.front() < -1e-10) {
          throw Error(ErrorCode::invalid_argument,
                      "dynamics: term " + std::to_string(i) + " not PSD, min eigenvalue " +
                          std::to_string(eigs.front()));
        }
      }
    }
  }
};

struct SimStep {
  Matrix w;
  Matrix g;
  double kappa = 0.0;        // 0 when the gradient vanished
  double stable_rank = 0.0;  // 0 when the gradient vanished
};

struct SimTrace {
  std::vector<SimStep> steps;
  bool halted_early = false;  // gradient norm fell below 1e-14
};

inline Matrix gradient_at(const DynamicsSystem& sys, const Matrix& w) {
  Matrix g(w.rows(), w.cols());
  for (std::size_t i = 0; i < sys.a_list.size(); ++i) {
    g = add(g, sub(sys.a_list[i], matmul(sys.b_list[i], matmul(w, sys.c_list[i]))));
  }
  return scale(g, 1.0 / static_cast<double>(sys.a_list.size()));
}

/// Iterates the recursion for `steps` steps, recording W_t, G_t, kappa and
/// stable rank at each. Halts early (flagged) once ||G||_F < 1e-14; throws
/// on divergence past 1e12.
inline SimTrace simulate(const DynamicsSystem& sys, std::size_t steps) {
  sys.validate();
  if (steps < 1) throw Error(ErrorCode::invalid_argument, "simulate: steps must be >= 1");
  SimTrace trace;
  trace.steps.reserve(steps);
  Matrix w = sys.w0;
  for (std::size_t t = 0; t < steps; ++t) {
    SimStep rec;
    rec.w = w;
    rec.g = gradient_at(sys, w);
    const double gnorm = fro_norm(rec.g);
    if (gnorm > 1e12) {
      throw Error(ErrorCode::numeric,
                  "simulate: gradient diverged at step " + std::to_string(t) +
                      " (||G||_F = " + std::to_string(gnorm) + "); reduce alpha");
    }
    if (gnorm > 0.0) {
      rec.kappa = lowrank::kappa(rec.g);
      rec.stable_rank = lowrank::stable_rank(rec.g);
    }
    const bool halt = gnorm < 1e-14;
    w = add(w, scale(rec.g, sys.alpha));
    trace.steps.push_back(std::move(rec));
    if (halt) {
      trace.halted_early = true;
      break;
    }
  }
  return trace;
}

/// Coupling matrix S = (1/N) sum_i C_i kron B_i; under column-stacking
/// vectorization, vec(G_{t+1}) = (I - alpha * S) vec(G_t).
inline Matrix build_coupling_matrix(const DynamicsSystem& sys) {
  Matrix s = kron(sys.c_list[0], sys.b_list[0]);
  for (std::size_t i = 1; i < sys.c_list.size(); ++i) {
    s = add(s, kron(sys.c_list[i], sys.b_list[i]));
  }
  return scale(s, 1.0 / static_cast<double>(sys.c_list.size()));
}

struct DecayReport {
  double lambda1 = 0.0;          // two smallest distinct eigenvalues of S
  double lambda2 = 0.0;
  double predicted_ratio = 0.0;  // (1 - alpha*lambda2) / (1 - alpha*lambda1)
  double measured_slope = 0.0;   // fitted per-step slope of ln kappa(t)
  std::vector<double> kappa_series;
  std::vector<double> sr_series;
};

namespace detail_dyn {

/// Indices of trace steps whose kappa is above the floor where the series
/// is numerically meaningful.
inline std::vector<std::size_t> eligible_steps(const SimTrace& trace) {
  std::vector<std::size_t> idx;
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    if (trace.steps[t].kappa > 1e-13) idx.push_back(t);
  }
  return idx;
}

/// Fit window: the last 60% of the eligible steps, past the transient.
inline std::vector<std::size_t> tail_window(const SimTrace& trace) {
  std::vector<std::size_t> idx = eligible_steps(trace);
  const std::size_t keep = (idx.size() * 3 + 4) / 5;  // ceil(0.6 * size)
  return std::vector<std::size_t>(idx.end() - static_cast<std::ptrdiff_t>(keep), idx.end());
}

inline std::pair<double, double> two_smallest_distinct(const std::vector<double>& eigs) {
  const double spectral = std::max(std::abs(eigs.front()), std::abs(eigs.back()));
  const double gap_tol = 1e-8 * spectral;
  const double lambda1 = eigs.front();
  for (double e : eigs) {
    if (e - lambda1 > gap_tol) return {lambda1, e};
  }
  throw Error(ErrorCode::numeric,
              "decay analysis: no two distinct eigenvalues (gap tolerance " +
                  std::to_string(gap_tol) + "); the decay bound is vacuous");
}

}  // namespace detail_dyn

/// Pairs the spectral prediction (from S's two smallest distinct
/// eigenvalues) with the measured ln-kappa slope fitted by least squares
/// over the tail window. Requires >= 50 usable kappa samples.
inline DecayReport analyze(const DynamicsSystem& sys, const SimTrace& trace) {
  sys.validate();
  DecayReport report;
  for (const SimStep& s : trace.steps) {
    report.kappa_series.push_back(s.kappa);
    report.sr_series.push_back(s.stable_rank);
  }

  const std::vector<double> eigs = sym_eigvals(build_coupling_matrix(sys));
  const auto [lambda1, lambda2] = detail_dyn::two_smallest_distinct(eigs);
  report.lambda1 = lambda1;
  report.lambda2 = lambda2;
  report.predicted_ratio = (1.0 - sys.alpha * lambda2) / (1.0 - sys.alpha * lambda1);

  const std::vector<std::size_t> eligible = detail_dyn::eligible_steps(trace);
  if (eligible.size() < 50) {
    throw Error(ErrorCode::invalid_argument,
                "analyze: need >= 50 steps with kappa > 1e-13, have " +
                    std::to_string(eligible.size()));
  }
  const std::vector<std::size_t> window = detail_dyn::tail_window(trace);

  // Least-squares slope of ln kappa against the step index.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t t : window) {
    const double x = static_cast<double>(t);
    const double y = std::log(trace.steps[t].kappa);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double count = static_cast<double>(window.size());
  report.measured_slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return report;
}

/// Constants of the pointwise decay bound kappa(t) <= c1^(2(t-t0)) * c2:
/// c1 is the predicted ratio and c2 the energy split of vec(G_{t0}) between
/// the minimal eigenspace of S and its complement.
struct DecayBound {
  double c1 = 0.0;
  double c2 = 0.0;
  std::size_t t0 = 0;
};

inline DecayBound decay_bound(const DynamicsSystem& sys, const SimTrace& trace,
                              std::size_t t0 = 0) {
  sys.validate();
  if (t0 >= trace.steps.size()) {
    throw Error(ErrorCode::invalid_argument, "decay_bound: t0 outside trace");
  }
  const Matrix s = build_coupling_matrix(sys);
  const SymEig eig = sym_eig(s);
  const auto [lambda1, lambda2] = detail_dyn::two_smallest_distinct(eig.values);
  const double spectral = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  const double gap_tol = 1e-8 * spectral;

  const std::vector<double> g0 = vec_cols(trace.steps[t0].g);
  double par2 = 0.0, total2 = 0.0;
  for (double x : g0) total2 += x * x;
  for (std::size_t j = 0; j < eig.values.size(); ++j) {
    if (eig.values[j] - lambda1 <= gap_tol) {
      double dot = 0.0;
      for (std::size_t i = 0; i < g0.size(); ++i) dot += eig.vectors(i, j) * g0[i];
      par2 += dot * dot;
    }
  }
  if (par2 <= 0.0) {
    throw Error(ErrorCode::numeric,
                "decay_bound: G_{t0} has no component in the minimal eigenspace; "
                "the bound is vacuous");
  }
  DecayBound bound;
  bound.c1 = (1.0 - sys.alpha * lambda2) / (1.0 - sys.alpha * lambda1);
  bound.c2 = (total2 - par2) / par2;
  bound.t0 = t0;
  return bound;
}

/// Spectrum requests for the factory below; each list is cycled to fill the
/// matrix dimension. {1} yields the identity exactly.
struct SpectrumSpec {
  std::vector<double> b_eigs{1.0};
  std::vector<double> c_eigs{1.0};
};

/// Builds a deterministic system: B_i = Q_i Lambda Q_i^T with seeded random
/// orthogonal Q_i and the requested eigenvalues (C_i likewise), Gaussian
/// A_i and W_0.
inline DynamicsSystem make_system(std::size_t n, std::size_t m, std::size_t terms,
                                  const SpectrumSpec& spectrum, double alpha,
                                  std::uint64_t seed) {
  if (n < 1 || m < 1 || terms < 1) {
    throw Error(ErrorCode::invalid_argument, "make_system: dimensions must be >= 1");
  }
  if (spectrum.b_eigs.empty() || spectrum.c_eigs.empty()) {
    throw Error(ErrorCode::invalid_argument, "make_system: empty spectrum request");
  }
  for (double e : spectrum.b_eigs) {
    if (e < 0.0) throw Error(ErrorCode::invalid_argument, "make_system: negative B eigenvalue");
  }
  for (double e : spectrum.c_eigs) {
    if (e < 0.0) throw Error(ErrorCode::invalid_argument, "make_system: negative C eigenvalue");
  }

  auto psd_with_spectrum = [](std::size_t dim, const std::vector<double>& eigs,
                              std::uint64_t sub_seed) {
    bool all_equal = true;
    for (double e : eigs) all_equal = all_equal && e == eigs.front();
    if (all_equal) {
      return scale(Matrix::identity(dim), eigs.front());
    }
    const Matrix q = qr_orthonormal(gaussian_matrix(dim, dim, sub_seed));
    Matrix scaled = q;  // columns scaled by the cycled eigenvalues
    for (std::size_t j = 0; j < dim; ++j) {
      const double lambda = eigs[j % eigs.size()];
      for (std::size_t i = 0; i < dim; ++i) scaled(i, j) *= lambda;
    }
    Matrix s = matmul(scaled, transpose(q));
    // Symmetrize away the last-ulp asymmetry from the two matmuls.
    return scale(add(s, transpose(s)), 0.5);
  };

  DynamicsSystem sys;
  sys.alpha = alpha;
  sys.w0 = gaussian_matrix(n, m, mix_seed(seed, 0));
  for (std::size_t i = 0; i < terms; ++i) {
    sys.a_list.push_back(gaussian_matrix(n, m, mix_seed(seed, 100 + i)));
    sys.b_list.push_back(psd_with_spectrum(n, spectrum.b_eigs, mix_seed(seed, 200 + i)));
    sys.c_list.push_back(psd_with_spectrum(m, spectrum.c_eigs, mix_seed(seed, 300 + i)));
  }
  sys.validate();
  return sys;
}

}  // namespace argd::dyn

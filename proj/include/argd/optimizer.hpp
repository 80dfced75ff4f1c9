#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "argd/lowrank.hpp"
#include "argd/matrix.hpp"

namespace argd::optim {

enum class UpdateRule { adam, sgd };

/// When to leave the low-rank inner loop and reselect the subspace.
struct InnerExit {
  enum class Kind { adaptive, fixed_interval };
  Kind kind = Kind::adaptive;
  std::size_t interval = 200;  // updates per subspace in fixed_interval mode

  static InnerExit adaptive() { return {Kind::adaptive, 0}; }
  static InnerExit fixed(std::size_t k) { return {Kind::fixed_interval, k}; }
};

struct Hyperparams {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double eta_th = 0.3;     // allowed fraction of gradient energy lost to projection
  std::size_t r_init = 1;  // rank search lower bound (and the fixed rank, if fixed)
  std::size_t r_max = 8;
  double varsigma1 = 1e-3;  // outer gradient-norm exit threshold
  InnerExit inner_exit = InnerExit::adaptive();
  std::size_t max_inner_steps = 500;  // hard liveness cap per subspace; 0 = uncapped
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  // Per-coordinate cap on |m_hat / (sqrt(v_hat) + eps)|. The basis change
  // R*V can cancel second-moment mass that the first moment keeps, leaving
  // the Adam denominator near eps and the raw direction unbounded; the cap
  // only binds in that state (well-formed Adam streams stay below ~7).
  // 0 disables.
  double clip_update = 10.0;
  UpdateRule update_rule = UpdateRule::adam;
  lowrank::SubspaceMode subspace_mode = lowrank::SubspaceMode::ssrf;
  bool fixed_rank = false;                   // bypass the rank search entirely
  bool transform_moments_on_refresh = true;  // false carries moments across unchanged
  bool reset_step_on_refresh = false;        // restart bias correction at each refresh

  void validate() const {
    if (!(alpha > 0.0)) throw Error(ErrorCode::invalid_argument, "alpha must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw Error(ErrorCode::invalid_argument, "beta1, beta2 must lie in [0,1)");
    }
    if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be > 0");
    if (!(eta_th > 0.0 && eta_th < 1.0)) {
      throw Error(ErrorCode::invalid_argument, "eta_th must lie in (0,1)");
    }
    if (r_init < 1 || r_init > r_max) {
      throw Error(ErrorCode::invalid_argument, "need 1 <= r_init <= r_max");
    }
    if (!(varsigma1 > 0.0)) throw Error(ErrorCode::invalid_argument, "varsigma1 must be > 0");
    if (inner_exit.kind == InnerExit::Kind::fixed_interval && inner_exit.interval == 0) {
      throw Error(ErrorCode::invalid_argument, "fixed_interval needs interval >= 1");
    }
    if (weight_decay < 0.0) throw Error(ErrorCode::invalid_argument, "weight_decay must be >= 0");
    if (clip_update < 0.0) throw Error(ErrorCode::invalid_argument, "clip_update must be >= 0");
  }
};

/// Current orthonormal basis plus the bookkeeping for when it was adopted.
struct ProjectionState {
  Matrix q;                          // n x rank, orthonormal columns
  std::size_t rank = 0;
  std::size_t refreshed_at_step = 0;
  double ref_grad_fnorm = 0.0;       // ||G||_F recorded at the refresh
};

/// Per-layer optimizer state. One instance per weight matrix; step it
/// sequentially. Distinct layers are independent.
struct AdaRankGradState {
  std::optional<ProjectionState> projection;
  Matrix m;  // rank x m, projected first moment (empty before first refresh)
  Matrix v;  // rank x m, projected second moment, entrywise >= 0
  std::size_t t = 0;  // global update counter, drives bias correction
  std::size_t refresh_count = 0;
  Hyperparams hp;

  explicit AdaRankGradState(Hyperparams params) : hp(std::move(params)) { hp.validate(); }
};

struct StepEvents {
  bool converged = false;
  bool refreshed = false;
  std::size_t old_rank = 0;
  std::size_t new_rank = 0;
  double grad_fnorm = 0.0;
  double proj_grad_fnorm = 0.0;
  double eta_ratio = 0.0;  // energy fraction outside the current subspace
};

struct StepResult {
  Matrix w;
  AdaRankGradState state;
  StepEvents events;
};

/// Selects a fresh projection from the current gradient: the rank search
/// under hp's information threshold, or a fixed-rank basis when the rank
/// search is bypassed. Deterministic in (hp.seed, refresh_count).
inline ProjectionState select_subspace(const AdaRankGradState& state, const Matrix& g) {
  detail::require_nonempty(g, "select_subspace");
  const double gnorm = fro_norm(g);
  if (gnorm == 0.0) {
    throw Error(ErrorCode::invalid_argument, "select_subspace: zero gradient");
  }
  const Hyperparams& hp = state.hp;
  const std::uint64_t seed = mix_seed(hp.seed, state.refresh_count);
  const std::size_t limit = std::min(g.rows(), g.cols());

  ProjectionState next;
  if (hp.fixed_rank) {
    const std::size_t r = std::min(hp.r_init, limit);
    if (hp.subspace_mode == lowrank::SubspaceMode::ssrf) {
      next.q = lowrank::ssrf(g, r, seed).q;
    } else {
      next.q = prefix_cols(svd(g).u, r);
    }
  } else {
    const std::size_t hi = std::min(hp.r_max, limit);
    const std::size_t lo = std::min(hp.r_init, hi);
    next.q = lowrank::iass(g, lo, hi, hp.eta_th, seed, hp.subspace_mode).basis;
  }
  next.rank = next.q.cols();
  next.refreshed_at_step = state.t;
  next.ref_grad_fnorm = gnorm;
  return next;
}

struct MomentPair {
  Matrix m;
  Matrix v;
};

/// Re-expresses the stored moments in a new basis via R = q_new^T q_old.
/// R is a contraction between orthonormal bases, so moment norms never
/// grow; v is clamped at zero entrywise because R can turn nonnegative
/// entries negative and v feeds a square root. The first call (no previous
/// basis) yields zero moments of the new shape.
inline MomentPair transform_moments(const AdaRankGradState& state, const Matrix& q_new,
                                    std::size_t weight_cols) {
  detail::require_nonempty(q_new, "transform_moments");
  if (!state.projection.has_value() || state.m.empty()) {
    return {Matrix(q_new.cols(), weight_cols), Matrix(q_new.cols(), weight_cols)};
  }
  const Matrix& q_old = state.projection->q;
  if (q_new.rows() != q_old.rows()) {
    throw Error(ErrorCode::invalid_argument,
                "transform_moments: basis row counts differ, " +
                    std::to_string(q_new.rows()) + " vs " + std::to_string(q_old.rows()));
  }
  if (state.m.cols() != weight_cols) {
    throw Error(ErrorCode::invalid_argument, "transform_moments: moment column mismatch");
  }
  const Matrix r = matmul(transpose(q_new), q_old);
  return {matmul(r, state.m), elem_max(matmul(r, state.v), 0.0)};
}

/// One projected Adam update. Expects the step counter already advanced
/// (the first update runs with t = 1); moments may be empty, meaning zero.
inline StepResult adam_step(const AdaRankGradState& state, const Matrix& g_hat,
                            const Matrix& w) {
  if (state.t == 0) {
    throw Error(ErrorCode::invalid_argument,
                "adam_step: t = 0 would divide by zero in bias correction");
  }
  if (!state.projection.has_value()) {
    throw Error(ErrorCode::invalid_argument, "adam_step: no projection selected");
  }
  const ProjectionState& proj = *state.projection;
  if (g_hat.rows() != proj.rank) {
    throw Error(ErrorCode::invalid_argument,
                "adam_step: projected gradient rows " + std::to_string(g_hat.rows()) +
                    " do not match projection rank " + std::to_string(proj.rank));
  }
  const Hyperparams& hp = state.hp;

  StepResult out{w, state, {}};
  Matrix& m = out.state.m;
  Matrix& v = out.state.v;
  if (m.empty()) m = Matrix(g_hat.rows(), g_hat.cols());
  if (v.empty()) v = Matrix(g_hat.rows(), g_hat.cols());

  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  Matrix direction(g_hat.rows(), g_hat.cols());
  for (std::size_t i = 0; i < g_hat.size(); ++i) {
    const double ghat = g_hat.data()[i];
    double& mi = m.data()[i];
    double& vi = v.data()[i];
    mi = hp.beta1 * mi + (1.0 - hp.beta1) * ghat;
    vi = hp.beta2 * vi + (1.0 - hp.beta2) * ghat * ghat;
    if (vi < 0.0) vi = 0.0;
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    double dir = mhat / (std::sqrt(vhat) + hp.epsilon);
    if (hp.clip_update > 0.0) dir = std::clamp(dir, -hp.clip_update, hp.clip_update);
    direction.data()[i] = dir;
  }
  direction.check_finite();

  out.w = sub(w, scale(matmul(proj.q, direction), hp.alpha));
  if (hp.weight_decay > 0.0) {
    out.w = sub(out.w, scale(w, hp.alpha * hp.weight_decay));
  }
  return out;
}

namespace detail_step {

inline bool inner_exit_fired(const AdaRankGradState& state, double proj_grad_fnorm) {
  const ProjectionState& proj = *state.projection;
  const Hyperparams& hp = state.hp;
  const std::size_t inner_steps = state.t - proj.refreshed_at_step;
  bool fired = false;
  if (hp.inner_exit.kind == InnerExit::Kind::adaptive) {
    const double varsigma2 = std::sqrt(1.0 - hp.eta_th) * proj.ref_grad_fnorm;
    fired = proj_grad_fnorm <= varsigma2;
  } else {
    fired = inner_steps >= hp.inner_exit.interval;
  }
  if (hp.max_inner_steps > 0 && inner_steps >= hp.max_inner_steps) fired = true;
  return fired;
}

}  // namespace detail_step

/// One full optimizer step on gradient g and weights w:
///   (a) outer convergence test ||g||_F <= varsigma1;
///   (b) subspace refresh (rank search + moment transform) when the inner
///       exit condition fires on this gradient's projection, or when no
///       projection exists yet;
///   (c) project the gradient;
///   (d) the update (Adam, or plain projected descent in sgd mode).
inline StepResult step(const AdaRankGradState& state, const Matrix& g, const Matrix& w) {
  detail::require_same_shape(g, w, "step");
  StepResult out{w, state, {}};
  StepEvents& ev = out.events;
  ev.grad_fnorm = fro_norm(g);

  if (ev.grad_fnorm <= state.hp.varsigma1) {
    ev.converged = true;
    if (state.projection.has_value()) {
      ev.new_rank = ev.old_rank = state.projection->rank;
    }
    return out;
  }

  AdaRankGradState& s = out.state;
  Matrix g_hat;
  bool refresh = !s.projection.has_value();
  if (s.projection.has_value()) {
    if (s.projection->q.rows() != g.rows()) {
      throw Error(ErrorCode::invalid_argument, "step: projection does not match gradient shape");
    }
    g_hat = matmul(transpose(s.projection->q), g);
    refresh = detail_step::inner_exit_fired(s, fro_norm(g_hat));
  }

  if (refresh) {
    ev.old_rank = s.projection.has_value() ? s.projection->rank : 0;
    if (s.hp.reset_step_on_refresh) s.t = 0;
    ProjectionState next = select_subspace(s, g);
    if (s.hp.transform_moments_on_refresh || !s.projection.has_value() ||
        next.rank != s.projection->rank) {
      MomentPair moments = transform_moments(s, next.q, g.cols());
      s.m = std::move(moments.m);
      s.v = std::move(moments.v);
    }
    s.projection = std::move(next);
    s.refresh_count += 1;
    ev.refreshed = true;
    ev.new_rank = s.projection->rank;
    g_hat = matmul(transpose(s.projection->q), g);
  } else {
    ev.new_rank = ev.old_rank = s.projection->rank;
  }

  ev.proj_grad_fnorm = fro_norm(g_hat);
  const double gn2 = ev.grad_fnorm * ev.grad_fnorm;
  const double pn2 = ev.proj_grad_fnorm * ev.proj_grad_fnorm;
  ev.eta_ratio = std::clamp(1.0 - pn2 / gn2, 0.0, 1.0);

  s.t += 1;
  if (s.hp.update_rule == UpdateRule::adam) {
    StepResult updated = adam_step(s, g_hat, w);
    out.w = std::move(updated.w);
    out.state = std::move(updated.state);
  } else {
    out.w = sub(w, scale(matmul(s.projection->q, g_hat), s.hp.alpha));
  }
  return out;
}

/// Fixed-rank, fixed-interval configuration: the rank search is bypassed,
/// the subspace is refreshed every `interval` updates, and moments are
/// carried across refreshes untransformed.
inline Hyperparams galore_hyperparams(Hyperparams base, std::size_t rank, std::size_t interval) {
  base.fixed_rank = true;
  base.r_init = rank;
  base.r_max = rank;
  base.inner_exit = InnerExit::fixed(interval);
  base.transform_moments_on_refresh = false;
  base.validate();
  return base;
}

inline StepResult galore_step(const AdaRankGradState& state, const Matrix& g, const Matrix& w) {
  if (!state.hp.fixed_rank || state.hp.inner_exit.kind != InnerExit::Kind::fixed_interval) {
    throw Error(ErrorCode::invalid_argument,
                "galore_step: state not configured via galore_hyperparams");
  }
  return step(state, g, w);
}

/// Full-dimension state pinned to the identity basis and never refreshed;
/// with q = I the projected updates coincide with the unprojected ones.
inline AdaRankGradState make_full_rank_state(Hyperparams hp, std::size_t n) {
  hp.r_init = n;
  hp.r_max = n;
  hp.fixed_rank = true;
  hp.inner_exit = InnerExit::fixed(std::size_t(1) << 60);
  hp.max_inner_steps = 0;
  AdaRankGradState state(hp);
  ProjectionState proj;
  proj.q = Matrix::identity(n);
  proj.rank = n;
  proj.refreshed_at_step = 0;
  proj.ref_grad_fnorm = 0.0;
  state.projection = proj;
  state.refresh_count = 1;
  return state;
}

// ---- Unprojected baselines -------------------------------------------------

/// Textbook Adam on the full gradient; kept as an independent code path so
/// it can serve as a reference for the projected optimizer at full rank.
struct AdamBaselineState {
  Matrix m;
  Matrix v;
  std::size_t t = 0;
};

struct AdamBaselineResult {
  Matrix w;
  AdamBaselineState state;
};

inline AdamBaselineResult adam_baseline_step(const AdamBaselineState& state,
                                             const Hyperparams& hp, const Matrix& g,
                                             const Matrix& w) {
  detail::require_same_shape(g, w, "adam_baseline_step");
  AdamBaselineResult out{w, state};
  if (out.state.m.empty()) out.state.m = Matrix(g.rows(), g.cols());
  if (out.state.v.empty()) out.state.v = Matrix(g.rows(), g.cols());
  out.state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(out.state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(out.state.t));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g.data()[i];
    double& mi = out.state.m.data()[i];
    double& vi = out.state.v.data()[i];
    mi = hp.beta1 * mi + (1.0 - hp.beta1) * gi;
    vi = hp.beta2 * vi + (1.0 - hp.beta2) * gi * gi;
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    out.w.data()[i] = w.data()[i] - hp.alpha * (mhat / (std::sqrt(vhat) + hp.epsilon) +
                                                hp.weight_decay * w.data()[i]);
  }
  out.w.check_finite();
  return out;
}

inline Matrix sgd_baseline_step(double alpha, const Matrix& g, const Matrix& w) {
  detail::require_same_shape(g, w, "sgd_baseline_step");
  return sub(w, scale(g, alpha));
}

}  // namespace argd::optim

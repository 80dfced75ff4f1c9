#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "argd/adapter.hpp"
#include "argd/checkpoint.hpp"
#include "argd/config.hpp"
#include "argd/dynamics.hpp"
#include "argd/metrics.hpp"
#include "argd/network.hpp"
#include "argd/optimizer.hpp"
#include "argd/trace.hpp"

namespace argd::cli {

// Exit codes: 0 ok, 2 config error, 3 numerical divergence, 4 I/O or file
// format error, 5 internal invariant violation.
inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::invalid_argument: return 2;
    case ErrorCode::numeric: return 3;
    case ErrorCode::io: return 4;
    case ErrorCode::format: return 4;
    case ErrorCode::internal: return 5;
  }
  return 5;
}

/// Runs a command body, mapping errors to the exit-code contract.
template <typename Fn>
int guarded(Fn&& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 5;
  }
}

namespace detail_cli {

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  argd::detail::atomic_write_file(path, doc.dump(2) + "\n");
}

inline std::filesystem::path ensure_output_dir(const Config& config) {
  const std::filesystem::path dir = config.get_string("output.dir", "out");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::io, "cannot create output directory " + dir.string());
  }
  return dir;
}

inline net::NetworkSpec network_from_config(const Config& config, std::uint64_t seed) {
  net::NetworkSpec spec;
  const std::vector<std::size_t> dims = config.get_size_list("network.dims", {32, 32, 32, 8});
  spec.layer_dims = dims;
  const std::string act = config.get_string("network.activation", "relu");
  if (act == "relu") {
    spec.activation = net::Activation::relu;
  } else if (act == "leaky_relu") {
    spec.activation = net::Activation::leaky_relu;
  } else if (act == "identity") {
    spec.activation = net::Activation::identity;
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown activation: " + act);
  }
  spec.leaky_slope = config.get_double("network.leaky_slope", 0.01);
  const std::string loss = config.get_string("network.loss", "mse");
  if (loss == "mse") {
    spec.loss = net::LossKind::mse;
  } else if (loss == "cross_entropy") {
    spec.loss = net::LossKind::cross_entropy;
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown loss: " + loss);
  }
  spec.seed = seed;
  spec.validate();
  return spec;
}

inline net::SyntheticData data_from_config(const Config& config, const net::NetworkSpec& spec,
                                           std::uint64_t seed) {
  const std::string kind = config.get_string("data.kind", "lowrank_regression");
  const std::size_t n = static_cast<std::size_t>(config.get_int("data.batch_size", 256));
  const std::size_t in_dim = spec.layer_dims.front();
  const std::size_t out_dim = spec.layer_dims.back();
  if (kind == "lowrank_regression") {
    net::LowRankRegression reg;
    reg.target_rank = static_cast<std::size_t>(config.get_int("data.target_rank", 2));
    reg.noise_std = config.get_double("data.noise_std", 0.0);
    return net::make_synthetic(reg, in_dim, out_dim, n, seed);
  }
  if (kind == "classification") {
    net::Classification cls;
    cls.classes = static_cast<std::size_t>(config.get_int("data.classes", out_dim));
    cls.cluster_spread = config.get_double("data.cluster_spread", 0.3);
    return net::make_synthetic(cls, in_dim, out_dim, n, seed);
  }
  throw Error(ErrorCode::invalid_argument, "unknown data kind: " + kind);
}

inline optim::Hyperparams hyperparams_from_config(const Config& config, std::uint64_t seed) {
  optim::Hyperparams hp;
  hp.alpha = config.get_double("optimizer.alpha", 1e-3);
  hp.beta1 = config.get_double("optimizer.beta1", 0.9);
  hp.beta2 = config.get_double("optimizer.beta2", 0.999);
  hp.epsilon = config.get_double("optimizer.epsilon", 1e-8);
  hp.eta_th = config.get_double("optimizer.eta_th", 0.3);
  hp.r_init = static_cast<std::size_t>(config.get_int("optimizer.r_init", 1));
  hp.r_max = static_cast<std::size_t>(config.get_int("optimizer.r_max", 8));
  hp.varsigma1 = config.get_double("optimizer.varsigma1", 1e-3);
  const std::string exit = config.get_string("optimizer.inner_exit", "adaptive");
  if (exit == "adaptive") {
    hp.inner_exit = optim::InnerExit::adaptive();
  } else if (exit == "fixed") {
    hp.inner_exit = optim::InnerExit::fixed(
        static_cast<std::size_t>(config.get_int("optimizer.inner_interval", 200)));
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown inner_exit: " + exit);
  }
  hp.max_inner_steps = static_cast<std::size_t>(config.get_int("optimizer.max_inner_steps", 500));
  hp.weight_decay = config.get_double("optimizer.weight_decay", 0.0);
  hp.clip_update = config.get_double("optimizer.clip_update", hp.clip_update);
  hp.reset_step_on_refresh = config.get_bool("optimizer.reset_step_on_refresh", false);
  const std::string rule = config.get_string("optimizer.update_rule", "adam");
  if (rule == "adam") {
    hp.update_rule = optim::UpdateRule::adam;
  } else if (rule == "sgd") {
    hp.update_rule = optim::UpdateRule::sgd;
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown update_rule: " + rule);
  }
  const std::string mode = config.get_string("optimizer.subspace_mode", "ssrf");
  if (mode == "ssrf") {
    hp.subspace_mode = lowrank::SubspaceMode::ssrf;
  } else if (mode == "exact_svd") {
    hp.subspace_mode = lowrank::SubspaceMode::exact_svd;
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown subspace_mode: " + mode);
  }
  hp.seed = seed;
  hp.validate();
  return hp;
}

}  // namespace detail_cli

/// Outputs of one training run, exposed for in-process reuse by tests and
/// the comparison harness.
struct TrainResult {
  std::vector<TraceRow> trace;
  std::vector<Matrix> weights;
  std::vector<metrics::LayerTrace> layer_traces;
  double final_loss = 0.0;
  std::size_t steps_run = 0;
};

/// Full-batch training of the configured network with the configured
/// optimizer; deterministic given the config.
inline TrainResult run_train(const Config& config) {
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("experiment.seed", 42));
  const net::NetworkSpec spec = detail_cli::network_from_config(config, mix_seed(seed, 11));
  const net::SyntheticData data = detail_cli::data_from_config(config, spec, mix_seed(seed, 13));
  const std::size_t steps = static_cast<std::size_t>(config.get_int("run.steps", 1000));
  const std::string method = config.get_string("optimizer.method", "adarankgrad");

  std::vector<Matrix> weights = net::init_weights(spec);
  const std::size_t depth = weights.size();

  optim::Hyperparams base_hp = detail_cli::hyperparams_from_config(config, seed);
  const bool force_full_rank = config.get_bool("optimizer.force_full_rank", false);
  const std::size_t galore_rank =
      static_cast<std::size_t>(config.get_int("optimizer.galore_rank", 4));
  const std::size_t galore_interval =
      static_cast<std::size_t>(config.get_int("optimizer.galore_interval", 200));

  std::vector<optim::AdaRankGradState> proj_states;
  std::vector<optim::AdamBaselineState> adam_states(depth);
  const bool projected = method == "adarankgrad" || method == "galore";
  if (projected) {
    for (std::size_t j = 0; j < depth; ++j) {
      optim::Hyperparams hp = base_hp;
      hp.seed = mix_seed(seed, 1000 + j);
      if (method == "galore") {
        const std::size_t r = std::min(galore_rank, std::min(weights[j].rows(), weights[j].cols()));
        proj_states.push_back(
            optim::AdaRankGradState(optim::galore_hyperparams(hp, r, galore_interval)));
      } else if (force_full_rank) {
        proj_states.push_back(optim::make_full_rank_state(hp, weights[j].rows()));
      } else {
        proj_states.push_back(optim::AdaRankGradState(hp));
      }
    }
  } else if (method != "adam" && method != "sgd") {
    throw Error(ErrorCode::invalid_argument, "unknown optimizer method: " + method);
  }

  TrainResult result;
  std::vector<metrics::LayerTrace> layer_traces(depth);
  const std::size_t default_baseline = method == "galore" ? galore_rank : base_hp.r_max;
  for (std::size_t j = 0; j < depth; ++j) {
    layer_traces[j].layer_id = j;
    layer_traces[j].in_dim = spec.layer_dims[j];
    layer_traces[j].out_dim = spec.layer_dims[j + 1];
    layer_traces[j].baseline_rank = static_cast<std::size_t>(
        config.get_int("metrics.baseline_rank", static_cast<std::int64_t>(default_baseline)));
  }

  for (std::size_t step = 0; step < steps; ++step) {
    const net::Evaluation ev = net::evaluate(spec, weights, data.batch);
    result.final_loss = ev.loss;
    bool all_converged = projected;
    for (std::size_t j = 0; j < depth; ++j) {
      TraceRow row;
      row.step = step;
      row.layer_id = j;
      row.loss = ev.loss;
      row.grad_fnorm = fro_norm(ev.grads[j]);
      if (projected) {
        optim::StepResult sr = method == "galore"
                                   ? optim::galore_step(proj_states[j], ev.grads[j], weights[j])
                                   : optim::step(proj_states[j], ev.grads[j], weights[j]);
        weights[j] = std::move(sr.w);
        proj_states[j] = std::move(sr.state);
        row.rank = sr.events.converged
                       ? (proj_states[j].projection ? proj_states[j].projection->rank : 0)
                       : sr.events.new_rank;
        row.eta_ratio = sr.events.eta_ratio;
        row.proj_grad_fnorm = sr.events.proj_grad_fnorm;
        row.refresh_flag = sr.events.refreshed;
        all_converged = all_converged && sr.events.converged;
      } else {
        row.rank = std::min(weights[j].rows(), weights[j].cols());
        row.proj_grad_fnorm = row.grad_fnorm;
        if (method == "adam") {
          optim::AdamBaselineResult ar =
              optim::adam_baseline_step(adam_states[j], base_hp, ev.grads[j], weights[j]);
          weights[j] = std::move(ar.w);
          adam_states[j] = std::move(ar.state);
        } else {
          weights[j] = optim::sgd_baseline_step(base_hp.alpha, ev.grads[j], weights[j]);
        }
      }
      if (row.rank >= 1) layer_traces[j].rank_series.push_back(row.rank);
      result.trace.push_back(std::move(row));
    }
    result.steps_run = step + 1;
    if (all_converged) break;  // every layer is at the outer exit; nothing moves
  }

  result.weights = std::move(weights);
  result.layer_traces = std::move(layer_traces);
  return result;
}

inline int cmd_train(const std::filesystem::path& config_path) {
  return guarded([&] {
    Config config = Config::parse_file(config_path);
    config.apply_env_seed_override("experiment.seed");
    const std::filesystem::path out_dir = detail_cli::ensure_output_dir(config);
    const TrainResult result = run_train(config);

    write_trace_csv(out_dir / "trace.csv", result.trace, config.hash());
    for (std::size_t j = 0; j < result.weights.size(); ++j) {
      save_matrix(out_dir / ("layer_" + std::to_string(j) + ".argd"), result.weights[j]);
    }
    nlohmann::ordered_json summary = metrics::summary_json(result.layer_traces);
    summary["final_loss"] = result.final_loss;
    summary["steps_run"] = result.steps_run;
    detail_cli::write_json(out_dir / "metrics.json", summary);
    std::cout << "train: " << result.steps_run << " steps, final loss "
              << format_double(result.final_loss) << ", outputs in " << out_dir.string() << "\n";
  });
}

inline int cmd_dynamics(const std::filesystem::path& config_path) {
  return guarded([&] {
    Config config = Config::parse_file(config_path);
    config.apply_env_seed_override("dynamics.seed");
    const std::filesystem::path out_dir = detail_cli::ensure_output_dir(config);

    const std::size_t n = static_cast<std::size_t>(config.get_int("dynamics.n", 6));
    const std::size_t m = static_cast<std::size_t>(config.get_int("dynamics.m", 6));
    const std::size_t terms = static_cast<std::size_t>(config.get_int("dynamics.terms", 2));
    const double alpha = config.get_double("dynamics.alpha", 0.01);
    const std::size_t steps = static_cast<std::size_t>(config.get_int("dynamics.steps", 1500));
    const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("dynamics.seed", 7));
    dyn::SpectrumSpec spectrum;
    spectrum.b_eigs = config.get_double_list("dynamics.b_spectrum", {1.0, 2.0});
    spectrum.c_eigs = config.get_double_list("dynamics.c_spectrum", {1.0});

    const dyn::DynamicsSystem sys = dyn::make_system(n, m, terms, spectrum, alpha, seed);
    const dyn::SimTrace trace = dyn::simulate(sys, steps);
    const dyn::DecayReport report = dyn::analyze(sys, trace);

    CsvWriter csv("step,grad_fnorm,kappa,stable_rank");
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      const dyn::SimStep& s = trace.steps[t];
      csv.add_row({std::to_string(t), format_double(fro_norm(s.g)), format_double(s.kappa),
                   format_double(s.stable_rank)});
    }
    csv.write(out_dir / "dynamics_trace.csv", config.hash());

    nlohmann::ordered_json doc;
    doc["lambda1"] = report.lambda1;
    doc["lambda2"] = report.lambda2;
    doc["predicted_ratio"] = report.predicted_ratio;
    doc["measured_slope"] = report.measured_slope;
    doc["kappa_series"] = report.kappa_series;
    doc["sr_series"] = report.sr_series;
    detail_cli::write_json(out_dir / "decay_report.json", doc);
    std::cout << "dynamics: " << trace.steps.size() << " steps, predicted per-step ratio "
              << format_double(report.predicted_ratio) << ", measured ln-kappa slope "
              << format_double(report.measured_slope) << "\n";
  });
}

inline int cmd_ssrf_bench(const std::filesystem::path& config_path) {
  return guarded([&] {
    Config config = Config::parse_file(config_path);
    config.apply_env_seed_override("bench.seed");
    const std::filesystem::path out_dir = detail_cli::ensure_output_dir(config);
    const std::vector<std::size_t> sizes = config.get_size_list("bench.sizes", {128, 256, 512});
    const std::vector<std::size_t> ranks = config.get_size_list("bench.ranks", {4, 8});
    const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("bench.seed", 3));

    using clock = std::chrono::steady_clock;
    CsvWriter csv("n,m,r,ssrf_ms,svd_ms,ssrf_residual,oracle_residual");
    for (std::size_t size_index = 0; size_index < sizes.size(); ++size_index) {
      const std::size_t n = sizes[size_index];
      const Matrix a = gaussian_matrix(n, n, mix_seed(seed, size_index));
      for (std::size_t r : ranks) {
        const auto t0 = clock::now();
        const lowrank::SsrfResult sketch = lowrank::ssrf(a, r, mix_seed(seed, 77 + r));
        const auto t1 = clock::now();
        const SvdResult dec = svd(a);
        const auto t2 = clock::now();

        const Matrix residual =
            sub(a, matmul(sketch.q, matmul(transpose(sketch.q), a)));
        double tail = 0.0;
        for (std::size_t i = r; i < dec.s.size(); ++i) tail += dec.s[i] * dec.s[i];

        const double ssrf_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        const double svd_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
        csv.add_row({std::to_string(n), std::to_string(n), std::to_string(r),
                     format_double(ssrf_ms), format_double(svd_ms),
                     format_double(fro_norm(residual)), format_double(std::sqrt(tail))});
      }
    }
    csv.write(out_dir / "ssrf_bench.csv", config.hash());
    std::cout << "ssrf-bench: " << sizes.size() * ranks.size() << " rows in "
              << (out_dir / "ssrf_bench.csv").string() << "\n";
  });
}

inline int cmd_extract_adapter(const std::filesystem::path& pre_path,
                               const std::filesystem::path& ft_path, double rel_tol,
                               const std::filesystem::path& out_dir) {
  return guarded([&] {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create output directory " + out_dir.string());

    const Matrix w_pre = load_matrix(pre_path);
    const Matrix w_ft = load_matrix(ft_path);
    const Matrix gap = adapter::delta(w_ft, w_pre);
    const std::size_t rank = adapter::numerical_rank(gap, rel_tol);

    nlohmann::ordered_json report;
    report["rank"] = rank;
    report["sizes"] = {{"rows", gap.rows()}, {"cols", gap.cols()}};
    const double gap_norm = fro_norm(gap);
    if (rank == 0) {
      report["residual_fnorm"] = 0.0;
      report["relative_residual"] = 0.0;
      std::cout << "extract-adapter: checkpoints identical up to tolerance, no factors emitted\n";
    } else {
      const adapter::AdapterPair pair = adapter::factorize(gap, rank);
      save_matrix(out_dir / "adapter_a.argd", pair.a);
      save_matrix(out_dir / "adapter_b.argd", pair.b);
      report["residual_fnorm"] = pair.residual_fnorm;
      report["relative_residual"] = pair.residual_fnorm / gap_norm;
      std::cout << "extract-adapter: rank " << rank << ", relative residual "
                << format_double(pair.residual_fnorm / gap_norm) << "\n";
    }
    detail_cli::write_json(out_dir / "adapter_report.json", report);
  });
}

}  // namespace argd::cli

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "argd/experiments.hpp"

using namespace argd;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("argd_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTrainConfig = R"(
[experiment]
seed = 1

[network]
dims = 16,12,4
activation = relu
loss = mse

[data]
kind = lowrank_regression
target_rank = 2
noise_std = 0.0
batch_size = 16

[optimizer]
method = adarankgrad
alpha = 0.01
eta_th = 0.3
r_init = 1
r_max = 6
varsigma1 = 1e-9
inner_exit = fixed
inner_interval = 50

[run]
steps = 120
)";

}  // namespace

TEST_CASE("config parsing", "[cli]") {
  const Config config = Config::parse_string(
      "# comment\n[sec]\nkey = 3.5\nflag = true\nname = hello\nlist = 1, 2,3\n");
  CHECK(config.get_double("sec.key", 0.0) == 3.5);
  CHECK(config.get_bool("sec.flag", false));
  CHECK(config.get_string("sec.name", "") == "hello");
  CHECK(config.get_double_list("sec.list", {}) == std::vector<double>{1, 2, 3});
  CHECK(config.get_int("sec.missing", 7) == 7);

  CHECK_THROWS_AS(Config::parse_string("[broken\nkey = 1\n"), Error);
  CHECK_THROWS_AS(Config::parse_string("keyvalue\n"), Error);
  CHECK_THROWS_AS(Config::parse_string("[s]\nkey = abc\n").get_double("s.key", 0.0), Error);

  SECTION("hash is stable and content-sensitive") {
    const Config a = Config::parse_string("[s]\nx = 1\ny = 2\n");
    const Config b = Config::parse_string("[s]\ny = 2\nx = 1\n");
    const Config c = Config::parse_string("[s]\nx = 1\ny = 3\n");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
  }
  SECTION("environment override rewrites the seed") {
    Config config2 = Config::parse_string("[experiment]\nseed = 5\n");
    setenv("ARGD_SEED", "99", 1);
    config2.apply_env_seed_override("experiment.seed");
    unsetenv("ARGD_SEED");
    CHECK(config2.get_int("experiment.seed", 0) == 99);
  }
}

TEST_CASE("training command writes a complete artifact set", "[cli]") {
  const fs::path dir = fresh_dir("train");
  const fs::path config_path = dir / "exp.ini";
  write_file(config_path, std::string(kTrainConfig) + "[output]\ndir = " +
                              (dir / "out").string() + "\n");
  REQUIRE(cli::cmd_train(config_path) == 0);

  const std::string trace = read_file(dir / "out" / "trace.csv");
  CHECK(trace.rfind("step,layer_id,rank,eta_ratio,grad_fnorm,proj_grad_fnorm,refresh_flag,loss",
                    0) == 0);
  CHECK(trace.find("# config_hash=") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "metrics.json"));
  CHECK(fs::exists(dir / "out" / "layer_0.argd"));
  CHECK(fs::exists(dir / "out" / "layer_1.argd"));
  const Matrix w0 = load_matrix(dir / "out" / "layer_0.argd");
  CHECK(w0.rows() == 12);
  CHECK(w0.cols() == 16);

  SECTION("rerun is byte-identical") {
    const std::string metrics_first = read_file(dir / "out" / "metrics.json");
    REQUIRE(cli::cmd_train(config_path) == 0);
    CHECK(read_file(dir / "out" / "trace.csv") == trace);
    CHECK(read_file(dir / "out" / "metrics.json") == metrics_first);
  }

  SECTION("statistics recompute exactly from the serialized trace") {
    std::map<std::size_t, std::vector<std::size_t>> rank_series;
    std::istringstream in(trace);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ls(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ls, field, ',')) fields.push_back(field);
      REQUIRE(fields.size() == 8);
      rank_series[std::stoul(fields[1])].push_back(std::stoul(fields[2]));
    }
    const auto metrics_doc = nlohmann::json::parse(read_file(dir / "out" / "metrics.json"));
    for (const auto& layer : metrics_doc["layers"]) {
      const std::size_t id = layer["layer_id"].get<std::size_t>();
      const auto& series = rank_series.at(id);
      double mean = 0.0;
      for (std::size_t r : series) mean += static_cast<double>(r);
      mean /= static_cast<double>(series.size());
      CHECK(layer["effective_rank"].get<double>() == mean);
    }
  }
}

TEST_CASE("full-rank-forced training matches plain adam", "[cli]") {
  auto config_for = [](const std::string& method, const std::string& extra) {
    std::string text(kTrainConfig);
    const std::string from = "method = adarankgrad";
    text.replace(text.find(from), from.size(), "method = " + method + "\n" + extra);
    return Config::parse_string(text);
  };
  const cli::TrainResult ada =
      cli::run_train(config_for("adarankgrad", "force_full_rank = true"));
  const cli::TrainResult adam = cli::run_train(config_for("adam", ""));
  CHECK(std::abs(ada.final_loss - adam.final_loss) <= 1e-8);
}

TEST_CASE("adaptive training lowers the windowed mean rank", "[cli]") {
  std::string text(kTrainConfig);
  const std::string from = "inner_exit = fixed";
  text.replace(text.find(from), from.size(), "inner_exit = adaptive");
  const std::string dims = "dims = 16,12,4";
  std::string big = text;
  big.replace(big.find(dims), dims.size(), "dims = 32,32,32,8");
  const std::string steps = "steps = 120";
  big.replace(big.find(steps), steps.size(), "steps = 2000");
  const std::string alpha = "alpha = 0.01";
  big.replace(big.find(alpha), alpha.size(), "alpha = 0.005");
  const std::string rmax = "r_max = 6";
  big.replace(big.find(rmax), rmax.size(), "r_max = 8");
  Config config = Config::parse_string(big);
  config.set("optimizer.update_rule", "sgd");
  const cli::TrainResult result = cli::run_train(config);

  // mean rank over the second half of the run does not exceed the first half
  const std::size_t half_steps = result.steps_run / 2;
  double first = 0.0, last = 0.0;
  std::size_t nf = 0, nl = 0;
  for (const TraceRow& row : result.trace) {
    if (row.rank == 0) continue;
    if (row.step < half_steps) {
      first += static_cast<double>(row.rank);
      ++nf;
    } else {
      last += static_cast<double>(row.rank);
      ++nl;
    }
  }
  REQUIRE(nf > 0);
  REQUIRE(nl > 0);
  CHECK(last / static_cast<double>(nl) <= first / static_cast<double>(nf));
}

TEST_CASE("dynamics command emits the trace and report", "[cli]") {
  const fs::path dir = fresh_dir("dyn");
  const fs::path config_path = dir / "dyn.ini";
  write_file(config_path, "[dynamics]\nn = 6\nm = 6\nterms = 2\nalpha = 0.01\n"
                          "b_spectrum = 1,2\nc_spectrum = 1\nsteps = 2000\nseed = 42\n"
                          "[output]\ndir = " + (dir / "out").string() + "\n");
  REQUIRE(cli::cmd_dynamics(config_path) == 0);

  const std::string trace = read_file(dir / "out" / "dynamics_trace.csv");
  CHECK(trace.rfind("step,grad_fnorm,kappa,stable_rank", 0) == 0);
  const auto report = nlohmann::json::parse(read_file(dir / "out" / "decay_report.json"));
  const double predicted = 2.0 * std::log(report["predicted_ratio"].get<double>());
  const double measured = report["measured_slope"].get<double>();
  CHECK(std::abs(measured - predicted) <= 0.1 * std::abs(predicted));

  SECTION("degenerate spectrum exits with the numeric code") {
    const fs::path bad = dir / "bad.ini";
    write_file(bad, "[dynamics]\nn = 4\nm = 4\nterms = 1\nalpha = 0.01\n"
                    "b_spectrum = 1\nc_spectrum = 1\nsteps = 300\nseed = 2\n"
                    "[output]\ndir = " + (dir / "out2").string() + "\n");
    CHECK(cli::cmd_dynamics(bad) == 3);
  }
  SECTION("divergent step size exits with the numeric code") {
    const fs::path bad = dir / "div.ini";
    write_file(bad, "[dynamics]\nn = 4\nm = 4\nterms = 1\nalpha = 3.0\n"
                    "b_spectrum = 1,2\nc_spectrum = 1\nsteps = 500\nseed = 2\n"
                    "[output]\ndir = " + (dir / "out3").string() + "\n");
    CHECK(cli::cmd_dynamics(bad) == 3);
  }
}

TEST_CASE("range finder benchmark grid", "[cli]") {
  const fs::path dir = fresh_dir("bench");
  const fs::path config_path = dir / "bench.ini";
  write_file(config_path, "[bench]\nsizes = 48,64\nranks = 2,4\nseed = 3\n"
                          "[output]\ndir = " + (dir / "out").string() + "\n");
  REQUIRE(cli::cmd_ssrf_bench(config_path) == 0);
  const std::string csv = read_file(dir / "out" / "ssrf_bench.csv");
  std::size_t lines = 0;
  std::istringstream in(csv);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++lines;
    if (lines == 1) continue;  // header
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  REQUIRE(rows.size() == 4);  // |sizes| x |ranks|
  for (const auto& fields : rows) {
    REQUIRE(fields.size() == 7);
    const double ssrf_res = std::stod(fields[5]);
    const double oracle_res = std::stod(fields[6]);
    CHECK(ssrf_res >= oracle_res - 1e-12);
  }
}

TEST_CASE("adapter extraction command", "[cli]") {
  const fs::path dir = fresh_dir("adapter");
  const Matrix base = gaussian_matrix(10, 8, 5);
  // rank-2 update on top of the base weights
  const Matrix update =
      matmul(gaussian_matrix(10, 2, 6), gaussian_matrix(2, 8, 7));
  save_matrix(dir / "pre.argd", base);
  save_matrix(dir / "ft.argd", add(base, update));
  save_matrix(dir / "same.argd", base);

  SECTION("identical checkpoints produce a rank-0 report and no factors") {
    REQUIRE(cli::cmd_extract_adapter(dir / "pre.argd", dir / "same.argd", 1e-6,
                                     dir / "out_same") == 0);
    const auto report = nlohmann::json::parse(read_file(dir / "out_same" / "adapter_report.json"));
    CHECK(report["rank"].get<int>() == 0);
    CHECK_FALSE(fs::exists(dir / "out_same" / "adapter_a.argd"));
  }
  SECTION("low-rank delta is recovered exactly") {
    REQUIRE(cli::cmd_extract_adapter(dir / "pre.argd", dir / "ft.argd", 1e-6, dir / "out") == 0);
    const auto report = nlohmann::json::parse(read_file(dir / "out" / "adapter_report.json"));
    CHECK(report["rank"].get<int>() == 2);
    CHECK(report["relative_residual"].get<double>() <= 1e-8);
    const Matrix a = load_matrix(dir / "out" / "adapter_a.argd");
    const Matrix b = load_matrix(dir / "out" / "adapter_b.argd");
    CHECK(fro_norm(sub(update, matmul(a, b))) <= 1e-8 * fro_norm(update));
  }
  SECTION("corrupted magic exits with the format code") {
    std::ofstream out(dir / "corrupt.argd", std::ios::binary);
    out << "XXXXXX" << std::string(64, '\0');
    out.close();
    CHECK(cli::cmd_extract_adapter(dir / "pre.argd", dir / "corrupt.argd", 1e-6,
                                   dir / "out_bad") == 4);
  }
}

TEST_CASE("exit codes map error classes", "[cli]") {
  const fs::path dir = fresh_dir("codes");
  CHECK(cli::cmd_train(dir / "missing.ini") == 4);  // unreadable config file

  const fs::path bad_value = dir / "bad_value.ini";
  write_file(bad_value, "[optimizer]\nalpha = not_a_number\n");
  CHECK(cli::cmd_train(bad_value) == 2);

  const fs::path bad_method = dir / "bad_method.ini";
  write_file(bad_method, "[optimizer]\nmethod = mystery\n[output]\ndir = " +
                             (dir / "out").string() + "\n");
  CHECK(cli::cmd_train(bad_method) == 2);
}

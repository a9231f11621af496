#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "doctest.h"

namespace {

struct RunOutput {
  int exit_code = -1;
  std::string text;
};

// Runs the built binary with stderr folded into stdout.
RunOutput run_cli(const std::string& args) {
  std::string cmd = std::string(ELLIPFIT_BIN) + " " + args + " 2>&1";
  RunOutput out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe))
    out.text.append(buf.data(), got);
  int status = pclose(pipe);
  out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string temp_path(const std::string& name) {
  const char* dir = std::getenv("TMPDIR");
  return std::string(dir ? dir : "/tmp") + "/" + name;
}

}  // namespace

TEST_CASE("fit emits a JSON record for a seeded trial") {
  RunOutput out = run_cli("--seed 1 fit --d 5 --n 3 --with-q");
  REQUIRE(out.exit_code == 0);
  auto j = nlohmann::json::parse(out.text);
  CHECK(j["d"] == 5);
  CHECK(j["n"] == 3);
  CHECK(j["master_seed"] == 1);
  CHECK(j["trial"] == 0);
  CHECK(j["success"].is_boolean());
  CHECK(j["lambda_min_sigma"].is_number());
  CHECK(j["residual_max"].get<double>() <= 1e-8);
  CHECK(j["q"].size() == 3);

  // Identical invocation, identical payload.
  RunOutput again = run_cli("--seed 1 fit --d 5 --n 3 --with-q");
  CHECK(again.text == out.text);

  RunOutput with_norm = run_cli("--seed 1 fit --d 5 --n 3 --with-theta-norm");
  auto jn = nlohmann::json::parse(with_norm.text);
  CHECK(jn.contains("theta_inv_op_norm"));
}

TEST_CASE("fit rejects CSV output") {
  RunOutput out = run_cli("fit --d 5 --n 3 --format csv");
  CHECK(out.exit_code == 1);
}

TEST_CASE("missing required flags are usage errors") {
  CHECK(run_cli("fit --n 3").exit_code == 1);
  CHECK(run_cli("fit --d 0 --n 3").exit_code == 1);
  CHECK(run_cli("--format xml fit --d 5 --n 3").exit_code == 1);
  CHECK(run_cli("nonsense").exit_code == 1);
}

TEST_CASE("phase CSV is byte-stable across thread counts and runs") {
  const std::string args = "--seed 7 phase --d 8 --ratio 0.05,0.15,0.3 --trials 40";
  RunOutput serial = run_cli(args + " --threads 1");
  RunOutput parallel = run_cli(args + " --threads 8");
  REQUIRE(serial.exit_code == 0);
  REQUIRE(parallel.exit_code == 0);
  CHECK(serial.text == parallel.text);

  CHECK(serial.text ==
        slurp(std::string(ELLIPFIT_GOLDEN_DIR) + "/phase_small.csv"));
  CHECK(serial.text.rfind(
            "d,n,ratio,trials,successes,frequency,wilson_lo,wilson_hi,"
            "failure_theta_not_pd,failure_psd\n",
            0) == 0);
}

TEST_CASE("phase accepts explicit point counts and JSON format") {
  RunOutput out =
      run_cli("--seed 3 --format json phase --d 6 --n 4,9 --trials 20");
  REQUIRE(out.exit_code == 0);
  auto j = nlohmann::json::parse(out.text);
  REQUIRE(j["cells"].size() == 2);
  CHECK(j["cells"][0]["d"] == 6);
  CHECK(j["cells"][0]["n"] == 4);
  CHECK(j["cells"][0]["trials"] == 20);
}

TEST_CASE("lemma CSV schema and bound-failure exit code") {
  RunOutput out = run_cli("lemma --name chi2 --d 10 --trials 2000");
  REQUIRE(out.exit_code == 0);
  CHECK(out.text.rfind("threshold,empirical,bound,trials\n", 0) == 0);

  // An impossible cap forces the profile check to fail; the run still emits
  // its payload but signals the verdict through the exit code.
  RunOutput failed = run_cli(
      "lemma --name direction-diagnostics --trials 20 --directions 20 "
      "--cap 0.0000001");
  CHECK(failed.exit_code == 3);

  RunOutput unknown = run_cli("lemma --name no-such-lemma");
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.text.find("chi2") != std::string::npos);
}

TEST_CASE("lemma JSON carries the verdict") {
  RunOutput out =
      run_cli("--format json lemma --name qtilde --d 40 --trials 2000");
  REQUIRE(out.exit_code == 0);
  auto j = nlohmann::json::parse(out.text);
  CHECK(j["lemma"] == "qtilde");
  CHECK(j["pass"] == true);
  CHECK(j["rows"].size() > 0);
  CHECK(j["rows"][0].contains("threshold"));
  CHECK(j["rows"][0].contains("empirical"));
  CHECK(j["rows"][0].contains("bound"));
}

TEST_CASE("dual search finds the certificate for an overdetermined cloud") {
  RunOutput out = run_cli("--seed 3 dual --d 2 --n 4");
  REQUIRE(out.exit_code == 0);
  auto j = nlohmann::json::parse(out.text);
  CHECK(j["certificate_found"] == true);
  CHECK(j["lambda_max"].get<double>() < 0.0);
  CHECK(j["z"].size() == 4);
  CHECK(j["trace"].size() > 0);

  RunOutput probed = run_cli("--seed 1 dual --d 6 --n 6 --probes 50");
  REQUIRE(probed.exit_code == 0);
  auto jp = nlohmann::json::parse(probed.text);
  REQUIRE(jp.contains("probe"));
  if (jp["probe"].contains("violations")) CHECK(jp["probe"]["violations"] == 0);
}

TEST_CASE("output files get a metadata sidecar") {
  std::string path = temp_path("ellipfit_cli_phase.csv");
  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());

  RunOutput out =
      run_cli("--seed 7 --out " + path + " phase --d 6 --ratio 0.1 --trials 10");
  REQUIRE(out.exit_code == 0);
  std::string payload = slurp(path);
  CHECK(payload.rfind("d,n,ratio", 0) == 0);

  auto meta = nlohmann::json::parse(slurp(path + ".meta.json"));
  CHECK(meta["tool"] == "ellipfit");
  CHECK(meta["master_seed"] == 7);
  CHECK(meta.contains("argv"));
  CHECK(meta.contains("timestamp_utc"));

  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());
}

TEST_CASE("unwritable output paths are I/O errors") {
  CHECK(run_cli("--out /nonexistent-dir/x.csv phase --d 6 --ratio 0.1 --trials 5")
            .exit_code == 2);
}

TEST_CASE("config file fills unset options, flags win") {
  std::string cfg_path = temp_path("ellipfit_cli_cfg.json");
  {
    std::ofstream f(cfg_path);
    f << R"({"master_seed": 7, "trials": 25, "threads": 2})";
  }

  RunOutput from_cfg = run_cli("--config " + cfg_path + " phase --d 6 --ratio 0.1");
  REQUIRE(from_cfg.exit_code == 0);
  CHECK(from_cfg.text.find(",25,") != std::string::npos);

  RunOutput reference = run_cli("--seed 7 phase --d 6 --ratio 0.1 --trials 25");
  CHECK(from_cfg.text == reference.text);

  RunOutput overridden =
      run_cli("--config " + cfg_path + " phase --d 6 --ratio 0.1 --trials 10");
  CHECK(overridden.text.find(",10,") != std::string::npos);
  CHECK(run_cli("--config /nonexistent/cfg.json phase --d 6 --ratio 0.1")
            .exit_code == 2);

  std::remove(cfg_path.c_str());
}

TEST_CASE("help and version exit cleanly") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("--version").exit_code == 0);
  CHECK(run_cli("lemma --help").exit_code == 0);
}

// Command-line harness around the ellipsoid-fitting library: single fits,
// phase diagrams over (d, n) grids, concentration-lemma experiments, and
// dual certificate searches.  Outputs are deterministic functions of
// (master_seed, parameters); the thread count never changes any byte of the
// payload, only how fast it is produced.

#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "ellipfit/conclab.hpp"
#include "ellipfit/dual.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/fitter.hpp"
#include "ellipfit/parallel.hpp"
#include "ellipfit/stats.hpp"

using nlohmann::ordered_json;

namespace {

// Exit codes: 0 success, 1 usage, 2 I/O, 3 a checked bound failed,
// 4 numeric failure.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitBoundFailed = 3;
constexpr int kExitNumeric = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> g_argv;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

struct OutputOpts {
  std::string path;    // empty = stdout
  std::string format;  // "csv" or "json"
};

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// The payload file itself is a pure function of seed and parameters; the
// volatile context (timestamp, host, argv) goes to a sidecar instead so
// byte-for-byte reproducibility of the payload is never broken.
void write_sidecar_meta(const std::string& payload_path,
                        std::uint64_t master_seed, int threads) {
  ordered_json meta;
  meta["tool"] = "ellipfit";
  meta["version"] = ELLIPFIT_VERSION;
  meta["argv"] = g_argv;
  meta["master_seed"] = master_seed;
  meta["threads"] = threads;
  meta["output_path"] = payload_path;
  meta["timestamp_utc"] = iso8601_utc_now();
  char host[256] = {0};
  if (gethostname(host, sizeof(host) - 1) == 0) meta["hostname"] = host;
  std::ofstream f(payload_path + ".meta.json");
  if (!f) throw IoError("cannot write sidecar: " + payload_path + ".meta.json");
  f << meta.dump(2) << "\n";
}

void emit_payload(const OutputOpts& out, const std::string& payload,
                  std::uint64_t master_seed, int threads) {
  if (out.path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream f(out.path, std::ios::binary);
  if (!f) throw IoError("cannot open output file: " + out.path);
  f << payload;
  if (!f) throw IoError("failed while writing: " + out.path);
  f.close();
  write_sidecar_meta(out.path, master_seed, threads);
}

// ---------------------------------------------------------------------------
// Shared experiment configuration (defaults < config file < flags)
// ---------------------------------------------------------------------------

struct RunConfig {
  std::uint64_t master_seed = 1;
  int threads = 1;
  std::vector<long long> d_values;
  std::vector<long long> n_values;
  std::vector<double> ratios;
  long long trials = 100;
  double tol_residual = 1e-8;
  double tol_psd = 1e-8;
  std::string output_path;
  std::string output_format;
};

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file: " + path);
  ordered_json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw IoError("config parse error in " + path + ": " + e.what());
  }
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("d_values")) cfg.d_values = j["d_values"].get<std::vector<long long>>();
  if (j.contains("n_values")) cfg.n_values = j["n_values"].get<std::vector<long long>>();
  if (j.contains("ratios")) cfg.ratios = j["ratios"].get<std::vector<double>>();
  if (j.contains("trials")) cfg.trials = j["trials"].get<long long>();
  if (j.contains("tol_residual")) cfg.tol_residual = j["tol_residual"].get<double>();
  if (j.contains("tol_psd")) cfg.tol_psd = j["tol_psd"].get<double>();
  if (j.contains("output_path")) cfg.output_path = j["output_path"].get<std::string>();
  if (j.contains("output_format")) cfg.output_format = j["output_format"].get<std::string>();
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  long long d = 0;
  long long n = 0;
  long long trial = 0;
  bool with_q = false;
  bool with_theta_norm = false;
};

int run_fit(const FitArgs& args, const RunConfig& cfg, const OutputOpts& out) {
  ellip::fitter::Tolerances tol{cfg.tol_residual, cfg.tol_psd};
  ellip::RandomStream stream = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kFitTrial,
      static_cast<std::uint64_t>(args.trial));
  ellip::PointCloud cloud = ellip::sample_gaussian_cloud(args.d, args.n, stream);

  ordered_json j;
  j["d"] = args.d;
  j["n"] = args.n;
  j["master_seed"] = cfg.master_seed;
  j["trial"] = args.trial;
  try {
    ellip::fitter::FitResult fit = ellip::fitter::solve_identity_perturbation(
        cloud, tol, args.with_theta_norm);
    j["success"] = fit.success;
    j["lambda_min_sigma"] = fit.lambda_min_sigma;
    j["residual_max"] = fit.residual_max;
    if (fit.success) {
      j["failure"] = "none";
    } else if (fit.residual_max > tol.residual) {
      j["failure"] = "residual_violation";
    } else {
      j["failure"] = "psd_violation";
    }
    if (args.with_theta_norm && fit.theta_inv_op_norm)
      j["theta_inv_op_norm"] = *fit.theta_inv_op_norm;
    if (args.with_q) j["q"] = std::vector<double>(fit.q.begin(), fit.q.end());
  } catch (const ellip::NotPositiveDefiniteError&) {
    j["success"] = false;
    j["failure"] = "theta_not_pd";
  }
  emit_payload(out, j.dump(2) + "\n", cfg.master_seed, cfg.threads);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// phase
// ---------------------------------------------------------------------------

struct PhaseCell {
  long long d = 0;
  long long n = 0;
  double ratio = 0.0;
  long long trials = 0;
  long long successes = 0;
  double frequency = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  long long failure_theta_not_pd = 0;
  long long failure_psd = 0;
};

std::vector<PhaseCell> run_phase_grid(const RunConfig& cfg) {
  std::vector<std::pair<long long, long long>> cells;
  for (long long d : cfg.d_values) {
    if (d < 1) throw ellip::PreconditionError("phase: d must be >= 1");
    if (!cfg.n_values.empty()) {
      for (long long n : cfg.n_values) {
        if (n < 1) throw ellip::PreconditionError("phase: n must be >= 1");
        cells.emplace_back(d, n);
      }
    } else {
      for (double r : cfg.ratios) {
        auto n = static_cast<long long>(
            std::llround(r * static_cast<double>(d) * static_cast<double>(d)));
        cells.emplace_back(d, std::max(1LL, n));
      }
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  const long long trials = cfg.trials;
  ellip::fitter::Tolerances tol{cfg.tol_residual, cfg.tol_psd};

  // All (cell, trial) pairs run in one flat parallel loop; aggregation is a
  // sequential pass over the stored records, so the CSV is identical for any
  // thread count.
  std::vector<ellip::fitter::TrialRecord> records(cells.size() * trials);
  ellip::parallel_for(
      static_cast<std::int64_t>(records.size()), cfg.threads,
      [&](std::int64_t i) {
        const auto cell = cells[static_cast<std::size_t>(i / trials)];
        const long long t = i % trials;
        records[i] = ellip::fitter::fit_trial(cell.first, cell.second,
                                              cfg.master_seed, t, tol);
      });

  std::vector<PhaseCell> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    PhaseCell cell;
    cell.d = cells[c].first;
    cell.n = cells[c].second;
    cell.ratio = static_cast<double>(cell.n) /
                 (static_cast<double>(cell.d) * static_cast<double>(cell.d));
    cell.trials = trials;
    for (long long t = 0; t < trials; ++t) {
      const auto& rec = records[c * trials + t];
      if (rec.success) {
        ++cell.successes;
      } else if (rec.failure == ellip::fitter::FailureReason::theta_not_pd) {
        ++cell.failure_theta_not_pd;
      } else {
        // Residual violations are counted with the PSD failures: both mean
        // the construction produced no valid ellipsoid.
        ++cell.failure_psd;
      }
    }
    cell.frequency =
        static_cast<double>(cell.successes) / static_cast<double>(trials);
    ellip::WilsonInterval wi = ellip::wilson95(cell.successes, trials);
    cell.wilson_lo = wi.lo;
    cell.wilson_hi = wi.hi;
    out.push_back(cell);
  }
  return out;
}

std::string phase_csv(const std::vector<PhaseCell>& cells) {
  std::string s =
      "d,n,ratio,trials,successes,frequency,wilson_lo,wilson_hi,"
      "failure_theta_not_pd,failure_psd\n";
  for (const auto& c : cells) {
    s += std::to_string(c.d) + "," + std::to_string(c.n) + "," +
         fmt17(c.ratio) + "," + std::to_string(c.trials) + "," +
         std::to_string(c.successes) + "," + fmt17(c.frequency) + "," +
         fmt17(c.wilson_lo) + "," + fmt17(c.wilson_hi) + "," +
         std::to_string(c.failure_theta_not_pd) + "," +
         std::to_string(c.failure_psd) + "\n";
  }
  return s;
}

ordered_json phase_json(const std::vector<PhaseCell>& cells,
                        const RunConfig& cfg) {
  ordered_json j;
  j["master_seed"] = cfg.master_seed;
  j["trials_per_cell"] = cfg.trials;
  j["tol_residual"] = cfg.tol_residual;
  j["tol_psd"] = cfg.tol_psd;
  j["cells"] = ordered_json::array();
  for (const auto& c : cells) {
    ordered_json cell;
    cell["d"] = c.d;
    cell["n"] = c.n;
    cell["ratio"] = c.ratio;
    cell["trials"] = c.trials;
    cell["successes"] = c.successes;
    cell["frequency"] = c.frequency;
    cell["wilson_lo"] = c.wilson_lo;
    cell["wilson_hi"] = c.wilson_hi;
    cell["failure_theta_not_pd"] = c.failure_theta_not_pd;
    cell["failure_psd"] = c.failure_psd;
    j["cells"].push_back(cell);
  }
  return j;
}

int run_phase(const RunConfig& cfg, const OutputOpts& out) {
  if (cfg.d_values.empty())
    throw CLI::ValidationError("phase", "need --d (or d_values in --config)");
  if (cfg.n_values.empty() == cfg.ratios.empty())
    throw CLI::ValidationError(
        "phase", "need exactly one of --n/n_values and --ratio/ratios");
  if (cfg.trials < 1)
    throw CLI::ValidationError("phase", "trials must be >= 1");

  std::vector<PhaseCell> cells = run_phase_grid(cfg);
  std::string payload = out.format == "json"
                            ? phase_json(cells, cfg).dump(2) + "\n"
                            : phase_csv(cells);
  emit_payload(out, payload, cfg.master_seed, cfg.threads);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// lemma
// ---------------------------------------------------------------------------

// One row of a lemma table.  `empirical` vs `bound` semantics depend on the
// check kind; `pass` is per-row and the run passes iff all rows pass.
struct LemmaRow {
  double threshold = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
  long long trials = 0;
  bool pass = true;
};

struct LemmaOutcome {
  std::string name;
  std::vector<LemmaRow> rows;
  ordered_json extra;  // lemma-specific report fields
  bool pass = true;
};

struct LemmaArgs {
  std::string name;
  long long d = -1;
  long long n = -1;
  double eta = -1.0;
  long long trials = -1;
  long long directions = -1;
  int k_max = -1;
  std::vector<double> grid;
  double constant = -1.0;   // bound constant override
  double weibull_q = -1.0;
  double min_freq = -1.0;
  double cap = -1.0;        // event/profile cap override
};

long long pick(long long v, long long dflt) { return v >= 0 ? v : dflt; }
double pickd(double v, double dflt) { return v >= 0.0 ? v : dflt; }

Eigen::VectorXd grid_or(const std::vector<double>& grid,
                        std::initializer_list<double> dflt) {
  std::vector<double> g = grid.empty() ? std::vector<double>(dflt) : grid;
  return Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

void rows_from_curve(const ellip::conclab::TailCurve& curve,
                     double slack_sigmas, LemmaOutcome& out) {
  for (Eigen::Index j = 0; j < curve.thresholds.size(); ++j) {
    LemmaRow row;
    row.threshold = curve.thresholds[j];
    row.empirical = curve.empirical[j];
    row.bound = curve.bound[j];
    row.trials = curve.trials;
    const double se = std::sqrt(
        std::max(0.0, row.bound * (1.0 - row.bound)) /
        static_cast<double>(curve.trials));
    row.pass = row.empirical <= row.bound + slack_sigmas * se;
    out.rows.push_back(row);
  }
}

LemmaOutcome lemma_chi2(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 10);
  const long long trials = pick(a.trials, 100000);
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kChi2, 0);
  auto tails = ellip::conclab::chi2_tail(d, grid_or(a.grid, {0.5, 1.0, 2.0, 4.0}),
                                         trials, base, cfg.threads);
  LemmaOutcome out;
  out.name = "chi2";
  rows_from_curve(tails.upper, 3.0, out);
  rows_from_curve(tails.lower, 3.0, out);
  out.extra["d"] = d;
  out.extra["sides"] = "rows are the upper curve then the lower curve";
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_qtilde(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 100);
  const long long trials = pick(a.trials, 100000);
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kQtilde, 0);
  auto curve = ellip::conclab::qtilde_tail(
      d, grid_or(a.grid, {0.3, 0.5, 0.7, 0.9, 0.999}), trials, base,
      cfg.threads);
  LemmaOutcome out;
  out.name = "qtilde";
  rows_from_curve(curve, 3.0, out);
  out.extra["d"] = d;
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_hanson_wright(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 20);
  const long long trials = pick(a.trials, 100000);
  const double c = pickd(a.constant, 0.125);
  // Rank-one projector onto the first coordinate: |M|_F = |M|_op = 1, so the
  // statistic is |d <w,e1>^2 - 1|.
  ellip::SymMatrix m(d);
  m.set(0, 0, 1.0);
  auto base = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kHansonWright, 0);
  auto curve = ellip::conclab::hanson_wright_tail(
      d, m, grid_or(a.grid, {1.0, 2.0, 4.0, 8.0, 16.0}), trials, base, c,
      cfg.threads);
  LemmaOutcome out;
  out.name = "hanson-wright";
  rows_from_curve(curve, 3.0, out);
  out.extra["d"] = d;
  out.extra["matrix"] = "e1 e1^T";
  out.extra["constant"] = c;
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_s_eta(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 100);
  const long long n = pick(a.n, 500);
  const double eta = pickd(a.eta, 0.5);
  const long long trials = pick(a.trials, 10000);
  const double c = pickd(a.constant, 0.5);
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kSEtaTail, 0);
  auto curve = ellip::conclab::s_eta_tail(
      d, n, eta, grid_or(a.grid, {1.0, 2.0, 3.0, 5.0, 8.0}), trials, base, c,
      cfg.threads);
  LemmaOutcome out;
  out.name = "s-eta";
  rows_from_curve(curve, 3.0, out);
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["eta"] = eta;
  out.extra["exponent_constant"] = c;
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_weibull_sum(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 50);
  const long long n = pick(a.n, 250);
  const double eta = pickd(a.eta, 1.0);
  const long long trials = pick(a.trials, 10000);
  const double c = pickd(a.constant, 0.125);
  const double q = pickd(a.weibull_q, 0.6);
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kWeibullSum, 0);
  auto curve = ellip::conclab::weibull_sum_tail(
      d, n, eta, grid_or(a.grid, {0.0, 1.0, 2.0, 4.0}), trials, base, c, q,
      cfg.threads);
  LemmaOutcome out;
  out.name = "weibull-sum";
  rows_from_curve(curve, 3.0, out);
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["eta"] = eta;
  out.extra["constant"] = c;
  out.extra["weibull_exponent"] = q;
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_gram_deviation(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 40);
  const long long n = pick(a.n, 80);
  const long long trials = pick(a.trials, 50);
  auto base = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kGramDeviation, 0);
  auto stats = ellip::conclab::gram_deviation(d, n, trials, base, cfg.threads);
  LemmaOutcome out;
  out.name = "gram-deviation";
  // Report-only: rows give quantiles of the two deviations at the same
  // probability level (threshold = level, empirical = |Theta - E Theta|_op,
  // bound column reused for |Theta^{-1} - (I - 11^T/n)|_op).
  for (double p : {0.5, 0.9, 0.99}) {
    LemmaRow row;
    row.threshold = p;
    row.empirical = ellip::quantile(stats.dev_theta, p);
    row.bound = stats.dev_inverse.empty()
                    ? 0.0
                    : ellip::quantile(stats.dev_inverse, p);
    row.trials = trials;
    out.rows.push_back(row);
  }
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["median_dev_theta"] = stats.median_dev_theta();
  if (!stats.dev_inverse.empty())
    out.extra["median_dev_inverse"] = stats.median_dev_inverse();
  out.extra["factorization_failures"] = stats.factorization_failures;
  out.extra["note"] = "report only; rows are deviation quantiles";
  return out;
}

LemmaOutcome lemma_theta_inverse(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 60);
  const long long n = pick(a.n, 180);
  const long long trials = pick(a.trials, 100);
  const double min_freq = pickd(a.min_freq, 0.95);
  auto base = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kGramDeviation, 0);
  auto stats = ellip::conclab::gram_deviation(d, n, trials, base, cfg.threads);
  LemmaOutcome out;
  out.name = "theta-inverse";
  LemmaRow row;
  row.threshold = 2.0;  // the operator-norm cap on Theta^{-1}
  row.empirical = stats.freq_inv_norm_below(2.0);
  row.bound = min_freq;
  row.trials = trials;
  row.pass = row.empirical >= min_freq &&
             stats.factorization_failures == 0;
  out.rows.push_back(row);
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["factorization_failures"] = stats.factorization_failures;
  out.extra["note"] = "pass requires empirical >= bound";
  out.pass = row.pass;
  return out;
}

LemmaOutcome lemma_infty_norm(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 60);
  const long long n = pick(a.n, 180);
  const long long trials = pick(a.trials, 200);
  const double min_freq = pickd(a.min_freq, 0.99);
  ellip::conclab::InftyNormOptions opts;
  if (!a.grid.empty()) opts.c_values = a.grid;
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kInftyNorm, 0);
  auto event = ellip::conclab::infty_norm_event(d, n, trials, base, opts,
                                                cfg.threads);
  LemmaOutcome out;
  out.name = "infty-norm";
  for (std::size_t j = 0; j < event.c_values.size(); ++j) {
    LemmaRow row;
    row.threshold = event.c_values[j];
    row.empirical = event.frequency[j];
    // Only the largest cap carries a requirement.
    row.bound = (j + 1 == event.c_values.size()) ? min_freq : 0.0;
    row.trials = trials;
    row.pass = row.empirical >= row.bound;
    out.rows.push_back(row);
  }
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["resamples"] = event.resamples;
  out.extra["note"] = "pass requires empirical >= bound at the largest cap";
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_moments(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 10);
  const long long trials = pick(a.trials, 100000);
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kMoments, 0);
  auto report = ellip::conclab::moment_suite(d, trials, base, cfg.threads);
  LemmaOutcome out;
  out.name = "moments";
  out.extra["d"] = d;
  out.extra["checks"] = ordered_json::array();
  for (const auto& c : report.checks) {
    LemmaRow row;
    row.threshold = c.target;
    row.empirical = c.value;
    row.bound = c.tolerance;
    row.trials = trials;
    row.pass = c.pass;
    out.rows.push_back(row);
    ordered_json jc;
    jc["name"] = c.name;
    jc["value"] = c.value;
    jc["target"] = c.target;
    jc["tolerance"] = c.tolerance;
    jc["pass"] = c.pass;
    out.extra["checks"].push_back(jc);
  }
  out.extra["note"] =
      "rows: threshold = target, empirical = value, bound = tolerance";
  out.pass = report.all_pass;
  return out;
}

LemmaOutcome lemma_moment_growth(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 20);
  const int k_max = a.k_max > 0 ? a.k_max : 8;
  const long long trials = pick(a.trials, 20000);
  const long long dirs = pick(a.directions, 8);
  const double ratio_cap = pickd(a.cap, 3.0);
  auto base = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kMomentGrowth, 0);
  auto growth = ellip::conclab::projected_moment_growth(
      d, k_max, static_cast<int>(dirs), trials, base, cfg.threads);

  LemmaOutcome out;
  out.name = "moment-growth";
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t m = 0; m < growth.orders.size(); ++m) {
    LemmaRow row;
    row.threshold = growth.orders[m];
    row.empirical = growth.l_hat_max[m];
    row.bound = growth.l_hat_min[m];
    row.trials = trials;
    out.rows.push_back(row);
    hi = std::max(hi, growth.l_hat_max[m]);
    lo = std::min(lo, growth.l_hat_min[m]);
  }
  // Boundedness in k: the whole profile stays within a constant factor.
  const double ratio = hi / lo;
  const double dd = static_cast<double>(d);
  const double k2_target = dd * std::sqrt(2.0 / (dd * (dd + 2.0))) / 2.0;
  const double k2_rel_err =
      std::abs(growth.l_hat_max[0] - k2_target) / k2_target;
  out.pass = ratio <= ratio_cap && k2_rel_err <= 0.05;
  out.extra["d"] = d;
  out.extra["directions"] = dirs;
  out.extra["max_over_min_ratio"] = ratio;
  out.extra["ratio_cap"] = ratio_cap;
  out.extra["k2_analytic"] = k2_target;
  out.extra["k2_relative_error"] = k2_rel_err;
  out.extra["note"] =
      "rows: threshold = k, empirical = max l_hat, bound = min l_hat";
  return out;
}

LemmaOutcome lemma_inverse_perturbation(const LemmaArgs& a,
                                        const RunConfig& cfg) {
  const long long d = pick(a.d, 20);
  const long long pairs = pick(a.trials, 500);
  auto base = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kInversePerturb, 0);
  long long violations = 0, admissible = 0;
  for (long long t = 0; t < pairs; ++t) {
    ellip::RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    // Random SPD base matrix and a small symmetric perturbation of it.
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) g(i, j) = stream.normal();
    Eigen::MatrixXd spd =
        g * g.transpose() / static_cast<double>(d) +
        Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd h(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) h(i, j) = stream.normal();
    const double scale = 0.05 * stream.uniform01() / static_cast<double>(d);
    Eigen::MatrixXd pert = spd + scale * (h + h.transpose());
    auto b = ellip::SymMatrix::mirror_lower(spd);
    auto aa = ellip::SymMatrix::mirror_lower(pert);
    auto check = ellip::conclab::inverse_perturbation_check(aa, b);
    if (check.admissible) ++admissible;
    if (!check.holds) ++violations;
  }
  LemmaOutcome out;
  out.name = "inverse-perturbation";
  LemmaRow row;
  row.threshold = 0.0;
  row.empirical = static_cast<double>(violations);
  row.bound = 0.0;
  row.trials = pairs;
  row.pass = violations == 0;
  out.rows.push_back(row);
  out.extra["d"] = d;
  out.extra["pairs"] = pairs;
  out.extra["admissible_pairs"] = admissible;
  out.extra["violations"] = violations;
  out.pass = row.pass;
  return out;
}

LemmaOutcome lemma_net_profile(const LemmaArgs& a, const RunConfig& cfg) {
  const long long d = pick(a.d, 60);
  const long long n = pick(a.n, 180);
  const long long trials = pick(a.trials, 100);
  const long long dirs = pick(a.directions, 500);
  const double min_freq = pickd(a.min_freq, 0.99);
  std::vector<double> c2 = a.grid.empty()
                               ? std::vector<double>{0.5, 1.0, 2.0}
                               : a.grid;
  auto base = ellip::RandomStream::for_purpose(cfg.master_seed,
                                               ellip::purpose::kNetProfile, 0);
  auto event = ellip::conclab::net_profile_event(
      d, n, static_cast<int>(dirs), trials, base, c2, cfg.threads);
  LemmaOutcome out;
  out.name = "net-profile";
  for (std::size_t j = 0; j < event.c2_values.size(); ++j) {
    LemmaRow row;
    row.threshold = event.c2_values[j];
    row.empirical = event.frequency[j];
    row.bound = (j + 1 == event.c2_values.size()) ? min_freq : 0.0;
    row.trials = trials;
    row.pass = row.empirical >= row.bound;
    out.rows.push_back(row);
  }
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["directions"] = dirs;
  out.extra["note"] = "pass requires empirical >= bound at the largest cap";
  for (const auto& r : out.rows) out.pass &= r.pass;
  return out;
}

LemmaOutcome lemma_direction_diagnostics(const LemmaArgs& a,
                                         const RunConfig& cfg) {
  const long long d = pick(a.d, 60);
  const long long n = pick(a.n, 180);
  const double eta = pickd(a.eta, 0.5);
  const long long trials = pick(a.trials, 100);
  const long long dirs = pick(a.directions, 100);
  const double cap = pickd(a.cap, 0.25);
  auto base = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kDirectionDiag, 0);
  auto profile = ellip::conclab::direction_profile(
      d, n, eta, static_cast<int>(dirs), trials, base, cfg.threads);
  LemmaOutcome out;
  out.name = "direction-diagnostics";
  LemmaRow row;
  row.threshold = cap;
  row.empirical = profile.p99_abs_f;
  row.bound = cap;
  row.trials = trials;
  row.pass = profile.p99_abs_f <= cap;
  out.rows.push_back(row);
  out.extra["d"] = d;
  out.extra["n"] = n;
  out.extra["eta"] = eta;
  out.extra["directions"] = dirs;
  out.extra["p99_abs_f"] = profile.p99_abs_f;
  out.extra["max_abs_f"] = profile.max_abs_f;
  out.extra["p99_abs_spike"] = profile.p99_abs_spike;
  out.extra["p99_abs_bulk"] = profile.p99_abs_bulk;
  out.extra["resamples"] = profile.resamples;
  out.extra["note"] = "pass requires the 99th percentile of |f| <= bound";
  out.pass = row.pass;
  return out;
}

using LemmaFn = LemmaOutcome (*)(const LemmaArgs&, const RunConfig&);

const std::map<std::string, LemmaFn>& lemma_registry() {
  static const std::map<std::string, LemmaFn> registry = {
      {"chi2", lemma_chi2},
      {"qtilde", lemma_qtilde},
      {"hanson-wright", lemma_hanson_wright},
      {"s-eta", lemma_s_eta},
      {"weibull-sum", lemma_weibull_sum},
      {"gram-deviation", lemma_gram_deviation},
      {"theta-inverse", lemma_theta_inverse},
      {"infty-norm", lemma_infty_norm},
      {"moments", lemma_moments},
      {"moment-growth", lemma_moment_growth},
      {"inverse-perturbation", lemma_inverse_perturbation},
      {"net-profile", lemma_net_profile},
      {"direction-diagnostics", lemma_direction_diagnostics},
  };
  return registry;
}

std::string lemma_csv(const LemmaOutcome& o) {
  std::string s = "threshold,empirical,bound,trials\n";
  for (const auto& r : o.rows)
    s += fmt17(r.threshold) + "," + fmt17(r.empirical) + "," +
         fmt17(r.bound) + "," + std::to_string(r.trials) + "\n";
  return s;
}

ordered_json lemma_json(const LemmaOutcome& o, const RunConfig& cfg) {
  ordered_json j;
  j["lemma"] = o.name;
  j["master_seed"] = cfg.master_seed;
  j["pass"] = o.pass;
  j["rows"] = ordered_json::array();
  for (const auto& r : o.rows) {
    ordered_json row;
    row["threshold"] = r.threshold;
    row["empirical"] = r.empirical;
    row["bound"] = r.bound;
    row["trials"] = r.trials;
    row["pass"] = r.pass;
    j["rows"].push_back(row);
  }
  for (auto it = o.extra.begin(); it != o.extra.end(); ++it)
    j[it.key()] = it.value();
  return j;
}

int run_lemma(const LemmaArgs& args, const RunConfig& cfg,
              const OutputOpts& out) {
  auto it = lemma_registry().find(args.name);
  if (it == lemma_registry().end()) {
    std::string names;
    for (const auto& [k, fn] : lemma_registry()) {
      (void)fn;
      names += names.empty() ? k : ", " + k;
    }
    throw CLI::ValidationError("--name",
                               "unknown lemma '" + args.name +
                                   "'; valid names: " + names);
  }
  LemmaOutcome outcome = it->second(args, cfg);
  std::string payload = out.format == "json"
                            ? lemma_json(outcome, cfg).dump(2) + "\n"
                            : lemma_csv(outcome);
  emit_payload(out, payload, cfg.master_seed, cfg.threads);
  if (!outcome.pass) {
    std::cerr << "lemma " << outcome.name << ": bound check FAILED\n";
    return kExitBoundFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dual
// ---------------------------------------------------------------------------

struct DualArgs {
  long long d = 0;
  long long n = 0;
  long long trial = 0;
  int iters = 2000;
  int restarts = 8;
  double step_scale = 0.1;
  long long probes = 0;
};

int run_dual(const DualArgs& args, const RunConfig& cfg,
             const OutputOpts& out) {
  // The cloud matches fit trial (d, n, master_seed, trial), so a dual search
  // can be read side by side with the corresponding fit record.
  ellip::RandomStream cloud_stream = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kFitTrial,
      static_cast<std::uint64_t>(args.trial));
  ellip::PointCloud cloud =
      ellip::sample_gaussian_cloud(args.d, args.n, cloud_stream);

  ellip::dual::SearchOptions opts;
  opts.max_iters = args.iters;
  opts.restarts = args.restarts;
  opts.step_scale = args.step_scale;
  opts.threads = cfg.threads;
  ellip::RandomStream search_stream = ellip::RandomStream::for_purpose(
      cfg.master_seed, ellip::purpose::kDualSearch,
      static_cast<std::uint64_t>(args.trial));
  ellip::dual::SearchResult result =
      ellip::dual::certificate_search(cloud, opts, search_stream);

  ordered_json j;
  j["d"] = args.d;
  j["n"] = args.n;
  j["master_seed"] = cfg.master_seed;
  j["trial"] = args.trial;
  j["iters"] = args.iters;
  j["restarts"] = args.restarts;
  j["step_scale"] = args.step_scale;
  j["certificate_found"] = result.best.valid;
  j["lambda_max"] = result.best.lambda_max;
  j["sum_violation"] = result.best.sum_violation;
  j["best_restart"] = result.best_restart;
  j["z"] = std::vector<double>(result.best.z.begin(), result.best.z.end());

  // Decimate the running-minimum trace to at most ~100 points.
  const std::size_t stride = std::max<std::size_t>(1, result.trace.size() / 100);
  ordered_json trace = ordered_json::array();
  for (std::size_t i = 0; i < result.trace.size(); i += stride)
    trace.push_back(result.trace[i]);
  if (!result.trace.empty() && (result.trace.size() - 1) % stride != 0)
    trace.push_back(result.trace.back());
  j["trace"] = trace;

  if (args.probes > 0) {
    ellip::fitter::FitResult fit = ellip::fitter::solve_identity_perturbation(
        cloud, ellip::fitter::Tolerances{cfg.tol_residual, cfg.tol_psd});
    if (fit.success) {
      ellip::RandomStream probe_stream = ellip::RandomStream::for_purpose(
          cfg.master_seed, ellip::purpose::kDualProbe,
          static_cast<std::uint64_t>(args.trial));
      std::int64_t violations = ellip::dual::weak_duality_probe(
          cloud, fit, args.probes, probe_stream);
      j["probe"] = {{"probes", args.probes}, {"violations", violations}};
    } else {
      j["probe"] = {{"skipped", "fit did not succeed on this cloud"}};
    }
  }
  emit_payload(out, j.dump(2) + "\n", cfg.master_seed, cfg.threads);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_argv.emplace_back(argv[i]);

  CLI::App app{"Ellipsoid fitting experiments: identity-perturbation fits, "
               "phase diagrams, concentration checks, dual certificates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ELLIPFIT_VERSION);

  RunConfig cfg;
  OutputOpts out;
  std::string config_path;

  // Global options, shared by all subcommands.
  app.add_option("--seed", cfg.master_seed, "Master seed")->capture_default_str();
  app.add_option("--threads", cfg.threads,
                 "Worker threads (<= 0 means hardware concurrency)")
      ->capture_default_str();
  app.add_option("--out", out.path, "Write payload to this file (stdout if absent)");
  app.add_option("--format", out.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--config", config_path, "JSON config file");
  for (auto* opt : app.get_options()) opt->configurable(false);
  app.fallthrough();

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Run one fitting trial");
  fit_cmd->add_option("--d", fit_args.d, "Ambient dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--n", fit_args.n, "Number of points")
      ->required()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--trial", fit_args.trial, "Trial index")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_flag("--with-q", fit_args.with_q, "Include the weight vector");
  fit_cmd->add_flag("--with-theta-norm", fit_args.with_theta_norm,
                    "Include |Theta^{-1}|_op (costs an eigendecomposition)");
  fit_cmd->add_option("--tol-residual", cfg.tol_residual, "Residual tolerance");
  fit_cmd->add_option("--tol-psd", cfg.tol_psd, "PSD tolerance");

  std::vector<long long> phase_d, phase_n;
  std::vector<double> phase_ratio;
  auto* phase_cmd =
      app.add_subcommand("phase", "Success frequencies over a (d, n) grid");
  phase_cmd->add_option("--d", phase_d, "Dimensions")->delimiter(',');
  phase_cmd->add_option("--n", phase_n, "Point counts")->delimiter(',');
  phase_cmd->add_option("--ratio", phase_ratio, "n as a fraction of d^2")
      ->delimiter(',');
  phase_cmd->add_option("--trials", cfg.trials, "Trials per cell");
  phase_cmd->add_option("--tol-residual", cfg.tol_residual, "Residual tolerance");
  phase_cmd->add_option("--tol-psd", cfg.tol_psd, "PSD tolerance");

  LemmaArgs lemma_args;
  auto* lemma_cmd =
      app.add_subcommand("lemma", "Empirical check of one concentration lemma");
  lemma_cmd->add_option("--name", lemma_args.name, "Lemma name")->required();
  lemma_cmd->add_option("--d", lemma_args.d, "Ambient dimension");
  lemma_cmd->add_option("--n", lemma_args.n, "Number of points");
  lemma_cmd->add_option("--eta", lemma_args.eta, "Overlap threshold");
  lemma_cmd->add_option("--trials", lemma_args.trials, "Monte Carlo trials");
  lemma_cmd->add_option("--directions", lemma_args.directions,
                        "Sampled directions");
  lemma_cmd->add_option("--k-max", lemma_args.k_max, "Largest moment order");
  lemma_cmd->add_option("--grid", lemma_args.grid,
                        "Threshold grid (comma separated)")
      ->delimiter(',');
  lemma_cmd->add_option("--constant", lemma_args.constant,
                        "Bound constant override");
  lemma_cmd->add_option("--weibull-q", lemma_args.weibull_q,
                        "Weibull exponent");
  lemma_cmd->add_option("--min-freq", lemma_args.min_freq,
                        "Required event frequency");
  lemma_cmd->add_option("--cap", lemma_args.cap, "Profile/ratio cap");

  DualArgs dual_args;
  auto* dual_cmd =
      app.add_subcommand("dual", "Search for a dual infeasibility certificate");
  dual_cmd->add_option("--d", dual_args.d, "Ambient dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  dual_cmd->add_option("--n", dual_args.n, "Number of points")
      ->required()
      ->check(CLI::PositiveNumber);
  dual_cmd->add_option("--trial", dual_args.trial, "Trial index")
      ->check(CLI::NonNegativeNumber);
  dual_cmd->add_option("--iters", dual_args.iters, "Subgradient iterations")
      ->check(CLI::PositiveNumber);
  dual_cmd->add_option("--restarts", dual_args.restarts, "Random restarts")
      ->check(CLI::PositiveNumber);
  dual_cmd->add_option("--step-scale", dual_args.step_scale, "Step size scale");
  dual_cmd->add_option("--probes", dual_args.probes,
                       "Weak-duality probes against the fit on this cloud");

  try {
    app.parse(argc, argv);

    // Config file fills in whatever the command line did not set explicitly.
    if (!config_path.empty()) {
      RunConfig file_cfg;
      load_config_file(config_path, file_cfg);
      if (app.count("--seed") == 0) cfg.master_seed = file_cfg.master_seed;
      if (app.count("--threads") == 0) cfg.threads = file_cfg.threads;
      if (out.path.empty()) out.path = file_cfg.output_path;
      if (out.format.empty() && !file_cfg.output_format.empty()) {
        if (file_cfg.output_format != "csv" && file_cfg.output_format != "json")
          throw CLI::ValidationError("--config",
                                     "output_format must be csv or json");
        out.format = file_cfg.output_format;
      }
      if (phase_cmd->count("--trials") == 0) cfg.trials = file_cfg.trials;
      if (phase_cmd->count("--tol-residual") == 0 &&
          fit_cmd->count("--tol-residual") == 0)
        cfg.tol_residual = file_cfg.tol_residual;
      if (phase_cmd->count("--tol-psd") == 0 && fit_cmd->count("--tol-psd") == 0)
        cfg.tol_psd = file_cfg.tol_psd;
      if (phase_d.empty()) phase_d = file_cfg.d_values;
      if (phase_n.empty()) phase_n = file_cfg.n_values;
      if (phase_ratio.empty()) phase_ratio = file_cfg.ratios;
    }
    cfg.d_values = phase_d;
    cfg.n_values = phase_n;
    cfg.ratios = phase_ratio;

    if (fit_cmd->parsed()) {
      if (out.format.empty()) out.format = "json";
      if (out.format != "json")
        throw CLI::ValidationError("--format", "fit emits JSON only");
      return run_fit(fit_args, cfg, out);
    }
    if (phase_cmd->parsed()) {
      if (out.format.empty()) out.format = "csv";
      return run_phase(cfg, out);
    }
    if (lemma_cmd->parsed()) {
      if (out.format.empty()) out.format = "csv";
      return run_lemma(lemma_args, cfg, out);
    }
    if (dual_cmd->parsed()) {
      if (out.format.empty()) out.format = "json";
      if (out.format != "json")
        throw CLI::ValidationError("--format", "dual emits JSON only");
      return run_dual(dual_args, cfg, out);
    }
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ellip::PreconditionError& e) {
    std::cerr << "invalid request: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ellip::InvalidShapeError& e) {
    std::cerr << "invalid request: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

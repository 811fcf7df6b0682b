// Copyright 2026 The dmosum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// dmosum: calibrate thresholds, generate data, run the monitor on a CSV file,
// or run one of the replicated simulation studies.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 data error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmosum/dmosum.hpp"

namespace {

using namespace dmosum;

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

const std::vector<std::string> kExperiments{"size", "sweep", "bandwidth", "training", "ar1"};

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::InvalidScenario:
    case Errc::InsufficientReps:
    case Errc::SearchRangeEmpty:
      return kExitConfig;
    case Errc::TooShort:
    case Errc::DegenerateTraining:
    case Errc::NonPositiveLRV:
    case Errc::WindowNotFull:
    case Errc::SourceExhausted:
    case Errc::ParseError:
      return kExitData;
    case Errc::NoTransition:
      return kExitOther;
  }
  return kExitOther;
}

// ---- key tables -------------------------------------------------------------

const char* const kSrcPlumbing = "default";
const char* const kSrcTables = "default: critical-value tables (beta 1/2, T~ 10, 5000 reps, 10000 increments)";
const char* const kSrcStudy = "default: simulation study (d 100, m 200, h 100, T 10000, tau 5000, alpha 0.05)";
const char* const kSrcSize = "default: empirical-size table (m 200, T~ 10, beta 1/2, 1000 reps)";

void add(std::vector<KeyDefault>& keys, std::string key, std::string value, std::string source) {
  for (auto& k : keys) {
    if (k.key == key) {
      k.value = std::move(value);
      k.source = std::move(source);
      return;
    }
  }
  keys.push_back({std::move(key), std::move(value), std::move(source)});
}

void add_common(std::vector<KeyDefault>& keys) {
  add(keys, "seed", "20240501", kSrcPlumbing);
  add(keys, "threads", "0", "default: all hardware threads (never affects results)");
  add(keys, "out", "", "default: standard output");
  add(keys, "echo", "", "default: <out>.config, or standard error without out");
  add(keys, "weight", "log", "default: rho(t) = max(1, log(1+t))^(-1/2)");
}

void add_monitor(std::vector<KeyDefault>& keys, const char* source) {
  add(keys, "d", "100", source);
  add(keys, "m", "200", source);
  add(keys, "h", "100", source);
  add(keys, "t_tilde", "10", source);
  add(keys, "regime", "distributed", kSrcPlumbing);
  add(keys, "c_local", "3.44", "default: critical-value tables (alpha 0.05)");
  add(keys, "c_global", "7.16", "default: critical-value tables (alpha 0.05, c_local 3.44)");
  add(keys, "scale", "plain", "default: sample standard deviation (divisor m)");
  add(keys, "kernel", "bartlett", kSrcPlumbing);
  add(keys, "bandwidth", "0", "default: smallest l with l^3 >= m");
  add(keys, "lrv_fallback", "error", kSrcPlumbing);
}

void add_scenario(std::vector<KeyDefault>& keys, const char* source) {
  add(keys, "shift", "none", kSrcPlumbing);
  add(keys, "delta", "1", source);
  add(keys, "p", "", "default: 0 without a shift, d otherwise");
  add(keys, "tau", "", "default: middle of the monitoring period");
  add(keys, "noise", "iid", kSrcPlumbing);
  add(keys, "phi", "0", kSrcPlumbing);
  add(keys, "total_length", "", "default: m + floor(m * t_tilde)");
}

std::vector<KeyDefault> calibrate_keys() {
  std::vector<KeyDefault> k;
  add_common(k);
  add(k, "alpha", "0.1,0.05,0.01", kSrcTables);
  add(k, "c_local", "0,3.15,3.44,4.05", kSrcTables);
  add(k, "d", "100", "default: stream count of the simulation study");
  add(k, "beta", "0.5", kSrcTables);
  add(k, "t_tilde", "10", kSrcTables);
  add(k, "reps", "5000", kSrcTables);
  add(k, "increments", "10000", kSrcTables);
  return k;
}

std::vector<KeyDefault> generate_keys() {
  std::vector<KeyDefault> k;
  add_common(k);
  add(k, "d", "100", kSrcStudy);
  add(k, "m", "200", kSrcStudy);
  add(k, "t_tilde", "10", kSrcSize);
  add_scenario(k, kSrcStudy);
  add(k, "replication", "0", kSrcPlumbing);
  add(k, "sidecar", "", "default: none");
  add(k, "delimiter", ",", kSrcPlumbing);
  add(k, "header", "false", kSrcPlumbing);
  return k;
}

std::vector<KeyDefault> detect_keys() {
  std::vector<KeyDefault> k;
  add_common(k);
  add(k, "data", "", "required");
  add_monitor(k, kSrcSize);
  add(k, "delimiter", ",", kSrcPlumbing);
  add(k, "header", "auto", kSrcPlumbing);
  add(k, "plot_data", "", "default: none (per-step global statistic trace)");
  return k;
}

std::vector<KeyDefault> experiment_keys(const std::string& name) {
  std::vector<KeyDefault> k;
  add_common(k);
  add(k, "experiment", name, "command line");
  add(k, "reps", "1000", kSrcStudy);
  add(k, "alpha", "0.05", kSrcStudy);
  add(k, "plot_data", "", "default: none (long-format copy of the table)");
  add(k, "calibration_reps", "1000", kSrcPlumbing);
  add(k, "increments", "10000", kSrcTables);
  add_monitor(k, kSrcStudy);
  if (name == "size") {
    add(k, "t_tilde", "10", kSrcSize);
    add(k, "c_local", "3.15,3.44,4.05,0", kSrcSize);
    add(k, "c_global", "7.89,7.16,6.02,14.4", kSrcSize);
  } else if (name == "sweep") {
    add_scenario(k, kSrcStudy);
    add(k, "t_tilde", "49", kSrcStudy);
    add(k, "tau", "5000", kSrcStudy);
    add(k, "shift", "fixed", kSrcStudy);
    add(k, "delta", "0.25,0.5,0.75,1,1.5,2", kSrcStudy);
    add(k, "reps", "500", kSrcStudy);
    add(k, "c_local", "0,3.15,3.44,4.05", kSrcTables);
    add(k, "c_global", "auto", "default: limit-process calibration at alpha for each c_local");
  } else if (name == "bandwidth") {
    add_scenario(k, "default: window-recovery example (m 200, d 100, T 1000, tau 600)");
    add(k, "t_tilde", "4", "default: window-recovery example (T 1000)");
    add(k, "tau", "600", "default: window-recovery example");
    add(k, "shift", "fixed", kSrcPlumbing);
    add(k, "reps", "500", "default: window-recovery example");
    add(k, "h0", "50", "default: window-recovery example");
    add(k, "h_stride", "10", kSrcPlumbing);
    add(k, "delta0", "auto", "default: middle of the centralized delay transition");
    add(k, "delta_grid", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1", kSrcPlumbing);
    add(k, "c_global", "empirical", "default: finite-sample calibration under the iid null for each window");
  } else if (name == "training") {
    add(k, "h", "50", "default: training-size table");
    add(k, "m_values", "80,100,500,1000", "default: training-size table");
    add(k, "total_length", "6000", "default: training-size table");
    add(k, "c_global", "9.039,8.159,6.014,5.708", "default: training-size table");
  } else if (name == "ar1") {
    add_scenario(k, kSrcStudy);
    add(k, "t_tilde", "49", kSrcStudy);
    add(k, "tau", "5000", kSrcStudy);
    add(k, "shift", "fixed", kSrcStudy);
    add(k, "phi", "0,0.25,0.5,0.75", "default: autocorrelation table");
    add(k, "p", "100,50,10", "default: autocorrelation table");
    add(k, "delta", "0.5,1", "default: autocorrelation table");
    add(k, "methods", "none,inflate,lrv", "default: autocorrelation table");
    add(k, "lrv_thresholds", "calibrated", "default: c_global recalibrated under the iid null with the LRV scale");
  }
  return k;
}

// ---- config interpretation ---------------------------------------------------

WeightFn weight_from(const RunConfig& cfg) {
  return cfg.choice("weight", {"log", "constant"}) == "log" ? WeightFn::log_weight() : WeightFn::constant();
}

Kernel kernel_from(const RunConfig& cfg) {
  const auto& k = cfg.choice("kernel", {"bartlett", "truncated", "parzen"});
  if (k == "truncated") return Kernel::Truncated;
  if (k == "parzen") return Kernel::Parzen;
  return Kernel::Bartlett;
}

long positive(const RunConfig& cfg, const std::string& key, long min = 1) {
  const long v = cfg.integer(key);
  if (v < min) RunConfig::fail(key, "must be >= " + std::to_string(min));
  return v;
}

MonitorConfig monitor_from(const RunConfig& cfg, bool thresholds = true) {
  MonitorConfig c;
  c.d = positive(cfg, "d");
  c.m = positive(cfg, "m", 2);
  c.h = positive(cfg, "h");
  if (c.h > c.m) RunConfig::fail("h", "must be <= m");
  c.T_tilde = cfg.real("t_tilde");
  if (!(c.T_tilde > 0.0) || !std::isfinite(c.T_tilde)) RunConfig::fail("t_tilde", "must be positive");
  if (c.horizon() < 1) RunConfig::fail("t_tilde", "floor(m * t_tilde) must be >= 1");
  c.weight = weight_from(cfg);
  if (thresholds) {
    const double c_local = cfg.real("c_local");
    if (!(c_local >= 0.0)) RunConfig::fail("c_local", "must be >= 0");
    c.regime = cfg.choice("regime", {"distributed", "centralized"}) == "centralized" ? Regime::centralized()
                                                                                     : Regime::distributed(c_local);
    c.c_global = cfg.real("c_global");
    if (!(c.c_global >= 0.0)) RunConfig::fail("c_global", "must be >= 0");
  }
  c.scale.kind = cfg.choice("scale", {"plain", "lrv"}) == "lrv" ? ScaleKind::LongRun : ScaleKind::Plain;
  c.scale.kernel = kernel_from(cfg);
  c.scale.bandwidth = positive(cfg, "bandwidth", 0);
  c.scale.fallback = cfg.choice("lrv_fallback", {"error", "plain"}) == "plain" ? LrvFallback::UsePlain
                                                                               : LrvFallback::Error;
  c.validate();
  return c;
}

long total_length_from(const RunConfig& cfg, long m, double t_tilde) {
  if (cfg.has("total_length")) return positive(cfg, "total_length", m + 1);
  return m + static_cast<long>(std::floor(static_cast<double>(m) * t_tilde + 1e-9));
}

/// Scenario skeleton; `p` and the shift size are filled per cell where lists apply.
Scenario scenario_from(const RunConfig& cfg, long d, long m, double t_tilde, bool single_values) {
  Scenario s;
  s.d = d;
  s.m = m;
  s.total_length = total_length_from(cfg, m, t_tilde);
  const auto& kind = cfg.choice("shift", {"none", "fixed", "random"});
  if (kind != "none") {
    const double value = single_values ? cfg.real("delta") : 0.0;
    s.shift = kind == "fixed" ? Shift::fixed(value) : Shift::random_gaussian(value);
    s.p = single_values && cfg.has("p") ? cfg.integer("p") : d;
    s.tau = cfg.has("tau") ? cfg.integer("tau") : m + (s.total_length - m) / 2;
  }
  if (cfg.choice("noise", {"iid", "ar1"}) == "ar1") {
    const double phi = single_values ? cfg.real("phi") : 0.0;
    s.noise = Noise::ar1(phi);
  }
  return s;
}

std::uint32_t replication_from(const RunConfig& cfg) {
  const long r = cfg.integer("replication");
  if (r < 0 || r > 0xffffffffL) RunConfig::fail("replication", "must fit in 32 bits");
  return static_cast<std::uint32_t>(r);
}

char delimiter_from(const RunConfig& cfg) {
  const std::string& v = cfg.str("delimiter");
  if (v == "tab" || v == "\\t") return '\t';
  if (v.size() != 1) RunConfig::fail("delimiter", "expected a single character or 'tab'");
  return v[0];
}

unsigned threads_from(const RunConfig& cfg) { return static_cast<unsigned>(positive(cfg, "threads", 0)); }

std::string cell(double v) { return format_double(v); }
std::string cell(long v) { return std::to_string(v); }

// ---- output ------------------------------------------------------------------

class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw Error(Errc::InvalidArgument, "key 'out': cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_file(const std::string& key, const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "key '" + key + "': cannot open '" + path + "' for writing");
  table.write_csv(out);
}

void write_echo(const RunConfig& cfg, const std::string& command) {
  std::string path = cfg.str("echo");
  if (path.empty() && cfg.has("out")) path = cfg.str("out") + ".config";
  std::ostringstream text;
  text << "# dmosum " << command << " configuration echo; replay with --config\n";
  cfg.write_echo(text, {"threads"});
  if (path.empty()) {
    std::cerr << text.str();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "key 'echo': cannot open '" + path + "' for writing");
  out << text.str();
}

// ---- commands ----------------------------------------------------------------

void cmd_calibrate(const RunConfig& cfg) {
  const auto alphas = cfg.reals("alpha");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) RunConfig::fail("alpha", "every value must lie in (0, 1)");
  }
  const auto c_locals = cfg.reals("c_local");
  for (double c : c_locals) {
    if (!(c >= 0.0)) RunConfig::fail("c_local", "every value must be >= 0");
  }
  const long d = positive(cfg, "d");
  const double beta = cfg.real("beta");
  if (!(beta > 0.0 && beta <= 1.0)) RunConfig::fail("beta", "must lie in (0, 1]");
  const double t_tilde = cfg.real("t_tilde");
  if (!(t_tilde > 0.0) || !std::isfinite(t_tilde)) RunConfig::fail("t_tilde", "must be positive");
  const long reps = cfg.integer("reps");
  if (reps < 100) RunConfig::fail("reps", "must be >= 100");
  const long increments = positive(cfg, "increments", 10);
  const auto seed = cfg.u64("seed");

  const LimitGrid grid = LimitGrid::make(beta, t_tilde, increments);
  std::vector<Regime> regimes;
  for (double c : c_locals) regimes.push_back(Regime::distributed(c));
  const auto samples = simulate_sup_samples(d, grid, regimes, reps, seed, {weight_from(cfg), threads_from(cfg)});

  Table table({"alpha", "c_local", "c_global", "d", "beta", "T_tilde", "reps", "seed"});
  for (double a : alphas) {
    for (std::size_t v = 0; v < c_locals.size(); ++v) {
      table.add_row({cell(a), cell(c_locals[v]), cell(empirical_quantile(samples.values[v], a)), cell(d), cell(beta),
                     cell(t_tilde), cell(reps), std::to_string(seed)});
    }
  }
  Sink sink(cfg.str("out"));
  table.write_csv(sink.stream());
}

void cmd_generate(const RunConfig& cfg) {
  const long d = positive(cfg, "d");
  const long m = positive(cfg, "m", 2);
  const double t_tilde = cfg.real("t_tilde");
  if (!(t_tilde > 0.0)) RunConfig::fail("t_tilde", "must be positive");
  const Scenario s = scenario_from(cfg, d, m, t_tilde, true);
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(Errc::InvalidScenario, std::string(e.what()) + " (keys shift, p, tau, phi, m)");
  }
  const char delimiter = delimiter_from(cfg);
  const bool header = cfg.flag("header");
  const auto seed = cfg.u64("seed");
  const auto generated = generate(s, seed, replication_from(cfg));
  Sink sink(cfg.str("out"));
  write_matrix_csv(sink.stream(), generated.data, delimiter, header);
  if (cfg.has("sidecar")) {
    std::ofstream out(cfg.str("sidecar"), std::ios::binary);
    if (!out) RunConfig::fail("sidecar", "cannot open '" + cfg.str("sidecar") + "' for writing");
    write_shift_sidecar(out, s, generated.deltas);
  }
}

void cmd_detect(const RunConfig& cfg) {
  if (!cfg.has("data")) RunConfig::fail("data", "a data file is required");
  MonitorConfig config = monitor_from(cfg);
  config.record_trace = cfg.has("plot_data");
  config.record_transmissions = config.record_trace;
  const char delimiter = delimiter_from(cfg);
  const auto& header = cfg.choice("header", {"auto", "true", "false"});
  const HeaderMode mode = header == "auto" ? HeaderMode::Auto : header == "true" ? HeaderMode::Present
                                                                                 : HeaderMode::Absent;
  std::ifstream in(cfg.str("data"), std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot open data file '" + cfg.str("data") + "'");
  CsvRowReader reader(in, delimiter, mode);
  const DetectionOutcome outcome = stream_monitor(config, reader);

  Sink sink(cfg.str("out"));
  write_outcome_csv(sink.stream(), outcome);
  if (config.record_trace) {
    Table trace({"k", "global_weighted", "transmissions"});
    const auto& g = *outcome.global_stat_trace;
    for (std::size_t i = 0; i < g.size(); ++i) {
      trace.add_row({cell(static_cast<long>(i + 1)), cell(g[i]), cell(outcome.transmissions_per_step[i])});
    }
    write_file("plot_data", cfg.str("plot_data"), trace);
  }
}

std::vector<Thresholds> paired_thresholds(const RunConfig& cfg) {
  const auto c_locals = cfg.reals("c_local");
  const auto c_globals = cfg.reals("c_global");
  if (c_locals.size() != c_globals.size()) RunConfig::fail("c_global", "needs exactly one value per c_local");
  std::vector<Thresholds> out;
  for (std::size_t i = 0; i < c_locals.size(); ++i) out.push_back({c_locals[i], c_globals[i]});
  return out;
}

void emit(const RunConfig& cfg, const Table& table, std::size_t id_columns) {
  Sink sink(cfg.str("out"));
  table.write_csv(sink.stream());
  if (cfg.has("plot_data")) write_file("plot_data", cfg.str("plot_data"), table.to_long(id_columns));
}

long reps_from(const RunConfig& cfg) { return positive(cfg, "reps"); }

double alpha_from(const RunConfig& cfg) {
  const double a = cfg.real("alpha");
  if (!(a > 0.0 && a < 1.0)) RunConfig::fail("alpha", "must lie in (0, 1)");
  return a;
}

void exp_size(const RunConfig& cfg) {
  const MonitorConfig base = monitor_from(cfg, false);
  Scenario s;
  s.d = base.d;
  s.m = base.m;
  s.total_length = base.m + base.horizon();
  const long reps = reps_from(cfg);
  const ExperimentOptions opts{threads_from(cfg), false};
  Table table({"c_local", "c_global", "reps", "false_alarms", "empirical_size"});
  for (const auto& th : paired_thresholds(cfg)) {
    const auto report = run_experiment(s, with_thresholds(base, th), reps, cfg.u64("seed"), opts);
    table.add_row({cell(th.c_local), cell(th.c_global), cell(reps),
                   cell(std::lround(report.fp_rate * static_cast<double>(reps))), cell(report.fp_rate)});
  }
  emit(cfg, table, 2);
}

std::vector<Thresholds> sweep_thresholds(const RunConfig& cfg, const MonitorConfig& base) {
  if (cfg.str("c_global") != "auto") return paired_thresholds(cfg);
  const auto c_locals = cfg.reals("c_local");
  std::vector<Regime> regimes;
  for (double c : c_locals) regimes.push_back(Regime::distributed(c));
  const LimitGrid grid = LimitGrid::make(base.beta(), base.T_tilde, positive(cfg, "increments", 10));
  const long reps = cfg.integer("calibration_reps");
  if (reps < 100) RunConfig::fail("calibration_reps", "must be >= 100");
  const auto samples = simulate_sup_samples(base.d, grid, regimes, reps, derive_seed(cfg.u64("seed"), 2),
                                            {base.weight, threads_from(cfg)});
  std::vector<Thresholds> out;
  for (std::size_t v = 0; v < c_locals.size(); ++v) {
    out.push_back({c_locals[v], empirical_quantile(samples.values[v], alpha_from(cfg))});
  }
  return out;
}

void exp_sweep(const RunConfig& cfg) {
  const MonitorConfig base = monitor_from(cfg, false);
  const Scenario s = scenario_from(cfg, base.d, base.m, base.T_tilde, false);
  if (!s.alternative()) RunConfig::fail("shift", "the sweep needs fixed or random");
  Scenario cell_scenario = s;
  if (cfg.has("p")) cell_scenario.p = cfg.integer("p");
  const auto shifts = cfg.reals("delta");
  const auto thresholds = sweep_thresholds(cfg, base);
  const auto rows = threshold_sweep(cell_scenario, shifts, thresholds, base, reps_from(cfg), cfg.u64("seed"),
                                    {threads_from(cfg), false});
  Table table({"c_local", "c_global", "shift", "value", "reps", "add", "add_count", "add_capped", "trans_avg",
               "fp_rate", "detect_rate"});
  for (const auto& r : rows) {
    table.add_row({cell(r.thresholds.c_local), cell(r.thresholds.c_global),
                   r.shift_kind == ShiftKind::Fixed ? "fixed" : "random", cell(r.shift), cell(r.report.reps),
                   cell(r.report.add), cell(r.report.add_count), cell(r.report.add_capped), cell(r.report.trans_avg),
                   cell(r.report.fp_rate), cell(r.report.detect_rate)});
  }
  emit(cfg, table, 4);
}

ThresholdProvider bandwidth_provider(const RunConfig& cfg, const MonitorConfig& base) {
  const auto& kind = cfg.choice("c_global", {"empirical", "limit"});
  const long reps = cfg.integer("calibration_reps");
  const double alpha = alpha_from(cfg);
  const auto seed = derive_seed(cfg.u64("seed"), 2);
  const unsigned threads = threads_from(cfg);
  if (kind == "empirical") {
    if (static_cast<double>(reps) * alpha < 10.0) RunConfig::fail("calibration_reps", "reps * alpha must be >= 10");
    return empirical_threshold_provider(base, alpha, reps, seed, threads);
  }
  if (reps < 100) RunConfig::fail("calibration_reps", "must be >= 100");
  const long increments = positive(cfg, "increments", 10);
  auto cache = std::make_shared<std::map<std::pair<double, long>, double>>();
  return [=](double c_local, long h) {
    const auto key = std::make_pair(c_local, h);
    if (auto it = cache->find(key); it != cache->end()) return it->second;
    MonitorConfig cfg_h = base;
    cfg_h.h = h;
    const LimitGrid grid = LimitGrid::make(cfg_h.beta(), base.T_tilde, increments);
    const double c = critical_value_distributed(base.d, alpha, c_local, grid, reps, seed, {base.weight, threads});
    cache->emplace(key, c);
    return c;
  };
}

void exp_bandwidth(const RunConfig& cfg) {
  const MonitorConfig base = monitor_from(cfg, false);
  Scenario s = scenario_from(cfg, base.d, base.m, base.T_tilde, false);
  if (!s.alternative()) RunConfig::fail("shift", "window recovery needs fixed or random");
  if (cfg.has("p")) s.p = cfg.integer("p");
  BandwidthSearch search;
  if (cfg.str("delta0") != "auto") search.delta0 = cfg.real("delta0");
  search.delta_grid = cfg.reals("delta_grid");
  search.h0 = positive(cfg, "h0");
  search.stride = positive(cfg, "h_stride");
  search.c_global_for = bandwidth_provider(cfg, base);
  const ExperimentOptions opts{threads_from(cfg), false};

  Table table({"c_local", "h0", "delta0", "h_star", "reference_delay", "delay_at_h_star", "c_global_at_h_star"});
  Table curve({"c_local", "h", "c_global", "delay"});
  for (double c_local : cfg.reals("c_local")) {
    search.c_local = c_local;
    const auto r = recover_bandwidth(search, s, base, reps_from(cfg), cfg.u64("seed"), opts);
    table.add_row({cell(c_local), cell(search.h0), cell(r.delta0), cell(r.h_star), cell(r.reference_delay),
                   cell(r.delay_at_h_star), cell(search.c_global_for(c_local, r.h_star))});
    for (const auto& [h, delay] : r.curve) {
      curve.add_row({cell(c_local), cell(h), cell(search.c_global_for(c_local, h)), cell(delay)});
    }
  }
  Sink sink(cfg.str("out"));
  table.write_csv(sink.stream());
  if (cfg.has("plot_data")) write_file("plot_data", cfg.str("plot_data"), curve.to_long(2));
}

void exp_training(const RunConfig& cfg) {
  const auto m_values = cfg.integers("m_values");
  if (m_values.empty()) RunConfig::fail("m_values", "at least one training length is required");
  MonitorConfig base = monitor_from(cfg, false);
  const double c_local = cfg.real("c_local");
  if (!(c_local >= 0.0)) RunConfig::fail("c_local", "must be >= 0");
  base.regime = Regime::distributed(c_local);
  const long total = positive(cfg, "total_length", 3);
  for (long m : m_values) {
    if (m < base.h) RunConfig::fail("m_values", "every training length must be >= h");
    if (m >= total) RunConfig::fail("m_values", "every training length must be < total_length");
  }
  const unsigned threads = threads_from(cfg);
  TrainingThresholdProvider provider;
  if (cfg.str("c_global") == "auto") {
    const double alpha = alpha_from(cfg);
    const long reps = cfg.integer("calibration_reps");
    if (static_cast<double>(reps) * alpha < 10.0) RunConfig::fail("calibration_reps", "reps * alpha must be >= 10");
    const auto seed = derive_seed(cfg.u64("seed"), 3);
    provider = [=](long m) {
      MonitorConfig c = base;
      c.m = m;
      c.T_tilde = static_cast<double>(total - m) / static_cast<double>(m);
      return empirical_null_thresholds(c, Noise::iid(), alpha, reps, seed, threads).c_global;
    };
  } else {
    const auto values = cfg.reals("c_global");
    if (values.size() != m_values.size()) RunConfig::fail("c_global", "needs one value per m_values entry, or auto");
    std::map<long, double> by_m;
    for (std::size_t i = 0; i < values.size(); ++i) by_m[m_values[i]] = values[i];
    provider = [by_m](long m) { return by_m.at(m); };
  }
  const auto rows = training_size_study(m_values, base, total, provider, reps_from(cfg), cfg.u64("seed"),
                                        {threads, false});
  Table table({"m", "c_global", "empirical_size", "mse_mean", "mse_sd"});
  for (const auto& r : rows) {
    table.add_row({cell(r.m), cell(r.c_global), cell(r.empirical_size), cell(r.mse_mean), cell(r.mse_sd)});
  }
  emit(cfg, table, 1);
}

void exp_ar1(const RunConfig& cfg) {
  const MonitorConfig base = monitor_from(cfg, false);
  Scenario s = scenario_from(cfg, base.d, base.m, base.T_tilde, false);
  if (!s.alternative()) RunConfig::fail("shift", "the autocorrelation study needs a fixed shift");
  AutocorrelationPlan plan;
  plan.phis = cfg.reals("phi");
  for (double phi : plan.phis) {
    if (!(std::fabs(phi) < 1.0)) RunConfig::fail("phi", "every value must satisfy |phi| < 1");
  }
  plan.methods.clear();
  for (auto name : split(cfg.str("methods"), ',')) {
    name = trim(name);
    if (name == "none") plan.methods.push_back(Adjustment::NoAdjust);
    else if (name == "inflate") plan.methods.push_back(Adjustment::InflateThresholds);
    else if (name == "lrv") plan.methods.push_back(Adjustment::LRV);
    else RunConfig::fail("methods", "expected a list of: none, inflate, lrv");
  }
  plan.ps = cfg.integers("p");
  plan.deltas = cfg.reals("delta");
  plan.iid = {cfg.real("c_local"), cfg.real("c_global")};
  plan.alpha = alpha_from(cfg);
  plan.calibration_reps = cfg.integer("calibration_reps");
  if (static_cast<double>(plan.calibration_reps) * plan.alpha < 10.0) {
    RunConfig::fail("calibration_reps", "reps * alpha must be >= 10");
  }
  plan.lrv_bandwidth = base.scale.bandwidth;
  plan.calibrate_lrv = cfg.choice("lrv_thresholds", {"calibrated", "given"}) == "calibrated";
  const long reps = reps_from(cfg);
  const auto rows = autocorrelation_study(plan, s, base, reps, cfg.u64("seed"), {threads_from(cfg), false});
  Table table({"phi", "p", "delta", "method", "c_global", "reps", "fp_rate", "fp_per_1000", "add", "add_count",
               "add_capped", "trans_avg", "detect_rate"});
  for (const auto& r : rows) {
    table.add_row({cell(r.phi), cell(r.p), cell(r.delta), adjustment_name(r.method), cell(r.c_global),
                   cell(r.report.reps), cell(r.report.fp_rate), cell(1000.0 * r.report.fp_rate), cell(r.report.add),
                   cell(r.report.add_count), cell(r.report.add_capped), cell(r.report.trans_avg),
                   cell(r.report.detect_rate)});
  }
  emit(cfg, table, 4);
}

// ---- command-line plumbing -----------------------------------------------------

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;  // config key -> text
};

void add_flag(CLI::App* app, Flags& flags, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help);
}

void add_shared_flags(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config, "flat key=value config file");
  app->add_option("--set", flags.sets, "override one key (key=value); repeatable");
  add_flag(app, flags, "--seed", "seed", "master seed");
  add_flag(app, flags, "--threads", "threads", "worker cap (0 = all cores); results do not depend on it");
  add_flag(app, flags, "--out", "out", "output CSV path (default stdout)");
  add_flag(app, flags, "--echo", "echo", "config echo path");
  add_flag(app, flags, "--d", "d", "number of streams");
}

RunConfig resolve(const std::vector<KeyDefault>& keys, const Flags& flags) {
  RunConfig cfg(keys);
  if (!flags.config.empty()) cfg.load_file(flags.config);
  for (const auto& [key, value] : flags.values) {
    if (!cfg.known(key)) throw Error(Errc::InvalidArgument, "option for key '" + key + "' does not apply here");
    cfg.set(key, value, "command line");
  }
  for (const auto& s : flags.sets) cfg.set_assignment(s, "command line");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dmosum: communication-efficient MOSUM changepoint monitoring"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  Flags cal_flags, gen_flags, det_flags, exp_flags;

  auto* cal = app.add_subcommand("calibrate", "Monte Carlo critical values for the global threshold");
  add_shared_flags(cal, cal_flags);
  add_flag(cal, cal_flags, "--alpha", "alpha", "comma-separated significance levels");
  add_flag(cal, cal_flags, "--c-local", "c_local", "comma-separated local thresholds");
  add_flag(cal, cal_flags, "--reps", "reps", "Monte Carlo replications");
  add_flag(cal, cal_flags, "--beta", "beta", "h/m");
  add_flag(cal, cal_flags, "--t-tilde", "t_tilde", "horizon factor");

  auto* gen = app.add_subcommand("generate", "simulate a data set as CSV");
  add_shared_flags(gen, gen_flags);
  add_flag(gen, gen_flags, "--m", "m", "training length");
  add_flag(gen, gen_flags, "--t-tilde", "t_tilde", "horizon factor");
  add_flag(gen, gen_flags, "--delimiter", "delimiter", "field delimiter");
  add_flag(gen, gen_flags, "--header", "header", "write a header row (true/false)");

  auto* det = app.add_subcommand("detect", "run the monitor over a CSV file");
  add_shared_flags(det, det_flags);
  add_flag(det, det_flags, "data,--data", "data", "CSV data file");
  add_flag(det, det_flags, "--m", "m", "training length");
  add_flag(det, det_flags, "--h", "h", "window length");
  add_flag(det, det_flags, "--t-tilde", "t_tilde", "horizon factor");
  add_flag(det, det_flags, "--c-local", "c_local", "local threshold");
  add_flag(det, det_flags, "--c-global", "c_global", "global threshold");
  add_flag(det, det_flags, "--delimiter", "delimiter", "field delimiter");
  add_flag(det, det_flags, "--header", "header", "auto, true or false");
  add_flag(det, det_flags, "--plot-data", "plot_data", "per-step trace CSV path");

  std::string experiment;
  auto* exp = app.add_subcommand("experiment", "run a replicated simulation study");
  add_shared_flags(exp, exp_flags);
  exp->add_option("name", experiment, "size, sweep, bandwidth, training or ar1")->required();
  add_flag(exp, exp_flags, "--alpha", "alpha", "significance level");
  add_flag(exp, exp_flags, "--c-local", "c_local", "local threshold(s)");
  add_flag(exp, exp_flags, "--c-global", "c_global", "global threshold(s)");
  add_flag(exp, exp_flags, "--reps", "reps", "replications per cell");
  add_flag(exp, exp_flags, "--m", "m", "training length");
  add_flag(exp, exp_flags, "--h", "h", "window length");
  add_flag(exp, exp_flags, "--t-tilde", "t_tilde", "horizon factor");
  add_flag(exp, exp_flags, "--plot-data", "plot_data", "long-format CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (cal->parsed()) {
      const RunConfig cfg = resolve(calibrate_keys(), cal_flags);
      cmd_calibrate(cfg);
      write_echo(cfg, "calibrate");
    } else if (gen->parsed()) {
      const RunConfig cfg = resolve(generate_keys(), gen_flags);
      cmd_generate(cfg);
      write_echo(cfg, "generate");
    } else if (det->parsed()) {
      const RunConfig cfg = resolve(detect_keys(), det_flags);
      cmd_detect(cfg);
      write_echo(cfg, "detect");
    } else if (exp->parsed()) {
      if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end()) {
        std::cerr << "error: unknown experiment '" << experiment << "'; valid names: size, sweep, bandwidth, "
                  << "training, ar1\n";
        return kExitConfig;
      }
      const RunConfig cfg = resolve(experiment_keys(experiment), exp_flags);
      if (cfg.str("experiment") != experiment) RunConfig::fail("experiment", "differs from the command line name");
      if (experiment == "size") exp_size(cfg);
      else if (experiment == "sweep") exp_sweep(cfg);
      else if (experiment == "bandwidth") exp_bandwidth(cfg);
      else if (experiment == "training") exp_training(cfg);
      else exp_ar1(cfg);
      write_echo(cfg, "experiment " + experiment);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what();
    if (e.row()) std::cerr << " (row " << *e.row() << ")";
    std::cerr << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return 0;
}

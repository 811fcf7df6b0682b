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
// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the exit status is nonzero if any check fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dmosum/dmosum.hpp"

#ifndef DMOSUM_CLI_PATH
#error "DMOSUM_CLI_PATH must name the dmosum executable"
#endif

namespace {

using namespace dmosum;

constexpr std::uint64_t kSeed = 20240501;
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Collects the individual checks of one criterion.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    std::ostringstream line;
    line << "    [" << (ok ? "ok" : "FAIL") << "] " << what;
    lines_.push_back(line.str());
  }
  void note(const std::string& what) { lines_.push_back("    " + what); }
  bool ok() const { return ok_; }
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  bool ok_ = true;
  std::vector<std::string> lines_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

bool within(double value, double target, double tol) { return std::fabs(value - target) <= tol; }

MonitorConfig study_config(long d, long m, long h, double t_tilde) {
  MonitorConfig c;
  c.d = d;
  c.m = m;
  c.h = h;
  c.T_tilde = t_tilde;
  return c;
}

Scenario null_scenario(long d, long m, long total) {
  Scenario s;
  s.d = d;
  s.m = m;
  s.total_length = total;
  return s;
}

Scenario shift_scenario(long d, long m, long total, long tau, double delta, long p) {
  Scenario s = null_scenario(d, m, total);
  s.tau = tau;
  s.p = p;
  s.shift = Shift::fixed(delta);
  return s;
}

// 1. Critical values of the limit process.
void critical_values(Verdict& v) {
  const LimitGrid grid = LimitGrid::make(0.5, 10.0, 10000);
  const std::vector<Regime> regimes{Regime::centralized(), Regime::distributed(3.15), Regime::distributed(3.44),
                                    Regime::distributed(4.05)};
  const auto samples = simulate_sup_samples(100, grid, regimes, 5000, kSeed);
  v.note("grid: " + std::to_string(grid.path_increments()) + " increments, " + std::to_string(grid.n_points()) +
         " points");
  const double c10 = empirical_quantile(samples.values[0], 0.10);
  const double c05 = empirical_quantile(samples.values[0], 0.05);
  const double c01 = empirical_quantile(samples.values[0], 0.01);
  v.check(within(c05, 14.4, 0.5), "centralized alpha 0.05: " + fmt(c05) + " (14.4 +- 0.5)");
  v.check(c10 < c05 && c05 < c01, "centralized monotone in alpha: " + fmt(c10) + " < " + fmt(c05) + " < " + fmt(c01) +
                                      " (14.1 / 14.4 / 15.0)");
  const double targets[] = {7.89, 7.16, 6.02};
  for (std::size_t i = 1; i < regimes.size(); ++i) {
    const double c = empirical_quantile(samples.values[i], 0.05);
    v.check(within(c, targets[i - 1], 0.4), "c_local " + fmt(regimes[i].c_local) + ", alpha 0.05: " + fmt(c) +
                                                " (" + fmt(targets[i - 1]) + " +- 0.4)");
  }
}

// 2. Empirical size of the tabulated thresholds.
void empirical_size(Verdict& v) {
  const MonitorConfig base = study_config(100, 200, 100, 10.0);
  const Scenario s = null_scenario(100, 200, 200 + base.horizon());
  const std::vector<std::pair<Regime, double>> rows{{Regime::distributed(3.15), 7.89},
                                                   {Regime::distributed(3.44), 7.16},
                                                   {Regime::distributed(4.05), 6.02},
                                                   {Regime::centralized(), 14.4}};
  for (const auto& [regime, c_global] : rows) {
    MonitorConfig c = base;
    c.regime = regime;
    c.c_global = c_global;
    const auto r = run_experiment(s, c, 1000, kSeed);
    const std::string name = regime.kind == RegimeKind::Centralized ? "centralized" : "c_local " + fmt(regime.c_local);
    v.check(r.fp_rate >= 0.035 && r.fp_rate <= 0.075,
            name + ", c_global " + fmt(c_global) + ": size " + fmt(r.fp_rate) + " in [0.035, 0.075]");
  }
}

// 3. Centralized and Distributed(0) give identical outcomes.
void regime_equivalence(Verdict& v) {
  struct Case {
    long d, m, h;
    double t_tilde, c_global, delta;
    long tau, p;
    double phi;
  };
  const std::vector<Case> cases{
      {1, 10, 3, 2.0, 3.0, 0.0, 0, 0, 0.0},        {5, 50, 25, 4.0, 4.0, 0.0, 0, 0, 0.0},
      {5, 50, 25, 4.0, 4.0, 1.0, 100, 5, 0.0},     {20, 100, 50, 3.0, 6.0, 0.5, 200, 10, 0.0},
      {20, 100, 100, 2.0, 8.0, 2.0, 150, 1, 0.0},  {50, 80, 20, 5.0, 10.0, 0.3, 300, 50, 0.0},
      {3, 30, 1, 10.0, 2.5, 0.0, 0, 0, 0.0},       {10, 60, 30, 4.0, 5.0, 1.0, 120, 10, 0.5},
      {100, 40, 20, 2.0, kInf, 0.0, 0, 0, 0.0},    {8, 200, 100, 1.0, 0.0, 0.0, 0, 0, 0.0},
  };
  long compared = 0, differing = 0;
  for (const auto& k : cases) {
    Scenario s = k.delta != 0.0 ? shift_scenario(k.d, k.m, 0, k.tau, k.delta, k.p) : null_scenario(k.d, k.m, 0);
    s.total_length = k.m + static_cast<long>(std::floor(k.m * k.t_tilde + 1e-9));
    if (k.phi != 0.0) s.noise = Noise::ar1(k.phi);
    MonitorConfig c = study_config(k.d, k.m, k.h, k.t_tilde);
    c.c_global = k.c_global;
    c.record_trace = true;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const DataMatrix data = generate(s, seed).data;
      c.regime = Regime::centralized();
      const DetectionOutcome a = run_monitor(c, data);
      c.regime = Regime::distributed(0.0);
      const DetectionOutcome b = run_monitor(c, data);
      ++compared;
      if (!(a == b)) ++differing;
    }
  }
  v.check(differing == 0, std::to_string(compared) + " runs compared, " + std::to_string(differing) + " differ");
}

// 4. Transmission fraction under the null against the normal-tail law.
void transmission_law(Verdict& v) {
  // rho = 1 keeps every step informative; m >> h makes the training error
  // negligible, so local statistics are standard normal to within 0.1%.
  MonitorConfig c = study_config(100, 20000, 10, 10.0);
  c.weight = WeightFn::constant();
  c.c_global = kInf;
  const long reps = 3;
  const Scenario s = null_scenario(c.d, c.m, c.m + c.horizon());
  const double sensor_steps = static_cast<double>(reps * c.d * c.horizon());
  v.note("sensor-steps per threshold: " + fmt(sensor_steps, 6));
  for (double c_local : {2.0, 3.0, 3.44, 4.0}) {
    c.regime = Regime::distributed(c_local);
    const auto r = run_experiment(s, c, reps, kSeed, {0, true});
    double sent = 0.0;
    for (const auto& rep : r.raw) sent += static_cast<double>(rep.total_transmissions);
    const double observed = sent / static_cast<double>(reps * c.horizon());
    const double expected = expected_transmission_fraction(c_local, 1.0, c.d, c.weight);
    const double rel = observed / expected - 1.0;
    v.check(std::fabs(rel) <= 0.10, "c_local " + fmt(c_local) + ": " + fmt(observed, 6) + " vs " + fmt(expected, 6) +
                                        " sensors/step (relative error " + fmt(rel, 3) + ")");
  }
}

// 5. Growing (m, h) at fixed beta and shift.
void consistency(Verdict& v) {
  const std::vector<std::pair<long, long>> sizes{{200, 100}, {400, 200}, {800, 400}};
  std::vector<double> max_stat;
  double last_detect = 0.0;
  for (const auto& [m, h] : sizes) {
    MonitorConfig c = study_config(100, m, h, 10.0);
    c.regime = Regime::distributed(3.44);
    // The change starts with monitoring, so every alarm is a detection.
    const Scenario s = shift_scenario(100, m, m + c.horizon(), m + 1, 0.5, 100);
    c.c_global = kInf;
    const auto unstopped = run_experiment(s, c, 200, kSeed);
    c.c_global = 7.16;
    const auto stopped = run_experiment(s, c, 200, kSeed);
    max_stat.push_back(unstopped.mean_max_weighted_global);
    last_detect = stopped.detect_rate;
    v.note("(m, h) = (" + std::to_string(m) + ", " + std::to_string(h) + "): mean max statistic " +
           fmt(unstopped.mean_max_weighted_global) + ", detect rate " + fmt(stopped.detect_rate) + ", false alarms " +
           fmt(stopped.fp_rate));
  }
  v.check(max_stat[0] < max_stat[1] && max_stat[1] < max_stat[2], "max weighted global statistic strictly increasing");
  v.check(last_detect == 1.0, "detect rate at (800, 400): " + fmt(last_detect));
}

// 6. Delay and communication as the local threshold grows.
void tradeoff(Verdict& v) {
  const MonitorConfig base = study_config(100, 200, 100, 49.0);
  const Scenario s = shift_scenario(100, 200, 10000, 5000, 1.0, 100);
  const std::vector<Thresholds> thresholds{{0.0, 14.4}, {3.15, 7.89}, {3.44, 7.16}, {4.05, 6.02}};
  const std::vector<double> shifts{1.0};
  const auto rows = threshold_sweep(s, shifts, thresholds, base, 500, kSeed);
  for (const auto& r : rows) {
    v.note("c_local " + fmt(r.thresholds.c_local) + ": delay " + fmt(r.report.add) + " (" +
           std::to_string(r.report.add_count) + " detections), messages/step " + fmt(r.report.trans_avg));
  }
  const double ratio = rows[3].report.add / rows[0].report.add;
  v.check(ratio <= 1.25, "delay(4.05) / delay(0) = " + fmt(ratio) + " <= 1.25");
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].report.trans_avg < rows[i - 1].report.trans_avg;
  v.check(decreasing, "messages/step strictly decreasing in c_local");
}

// 7. Long-run variance of AR(1) samples.
void lrv_oracle(Verdict& v) {
  for (const auto& [phi, target, tol] : {std::tuple{0.5, 4.0, 0.4}, std::tuple{0.0, 1.0, 0.1}}) {
    Scenario s = null_scenario(1, 10, 100000);
    s.noise = Noise::ar1(phi);
    const auto generated = generate(s, kSeed);
    const double lrv = estimate_lrv(generated.data.stream(0), Kernel::Bartlett).variance();
    v.check(within(lrv, target, tol), "phi " + fmt(phi) + ": " + fmt(lrv) + " (" + fmt(target) + " +- " + fmt(tol) + ")");
  }
}

// 8. Autocorrelated noise under three adjustments.
void autocorrelation(Verdict& v) {
  // The change sits 100 steps before the horizon end, so the false-alarm
  // rate is close to the size of the whole run.
  MonitorConfig base = study_config(100, 200, 100, 10.0);
  const Scenario s = shift_scenario(100, 200, 200 + base.horizon(), 2100, 1.0, 100);
  AutocorrelationPlan plan;
  plan.phis = {0.25};
  plan.ps = {100};
  plan.deltas = {1.0};
  plan.iid = {3.44, 7.16};
  plan.alpha = 0.05;
  plan.calibration_reps = 10000;
  const auto rows = autocorrelation_study(plan, s, base, 500, kSeed);
  for (const auto& r : rows) {
    v.note(std::string(adjustment_name(r.method)) + ": c_global " + fmt(r.c_global) + ", false alarms " +
           fmt(r.report.fp_rate) + ", delay " + fmt(r.report.add) + ", messages/step " + fmt(r.report.trans_avg));
  }
  const auto& none = rows[0].report;
  const auto& inflate = rows[1].report;
  const auto& lrv = rows[2].report;
  v.check(none.fp_rate >= 10 * plan.alpha, "no adjustment: false alarms " + fmt(none.fp_rate) + " >= 0.5");
  v.check(within(inflate.fp_rate, plan.alpha, 0.02), "inflated thresholds: " + fmt(inflate.fp_rate) + " in 0.05 +- 0.02");
  v.check(within(lrv.fp_rate, plan.alpha, 0.02), "long-run variance: " + fmt(lrv.fp_rate) + " in 0.05 +- 0.02");
  v.check(lrv.trans_avg < inflate.trans_avg,
          "messages/step: long-run variance " + fmt(lrv.trans_avg) + " < inflated " + fmt(inflate.trans_avg));
}

// 9. Accuracy of the training mean.
void training_size(Verdict& v) {
  const std::vector<long> m_values{80, 100, 500, 1000};
  const std::vector<double> c_globals{9.039, 8.159, 6.014, 5.708};
  MonitorConfig base = study_config(100, 200, 50, 1.0);
  base.regime = Regime::distributed(3.44);
  const auto rows = training_size_study(
      m_values, base, 6000,
      [&](long m) { return c_globals[static_cast<std::size_t>(std::find(m_values.begin(), m_values.end(), m) - m_values.begin())]; },
      1000, kSeed);
  const std::vector<std::pair<std::size_t, double>> targets{{0, 0.0125}, {2, 0.002}, {3, 0.001}};
  for (const auto& r : rows) {
    v.note("m " + std::to_string(r.m) + ": MSE " + fmt(r.mse_mean) + ", size " + fmt(r.empirical_size));
  }
  for (const auto& [i, target] : targets) {
    v.check(std::fabs(rows[i].mse_mean / target - 1.0) <= 0.5,
            "m " + std::to_string(rows[i].m) + ": " + fmt(rows[i].mse_mean) + " within 50% of " + fmt(target));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].mse_mean < rows[i - 1].mse_mean;
  v.check(decreasing, "MSE decreasing in m");
}

// 10. Command-line runs with different thread counts.
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Verdict& v) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dmosum_acceptance_threads";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"calibrate", "calibrate --reps 500 --d 100"},
      {"size", "experiment size --reps 100"},
      {"sweep", "experiment sweep --reps 40 --set delta=0.5,1 --set calibration_reps=200 --set t_tilde=10 "
                "--set tau=1200"},
      {"bandwidth", "experiment bandwidth --reps 40 --set delta0=0.5 --c-local 3.44 --c-global limit "
                    "--set calibration_reps=200 --set h_stride=25 --set increments=1000"},
      {"training", "experiment training --reps 40 --set m_values=80,500"
                   " --c-global 9.039,6.014"},
      {"ar1", "experiment ar1 --reps 40 --t-tilde 10 --set tau=2100 --set phi=0.25 --set p=100 --set delta=1 "
              "--set calibration_reps=200"},
  };
  for (const auto& [name, args] : runs) {
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "2", "4"}) {
      const fs::path out = dir / (name + "_" + threads + ".csv");
      const std::string cmd = std::string(DMOSUM_CLI_PATH) + " " + args + " --seed 17 --threads " + threads +
                              " --out " + out.string() + " 2> " + (dir / "stderr.txt").string();
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        v.check(false, name + " with " + threads + " threads failed: " + slurp(dir / "stderr.txt"));
        outputs.push_back("");
        continue;
      }
      outputs.push_back(slurp(out));
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    v.check(same, name + ": byte-identical CSV for 1, 2 and 4 threads (" + std::to_string(outputs[0].size()) +
                      " bytes)");
  }
  fs::remove_all(dir);
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "critical values", critical_values},
      {2, "empirical size", empirical_size},
      {3, "regime equivalence", regime_equivalence},
      {4, "transmission-cost law", transmission_law},
      {5, "consistency", consistency},
      {6, "trade-off shape", tradeoff},
      {7, "long-run variance oracle", lrv_oracle},
      {8, "autocorrelation ordinal relations", autocorrelation},
      {9, "training-size study", training_size},
      {10, "determinism across thread counts", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Verdict verdict;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(verdict);
    } catch (const std::exception& e) {
      verdict.check(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "CRITERION " << c.id << ' ' << (verdict.ok() ? "PASS" : "FAIL") << ": " << c.name << " ("
              << fmt(seconds, 3) << " s)\n";
    for (const auto& line : verdict.lines()) std::cout << line << '\n';
    std::cout.flush();
    if (!verdict.ok()) ++failures;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL") << '\n';
  return failures == 0 ? 0 : 1;
}

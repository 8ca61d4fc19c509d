// Copyright 2026 The nnld Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nnld/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "nnld/error.hpp"
#include "nnld/random.hpp"

namespace nnld {

using nlohmann::json;

std::string_view to_string(LearnerKind learner) {
  return learner == LearnerKind::kMorph ? "morph" : "tempotron";
}

LearnerKind parse_learner(std::string_view name) {
  if (name == "morph") return LearnerKind::kMorph;
  if (name == "tempotron") return LearnerKind::kTempotron;
  throw ParameterError("unknown learner '" + std::string(name) + "'");
}

namespace {

std::string_view label_mode_name(LabelMode mode) {
  return mode == LabelMode::kCoinFlip ? "coin" : "split";
}

LabelMode parse_label_mode(std::string_view name) {
  if (name == "coin") return LabelMode::kCoinFlip;
  if (name == "split") return LabelMode::kExactSplit;
  throw ParameterError("unknown label mode '" + std::string(name) + "'");
}

// Rethrows a ParameterError raised by a sub-config with the field path prepended.
template <class F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ParameterError& e) {
    throw ParameterError(path + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (P < 1) throw ParameterError("P: must be >= 1");
  if (task == TaskKind::kEncoded) {
    if (P % 2 != 0) throw ParameterError("P: encoded task needs an even pattern count");
  } else {
    if (d < 1) throw ParameterError("d: must be >= 1");
    if (task == TaskKind::kSynchrony && d % 2 != 0) {
      throw ParameterError("d: synchrony task needs an even afferent count");
    }
    if (!(T >= 1.0) || !std::isfinite(T)) throw ParameterError("T: must be >= 1 ms");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt: must be positive");
  if (trials < 1) throw ParameterError("trials: must be >= 1");
  if (workers < 1) throw ParameterError("workers: must be >= 1");
  check("neuron", [&] { neuron.validate(); });
  if (learner == LearnerKind::kMorph) {
    check("morph", [&] { morph.validate(); });
    if (static_threshold && !(*static_threshold > 0.0)) {
      throw ParameterError("morph.static_threshold: must be positive");
    }
  } else {
    check("tempotron", [&] { tempotron.validate(); });
  }
  if (task == TaskKind::kEncoded) {
    check("encoded", [&] { encoded.lif.validate(); });
    if (!(encoded.train_fraction > 0.0 && encoded.train_fraction < 1.0)) {
      throw ParameterError("encoded.train_fraction: must lie in (0, 1)");
    }
    if (encoded.synth.rows < 1 || encoded.synth.cols < 1) {
      throw ParameterError("encoded.rows: taxel grid must be non-empty");
    }
    if (!(encoded.synth.duration > 0.0) || !(encoded.synth.sample_period > 0.0)) {
      throw ParameterError("encoded.duration: duration and sample period must be positive");
    }
  }
}

int ExperimentConfig::effective_d() const {
  return task == TaskKind::kEncoded ? 2 * encoded.synth.channels() : d;
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& n = cfg.neuron;
  const auto& m = cfg.morph;
  const auto& tp = cfg.tempotron;
  const auto& e = cfg.encoded;
  json j;
  j["task"] = std::string(to_string(cfg.task));
  j["P"] = cfg.P;
  j["d"] = cfg.effective_d();
  j["T"] = cfg.task == TaskKind::kEncoded ? e.synth.duration : cfg.T;
  j["dt"] = cfg.dt;
  j["labels"] = std::string(label_mode_name(cfg.labels));
  j["trials"] = cfg.trials;
  j["base_seed"] = cfg.base_seed;
  j["workers"] = cfg.workers;
  j["learner"] = std::string(to_string(cfg.learner));
  j["neuron"] = {{"m", n.m},           {"k", n.k},           {"x_thr", n.x_thr},
                 {"x_sat", n.x_sat},   {"tau", n.kernel.tau}, {"tau_s", n.kernel.tau_s}};
  j["morph"] = {{"n_target", m.n_target}, {"n_replace", m.n_replace},
                {"max_iters", m.max_iters}, {"eta", m.eta},
                {"w_fp", m.w_fp},         {"w_fn", m.w_fn},
                {"v_thr_lo", m.v_thr_lo}, {"v_thr_hi", m.v_thr_hi}};
  j["morph"]["static_threshold"] =
      cfg.static_threshold ? json(*cfg.static_threshold) : json(nullptr);
  j["tempotron"] = {{"lambda", tp.lambda},
                    {"v_thr", tp.v_thr},
                    {"max_epochs", tp.max_epochs},
                    {"init_std", tp.init_std},
                    {"quant", std::string(to_string(tp.quant.mode))},
                    {"bits", tp.quant.bits},
                    {"range", tp.quant.range},
                    {"dt_lambda_steps", tp.dt_lambda_steps}};
  j["encoded"] = {{"leak", e.lif.leak},
                  {"gain", e.lif.gain},
                  {"threshold", e.lif.threshold},
                  {"reset", e.lif.reset},
                  {"binarize_threshold", e.binarize_threshold},
                  {"train_fraction", e.train_fraction},
                  {"rows", e.synth.rows},
                  {"cols", e.synth.cols},
                  {"duration", e.synth.duration},
                  {"sample_period", e.synth.sample_period},
                  {"small_radius", e.synth.small_radius},
                  {"large_radius", e.synth.large_radius},
                  {"center_jitter", e.synth.center_jitter},
                  {"noise", e.synth.noise}};
  return j;
}

namespace {

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParameterError(path + ": expected a number");
  return v.get<double>();
}

long long as_integer(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15) {
      return static_cast<long long>(x);
    }
  }
  throw ParameterError(path + ": expected an integer");
}

int as_int(const json& v, const std::string& path) {
  const auto x = as_integer(v, path);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ParameterError(path + ": integer out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto x = as_integer(v, path);
  if (x < 0) throw ParameterError(path + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(x);
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ParameterError(path + ": expected a string");
  return v.get<std::string>();
}

using Setter = std::function<void(const json&, const std::string&)>;

void apply_fields(const json& obj, const std::string& prefix,
                  const std::map<std::string, Setter>& fields) {
  const std::string where = prefix.empty() ? "config" : prefix;
  if (!obj.is_object()) throw ParameterError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    const auto it = fields.find(key);
    if (it == fields.end()) throw ParameterError(path + ": unknown field");
    // Parse errors inside a setter are rewrapped with the field path.
    try {
      it->second(value, path);
    } catch (const std::exception& e) {
      const std::string what = e.what();
      if (what.rfind(path, 0) == 0) throw;
      throw ParameterError(path + ": " + what);
    }
  }
}

Setter number(double& target) {
  return [&target](const json& v, const std::string& p) { target = as_number(v, p); };
}
Setter integer(int& target) {
  return [&target](const json& v, const std::string& p) { target = as_int(v, p); };
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
  ExperimentConfig cfg = std::move(base);
  double tau = cfg.neuron.kernel.tau;
  std::optional<double> tau_s;
  bool kernel_touched = false;

  const std::map<std::string, Setter> neuron_fields = {
      {"m", integer(cfg.neuron.m)},
      {"k", integer(cfg.neuron.k)},
      {"x_thr", number(cfg.neuron.x_thr)},
      {"x_sat", number(cfg.neuron.x_sat)},
      {"tau",
       [&](const json& v, const std::string& p) {
         tau = as_number(v, p);
         kernel_touched = true;
       }},
      {"tau_s",
       [&](const json& v, const std::string& p) {
         tau_s = as_number(v, p);
         kernel_touched = true;
       }},
  };
  const std::map<std::string, Setter> morph_fields = {
      {"n_target", integer(cfg.morph.n_target)},
      {"n_replace", integer(cfg.morph.n_replace)},
      {"max_iters", integer(cfg.morph.max_iters)},
      {"eta", number(cfg.morph.eta)},
      {"w_fp", number(cfg.morph.w_fp)},
      {"w_fn", number(cfg.morph.w_fn)},
      {"v_thr_lo", number(cfg.morph.v_thr_lo)},
      {"v_thr_hi", number(cfg.morph.v_thr_hi)},
      {"static_threshold",
       [&](const json& v, const std::string& p) {
         if (v.is_null()) {
           cfg.static_threshold.reset();
         } else {
           cfg.static_threshold = as_number(v, p);
         }
       }},
  };
  const std::map<std::string, Setter> tempotron_fields = {
      {"lambda", number(cfg.tempotron.lambda)},
      {"v_thr", number(cfg.tempotron.v_thr)},
      {"max_epochs", integer(cfg.tempotron.max_epochs)},
      {"init_std", number(cfg.tempotron.init_std)},
      {"bits", integer(cfg.tempotron.quant.bits)},
      {"range", number(cfg.tempotron.quant.range)},
      {"dt_lambda_steps", number(cfg.tempotron.dt_lambda_steps)},
      {"quant",
       [&](const json& v, const std::string& p) {
         cfg.tempotron.quant.mode = parse_quant_mode(as_string(v, p));
       }},
  };
  const std::map<std::string, Setter> encoded_fields = {
      {"leak", number(cfg.encoded.lif.leak)},
      {"gain", number(cfg.encoded.lif.gain)},
      {"threshold", number(cfg.encoded.lif.threshold)},
      {"reset", number(cfg.encoded.lif.reset)},
      {"binarize_threshold", number(cfg.encoded.binarize_threshold)},
      {"train_fraction", number(cfg.encoded.train_fraction)},
      {"rows", integer(cfg.encoded.synth.rows)},
      {"cols", integer(cfg.encoded.synth.cols)},
      {"duration", number(cfg.encoded.synth.duration)},
      {"sample_period", number(cfg.encoded.synth.sample_period)},
      {"small_radius", number(cfg.encoded.synth.small_radius)},
      {"large_radius", number(cfg.encoded.synth.large_radius)},
      {"center_jitter", number(cfg.encoded.synth.center_jitter)},
      {"noise", number(cfg.encoded.synth.noise)},
  };
  const std::map<std::string, Setter> top = {
      {"task",
       [&](const json& v, const std::string& p) { cfg.task = parse_task_kind(as_string(v, p)); }},
      {"P", integer(cfg.P)},
      {"d", integer(cfg.d)},
      {"T", number(cfg.T)},
      {"dt", number(cfg.dt)},
      {"labels",
       [&](const json& v, const std::string& p) { cfg.labels = parse_label_mode(as_string(v, p)); }},
      {"trials", integer(cfg.trials)},
      {"base_seed",
       [&](const json& v, const std::string& p) { cfg.base_seed = as_seed(v, p); }},
      {"workers", integer(cfg.workers)},
      {"learner",
       [&](const json& v, const std::string& p) { cfg.learner = parse_learner(as_string(v, p)); }},
      {"neuron", [&](const json& v, const std::string& p) { apply_fields(v, p, neuron_fields); }},
      {"morph", [&](const json& v, const std::string& p) { apply_fields(v, p, morph_fields); }},
      {"tempotron",
       [&](const json& v, const std::string& p) { apply_fields(v, p, tempotron_fields); }},
      {"encoded",
       [&](const json& v, const std::string& p) { apply_fields(v, p, encoded_fields); }},
  };
  apply_fields(j, "", top);
  if (kernel_touched) {
    check("neuron.tau", [&] {
      cfg.neuron.kernel = tau_s ? KernelParams::make(tau, *tau_s)
                                : KernelParams::with_default_ratio(tau);
    });
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

TrialSeeds trial_seeds(std::uint64_t base_seed, int trial) {
  TrialSeeds seeds;
  seeds.trial = base_seed + static_cast<std::uint64_t>(trial);
  Rng rng(seeds.trial);
  seeds.data = rng.next();
  seeds.learner = rng.next();
  seeds.split = rng.next();
  return seeds;
}

std::pair<Dataset, std::optional<Dataset>> trial_data(const ExperimentConfig& cfg,
                                                      const TrialSeeds& seeds) {
  switch (cfg.task) {
    case TaskKind::kLatency:
      return {gen_latency(cfg.P, cfg.d, cfg.T, seeds.data, cfg.labels), std::nullopt};
    case TaskKind::kSynchrony:
      return {gen_synchrony(cfg.P, cfg.d, cfg.T, seeds.data, cfg.labels), std::nullopt};
    case TaskKind::kEncoded: {
      auto all = gen_encoded(cfg.P / 2, seeds.data, cfg.encoded.lif, cfg.encoded.synth,
                             cfg.encoded.binarize_threshold);
      auto [train, test] = split_dataset(all, cfg.encoded.train_fraction, seeds.split);
      return {std::move(train), std::move(test)};
    }
  }
  throw ParameterError("unknown task");
}

TrialOutcome run_trial(const ExperimentConfig& cfg, int trial) {
  const auto start = std::chrono::steady_clock::now();
  const auto seeds = trial_seeds(cfg.base_seed, trial);
  auto [train_set, test_set] = trial_data(cfg, seeds);
  const auto table = default_table(cfg.neuron.kernel, cfg.dt);

  TrialOutcome out;
  out.trial = trial;
  out.seed = seeds.trial;
  if (cfg.learner == LearnerKind::kMorph) {
    MorphConfig mc = cfg.static_threshold
                         ? MorphConfig::with_static_threshold(*cfg.static_threshold, cfg.morph)
                         : cfg.morph;
    mc.seed = seeds.learner;
    auto result = train(train_set, cfg.neuron, mc, table);
    out.train_accuracy = result.best_accuracy;
    out.best_iter = result.best_iter;
    out.v_thr = result.model.v_thr;
    if (test_set) out.test_accuracy = accuracy(*test_set, result.model, table);
    out.trace = std::move(result.trace);
  } else {
    TempotronConfig tc = cfg.tempotron;
    tc.kernel = cfg.neuron.kernel;
    tc.seed = seeds.learner;
    auto result = train_tempotron(train_set, tc, table);
    out.train_accuracy = result.best_accuracy;
    out.best_iter = result.best_epoch;
    out.v_thr = result.model.v_thr;
    if (test_set) out.test_accuracy = tempotron_accuracy(*test_set, result.model, table);
    out.trace = std::move(result.trace);
  }
  out.iterations = static_cast<int>(out.trace.size());
  out.final_train_accuracy = out.trace.empty() ? out.train_accuracy
                                               : out.trace.back().train_accuracy;
  out.accuracy = out.test_accuracy.value_or(out.train_accuracy);
  out.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::span<const int> order) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> schedule(order.begin(), order.end());
  if (schedule.empty()) {
    schedule.resize(static_cast<std::size_t>(cfg.trials));
    std::iota(schedule.begin(), schedule.end(), 0);
  } else {
    auto sorted = schedule;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != static_cast<int>(i) || sorted.size() != static_cast<std::size_t>(cfg.trials)) {
        throw ParameterError("order: must be a permutation of 0..trials-1");
      }
    }
  }

  std::vector<std::optional<TrialOutcome>> slots(schedule.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= schedule.size()) return;
      try {
        const int trial = schedule[i];
        slots[static_cast<std::size_t>(trial)] = run_trial(cfg, trial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(schedule.size());
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                               schedule.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.config = cfg;
  std::vector<double> accuracies;
  for (auto& slot : slots) {
    accuracies.push_back(slot->accuracy);
    report.trials.push_back(std::move(*slot));
  }
  report.mean = mean_of(accuracies);
  report.sd = sample_sd(accuracies);
  report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

json report_to_json(const ExperimentReport& report, bool with_traces) {
  json j;
  j["config"] = config_to_json(report.config);
  j["mean"] = report.mean;
  j["sd"] = report.sd;
  json trials = json::array();
  json timing = json::array();
  for (const auto& t : report.trials) {
    json row = {{"trial", t.trial},
                {"seed", t.seed},
                {"accuracy", t.accuracy},
                {"train_accuracy", t.train_accuracy},
                {"final_train_accuracy", t.final_train_accuracy},
                {"best_iter", t.best_iter},
                {"iterations", t.iterations},
                {"v_thr", t.v_thr}};
    row["test_accuracy"] = t.test_accuracy ? json(*t.test_accuracy) : json(nullptr);
    if (with_traces) {
      std::ostringstream csv;
      write_trace_csv(t.trace, csv);
      row["trace_csv"] = csv.str();
    }
    trials.push_back(std::move(row));
    timing.push_back(t.runtime_s);
  }
  j["trials"] = std::move(trials);
  j["runtime_s"] = {{"total", report.runtime_s}, {"per_trial", std::move(timing)}};
  return j;
}

std::vector<SweepRow> run_quant_sweep(const ExperimentConfig& base, std::span<const int> bits,
                                      std::span<const QuantMode> modes,
                                      std::span<const TaskKind> tasks) {
  std::vector<SweepRow> rows;
  for (TaskKind task : tasks) {
    for (QuantMode mode : modes) {
      std::vector<int> depths(bits.begin(), bits.end());
      if (mode == QuantMode::kNone) depths = bits.empty() ? std::vector<int>{} : std::vector<int>{0};
      for (int b : depths) {
        ExperimentConfig cfg = base;
        cfg.task = task;
        cfg.learner = LearnerKind::kTempotron;
        cfg.tempotron.quant.mode = mode;
        if (mode != QuantMode::kNone) cfg.tempotron.quant.bits = b;
        SweepRow row;
        row.task = task;
        row.bits = b;
        row.mode = mode;
        row.report = run_experiment(cfg);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "task,P,bits,mode,trials,mean,sd\n";
  for (const auto& row : rows) {
    out << to_string(row.task) << ',' << row.report.config.P << ',' << row.bits << ','
        << to_string(row.mode) << ',' << row.report.trials.size() << ',' << row.report.mean
        << ',' << row.report.sd << '\n';
  }
  out.precision(old_precision);
}

}  // namespace nnld

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

// Command-line front end: dataset generation, single training runs,
// multi-trial experiments, quantization sweeps, spike encoding and the
// static threshold estimate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nnld/encoder.hpp"
#include "nnld/error.hpp"
#include "nnld/experiment.hpp"
#include "nnld/morph_learning.hpp"
#include "nnld/spike_data.hpp"
#include "nnld/tempotron.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutputEnv = "NNLD_OUTPUT_DIR";

// Flags that override fields of the experiment configuration.
struct Overrides {
  std::optional<std::string> task;
  std::optional<int> P;
  std::optional<int> d;
  std::optional<double> T;
  std::optional<double> dt;
  std::optional<std::string> labels;
  std::optional<int> trials;
  std::optional<std::uint64_t> base_seed;
  std::optional<int> workers;
  std::optional<std::string> learner;
  std::optional<int> m;
  std::optional<int> k;
  std::optional<int> max_iters;
  std::optional<int> n_target;
  std::optional<int> n_replace;
  std::optional<double> eta;
  std::optional<double> static_threshold;
  std::optional<double> lambda;
  std::optional<int> max_epochs;
  std::optional<int> bits;
  std::optional<std::string> quant;
  std::optional<double> range;

  void attach(CLI::App& app) {
    app.add_option("--task", task, "latency | synchrony | encoded");
    app.add_option("--p", P, "pattern count");
    app.add_option("--d", d, "afferent count");
    app.add_option("--t", T, "pattern duration (ms)");
    app.add_option("--dt", dt, "simulation step (ms)");
    app.add_option("--labels", labels, "coin | split");
    app.add_option("--trials", trials, "number of trials");
    app.add_option("--base-seed", base_seed, "seed of trial 0");
    app.add_option("--workers", workers, "concurrent trials");
    app.add_option("--learner", learner, "morph | tempotron");
    app.add_option("--m", m, "dendritic branches");
    app.add_option("--k", k, "synapses per branch");
    app.add_option("--max-iters", max_iters, "morphological learning iterations");
    app.add_option("--n-target", n_target, "slots scored for removal");
    app.add_option("--n-replace", n_replace, "candidate afferents scored");
    app.add_option("--eta", eta, "threshold learning rate");
    app.add_option("--static-threshold", static_threshold, "fixed threshold (disables adaptation)");
    app.add_option("--lambda", lambda, "tempotron learning rate");
    app.add_option("--max-epochs", max_epochs, "tempotron epochs");
    app.add_option("--bits", bits, "tempotron weight bits");
    app.add_option("--quant", quant, "none | AT | DT");
    app.add_option("--range", range, "weight range for quantization during training");
  }

  // Builds the JSON overlay so overrides go through the same validation as files.
  json to_json() const {
    json j = json::object();
    if (task) j["task"] = *task;
    if (P) j["P"] = *P;
    if (d) j["d"] = *d;
    if (T) j["T"] = *T;
    if (dt) j["dt"] = *dt;
    if (labels) j["labels"] = *labels;
    if (trials) j["trials"] = *trials;
    if (base_seed) j["base_seed"] = *base_seed;
    if (workers) j["workers"] = *workers;
    if (learner) j["learner"] = *learner;
    if (m) j["neuron"]["m"] = *m;
    if (k) j["neuron"]["k"] = *k;
    if (max_iters) j["morph"]["max_iters"] = *max_iters;
    if (n_target) j["morph"]["n_target"] = *n_target;
    if (n_replace) j["morph"]["n_replace"] = *n_replace;
    if (eta) j["morph"]["eta"] = *eta;
    if (static_threshold) j["morph"]["static_threshold"] = *static_threshold;
    if (lambda) j["tempotron"]["lambda"] = *lambda;
    if (max_epochs) j["tempotron"]["max_epochs"] = *max_epochs;
    if (bits) j["tempotron"]["bits"] = *bits;
    if (quant) j["tempotron"]["quant"] = *quant;
    if (range) j["tempotron"]["range"] = *range;
    return j;
  }
};

struct ConfigSource {
  std::optional<std::string> path;
  Overrides overrides;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", path, "JSON experiment config")->check(CLI::ExistingFile);
    overrides.attach(app);
  }

  nnld::ExperimentConfig resolve() const {
    nnld::ExperimentConfig cfg;
    if (path) cfg = nnld::load_config(*path);
    cfg = nnld::config_from_json(overrides.to_json(), cfg);
    cfg.validate();
    return cfg;
  }
};

fs::path output_dir(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') return env;
  return ".";
}

// Relative output names land in the output directory; absolute paths are kept.
fs::path resolve_output(const fs::path& dir, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute()) return p;
  fs::create_directories(dir);
  return dir / p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string dump(const json& j) {
  // Default double output of the JSON library round-trips (17 significant digits).
  return j.dump(2) + "\n";
}

template <class T>
std::vector<T> parse_list(const std::string& text, T (*parse)(std::string_view)) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

int parse_bits(std::string_view s) {
  std::size_t used = 0;
  const int v = std::stoi(std::string(s), &used);
  if (used != s.size()) throw nnld::ParameterError("bad bit depth '" + std::string(s) + "'");
  return v;
}

nnld::Dataset generate(const nnld::ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.task) {
    case nnld::TaskKind::kLatency:
      return nnld::gen_latency(cfg.P, cfg.d, cfg.T, seed, cfg.labels);
    case nnld::TaskKind::kSynchrony:
      return nnld::gen_synchrony(cfg.P, cfg.d, cfg.T, seed, cfg.labels);
    case nnld::TaskKind::kEncoded:
      return nnld::gen_encoded(cfg.P / 2, seed, cfg.encoded.lif, cfg.encoded.synth,
                               cfg.encoded.binarize_threshold);
  }
  throw nnld::ParameterError("unknown task");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Morphological learning for neurons with nonlinear dendrites"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.fallthrough();
  std::optional<std::string> out_flag;
  app.add_option("--out-dir", out_flag,
                 std::string("output directory (default: $") + kOutputEnv + " or .)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a dataset as JSON lines");
  ConfigSource gen_src;
  gen_src.attach(*gen);
  std::uint64_t gen_seed = 1;
  std::string gen_out = "dataset.jsonl";
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("-o,--output", gen_out, "output file");

  // train
  auto* tr = app.add_subcommand("train", "train one model");
  ConfigSource tr_src;
  tr_src.attach(*tr);
  std::optional<std::string> tr_data;
  std::optional<std::uint64_t> tr_seed;
  std::string tr_trace = "trace.csv";
  std::string tr_model = "model.json";
  tr->add_option("--data", tr_data, "dataset file (default: generate trial 0 of the config)")
      ->check(CLI::ExistingFile);
  tr->add_option("--seed", tr_seed, "learner seed");
  tr->add_option("--trace", tr_trace, "per-iteration trace CSV");
  tr->add_option("--model", tr_model, "trained model JSON");

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a multi-trial experiment");
  ConfigSource ex_src;
  ex_src.attach(*ex);
  std::string ex_out = "report.json";
  bool ex_traces = false;
  bool ex_no_timing = false;
  ex->add_option("-o,--output", ex_out, "report file");
  ex->add_flag("--traces", ex_traces, "embed per-trial traces in the report");
  ex->add_flag("--no-timing", ex_no_timing, "omit wall-clock runtimes from the report");

  // sweep
  auto* sw = app.add_subcommand("sweep", "tempotron quantization sweep");
  ConfigSource sw_src;
  sw_src.attach(*sw);
  std::string sw_bits = "2,4";
  std::string sw_modes = "AT,DT";
  std::string sw_tasks = "latency";
  std::string sw_out = "sweep.csv";
  sw->add_option("--bits-list", sw_bits, "comma separated bit depths (may be empty)");
  sw->add_option("--modes", sw_modes, "comma separated: none, AT, DT");
  sw->add_option("--tasks", sw_tasks, "comma separated tasks");
  sw->add_option("-o,--output", sw_out, "sweep table CSV");

  // encode
  auto* en = app.add_subcommand("encode", "convert an analog recording to spikes");
  std::optional<std::string> en_input;
  std::optional<std::string> en_synth;
  std::uint64_t en_seed = 1;
  std::string en_label = "-";
  std::string en_out = "encoded.jsonl";
  std::optional<std::string> en_save_rec;
  nnld::LifParams lif;
  double en_thr = 0.5;
  en->add_option("--input", en_input, "recording CSV")->check(CLI::ExistingFile);
  en->add_option("--synth", en_synth, "synthesize a recording: small | large");
  en->add_option("--seed", en_seed, "synthesis seed");
  en->add_option("--label", en_label, "class label of the pattern: + or -");
  en->add_option("--leak", lif.leak, "LIF leak time constant (ms)");
  en->add_option("--gain", lif.gain, "LIF gain per high sample");
  en->add_option("--lif-threshold", lif.threshold, "LIF firing threshold");
  en->add_option("--reset", lif.reset, "LIF reset value");
  en->add_option("--threshold", en_thr, "binarization threshold");
  en->add_option("--save-recording", en_save_rec, "also write the recording as CSV");
  en->add_option("-o,--output", en_out, "one-pattern dataset file");

  // static-thr
  auto* st = app.add_subcommand("static-thr", "mode of V_max over random patterns and wirings");
  ConfigSource st_src;
  st_src.attach(*st);
  int st_samples = 1000;
  std::uint64_t st_seed = 1;
  st->add_option("--samples", st_samples, "number of random pattern/wiring pairs");
  st->add_option("--seed", st_seed, "sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path dir = output_dir(out_flag);
    if (*gen) {
      const auto cfg = gen_src.resolve();
      const auto path = resolve_output(dir, gen_out);
      nnld::save(generate(cfg, gen_seed), path);
      std::cout << path.string() << "\n";
    } else if (*tr) {
      auto cfg = tr_src.resolve();
      nnld::Dataset data;
      std::optional<nnld::Dataset> test;
      auto seeds = nnld::trial_seeds(cfg.base_seed, 0);
      if (tr_seed) seeds.learner = *tr_seed;
      if (tr_data) {
        data = nnld::load(*tr_data);
      } else {
        std::tie(data, test) = nnld::trial_data(cfg, seeds);
      }
      const auto table = nnld::default_table(cfg.neuron.kernel, cfg.dt);
      json summary;
      std::ostringstream trace;
      if (cfg.learner == nnld::LearnerKind::kMorph) {
        auto mc = cfg.static_threshold
                      ? nnld::MorphConfig::with_static_threshold(*cfg.static_threshold, cfg.morph)
                      : cfg.morph;
        mc.seed = seeds.learner;
        const auto result = nnld::train(data, cfg.neuron, mc, table);
        nnld::write_trace_csv(result.trace, trace);
        nnld::save_model(result.model, resolve_output(dir, tr_model));
        summary = {{"train_accuracy", result.best_accuracy},
                   {"best_iter", result.best_iter},
                   {"iterations", result.trace.size()},
                   {"v_thr", result.model.v_thr}};
        if (test) summary["test_accuracy"] = nnld::accuracy(*test, result.model, table);
      } else {
        auto tc = cfg.tempotron;
        tc.kernel = cfg.neuron.kernel;
        tc.seed = seeds.learner;
        const auto result = nnld::train_tempotron(data, tc, table);
        nnld::write_trace_csv(result.trace, trace);
        write_text(resolve_output(dir, tr_model), nnld::weights_to_json(result.model.weights));
        summary = {{"train_accuracy", result.best_accuracy},
                   {"best_iter", result.best_epoch},
                   {"iterations", result.trace.size()},
                   {"v_thr", result.model.v_thr}};
        if (test) summary["test_accuracy"] = nnld::tempotron_accuracy(*test, result.model, table);
      }
      write_text(resolve_output(dir, tr_trace), trace.str());
      std::cout << dump(summary);
    } else if (*ex) {
      const auto cfg = ex_src.resolve();
      const auto report = nnld::run_experiment(cfg);
      auto j = nnld::report_to_json(report, ex_traces);
      if (ex_no_timing) j.erase("runtime_s");
      const auto path = resolve_output(dir, ex_out);
      write_text(path, dump(j));
      std::cout << std::setprecision(12) << "mean " << report.mean << " sd " << report.sd
                << " -> " << path.string() << "\n";
    } else if (*sw) {
      const auto cfg = sw_src.resolve();
      const auto bits = parse_list<int>(sw_bits, parse_bits);
      const auto modes = parse_list<nnld::QuantMode>(sw_modes, nnld::parse_quant_mode);
      const auto tasks = parse_list<nnld::TaskKind>(sw_tasks, nnld::parse_task_kind);
      const auto rows = nnld::run_quant_sweep(cfg, bits, modes, tasks);
      std::ostringstream csv;
      nnld::write_sweep_csv(rows, csv);
      const auto path = resolve_output(dir, sw_out);
      write_text(path, csv.str());
      std::cout << csv.str();
    } else if (*en) {
      if (en_input.has_value() == en_synth.has_value()) {
        throw nnld::ParameterError("encode needs exactly one of --input or --synth");
      }
      nnld::AnalogRecording rec;
      if (en_input) {
        rec = nnld::load_recording_csv(*en_input);
      } else if (*en_synth == "small" || *en_synth == "large") {
        rec = nnld::synth_tactile(
            *en_synth == "large" ? nnld::IndenterKind::kLarge : nnld::IndenterKind::kSmall,
            en_seed);
      } else {
        throw nnld::ParameterError("--synth must be small or large");
      }
      if (en_label != "+" && en_label != "-") throw nnld::ParameterError("--label must be + or -");
      if (en_save_rec) nnld::save_recording_csv(rec, resolve_output(dir, *en_save_rec));
      nnld::Dataset ds;
      ds.d = 2 * static_cast<int>(rec.channels.size());
      ds.T = std::max(rec.duration(), 1.0);
      ds.task = nnld::TaskKind::kEncoded;
      auto pattern = nnld::encode_recording(rec, lif, en_thr);
      pattern.label = en_label == "+" ? nnld::Label::kPositive : nnld::Label::kNegative;
      ds.patterns.push_back(std::move(pattern));
      const auto path = resolve_output(dir, en_out);
      nnld::save(ds, path);
      std::cout << path.string() << "\n";
    } else if (*st) {
      const auto cfg = st_src.resolve();
      const double v = nnld::static_threshold(cfg.neuron, cfg.d, cfg.T, st_samples, st_seed, cfg.dt);
      std::cout << std::setprecision(17) << v << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "nnld/encoder.hpp"
#include "nnld/morph_learning.hpp"
#include "nnld/neuron.hpp"
#include "nnld/spike_data.hpp"
#include "nnld/tempotron.hpp"

namespace nnld {

enum class LearnerKind { kMorph, kTempotron };

std::string_view to_string(LearnerKind learner);
LearnerKind parse_learner(std::string_view name);

// Settings of the synthetic encoded-sensor task. P counts patterns over both
// classes and must be even.
struct EncodedTaskConfig {
  LifParams lif;
  TactileSynthConfig synth;
  double binarize_threshold = 0.5;
  double train_fraction = 0.6;
};

struct ExperimentConfig {
  TaskKind task = TaskKind::kLatency;
  int P = 100;
  int d = 500;  // replaced by 2 * channels for the encoded task
  double T = 400.0;
  double dt = 1.0;
  LabelMode labels = LabelMode::kCoinFlip;
  NeuronParams neuron;
  LearnerKind learner = LearnerKind::kMorph;
  MorphConfig morph;
  // When set, the morphological learner runs with this fixed threshold.
  std::optional<double> static_threshold;
  TempotronConfig tempotron;
  EncodedTaskConfig encoded;
  int trials = 10;
  std::uint64_t base_seed = 1;
  int workers = 1;

  // Throws ParameterError whose message starts with the offending field path.
  void validate() const;
  int effective_d() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Overlays `j` on `base`; unknown keys and ill-typed values are errors that
// name the field path, e.g. "morph.eta: expected a number".
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Seeds used by one trial. The trial seed is base_seed + trial; data, learner
// and split seeds are drawn from a generator seeded with it.
struct TrialSeeds {
  std::uint64_t trial = 0;
  std::uint64_t data = 0;
  std::uint64_t learner = 0;
  std::uint64_t split = 0;
};
TrialSeeds trial_seeds(std::uint64_t base_seed, int trial);

struct TrialOutcome {
  int trial = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;        // reported metric (held out for the encoded task)
  double train_accuracy = 0.0;  // best training accuracy
  double final_train_accuracy = 0.0;  // training accuracy at the last iteration
  std::optional<double> test_accuracy;
  int best_iter = 0;
  int iterations = 0;
  double v_thr = 0.0;
  double runtime_s = 0.0;
  std::vector<IterationTrace> trace;
};

// Builds the dataset of one trial. For the encoded task the pair is
// (train, test); otherwise the second element is empty.
std::pair<Dataset, std::optional<Dataset>> trial_data(const ExperimentConfig& cfg,
                                                      const TrialSeeds& seeds);
TrialOutcome run_trial(const ExperimentConfig& cfg, int trial);

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialOutcome> trials;  // sorted by trial index
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for one trial
  double runtime_s = 0.0;
};

double mean_of(std::span<const double> values);
double sample_sd(std::span<const double> values);

// Runs every trial with up to cfg.workers threads. `order` permutes the
// execution order; the report is assembled by trial index either way.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                std::span<const int> order = {});

nlohmann::json report_to_json(const ExperimentReport& report, bool with_traces = false);

struct SweepRow {
  TaskKind task = TaskKind::kLatency;
  int bits = 0;  // 0 for full precision
  QuantMode mode = QuantMode::kNone;
  ExperimentReport report;
};

// Cross product tasks x bits x modes with the tempotron learner. kNone in
// `modes` contributes one full-precision row per task regardless of bits.
std::vector<SweepRow> run_quant_sweep(const ExperimentConfig& base, std::span<const int> bits,
                                      std::span<const QuantMode> modes,
                                      std::span<const TaskKind> tasks);
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace nnld

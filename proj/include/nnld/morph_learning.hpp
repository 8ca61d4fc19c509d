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
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nnld/kernel.hpp"
#include "nnld/neuron.hpp"
#include "nnld/random.hpp"
#include "nnld/spike_data.hpp"

namespace nnld {

struct MorphConfig {
  int n_target = 100;  // slots examined for removal per iteration
  int n_replace = 250;  // afferents tried as silent synapses per iteration
  int max_iters = 5000;
  double eta = 0.01;  // threshold learning rate (voltage units per error)
  double w_fp = 1.0;
  double w_fn = 1.0;
  // Initial threshold is drawn uniformly from [v_thr_lo, v_thr_hi].
  double v_thr_lo = 1.0;
  double v_thr_hi = 50.0;
  std::uint64_t seed = 1;

  void validate() const;
  // Fixed threshold, no adaptation.
  static MorphConfig with_static_threshold(double v_thr, MorphConfig base);
  static MorphConfig with_static_threshold(double v_thr);
};

struct SwapRecord {
  int branch = 0;
  int slot = 0;
  int removed = 0;  // afferent index
  int added = 0;
  bool operator==(const SwapRecord&) const = default;
};

struct IterationTrace {
  int iter = 0;
  double train_accuracy = 0.0;
  int fp = 0;
  int fn = 0;
  double v_thr = 0.0;  // after this iteration's update
  std::optional<SwapRecord> swapped;
  bool target_clamped = false;  // n_target exceeded the occupied slot count
  bool operator==(const IterationTrace&) const = default;
};

// One misclassified presentation: the compiled pattern, its evaluation at
// the current morphology, and its true label.
struct ErrorSample {
  const CompiledPattern* pattern = nullptr;
  const EvalResult* eval = nullptr;
  Label label = Label::kNegative;
};

// Batch-averaged fitness of afferent `afferent` on branch `branch`:
//   mean over misclassified samples of s * b'(v_branch(t_max)) * sum_f K(t_max - t_f),
// with s = +1 for a missed positive and -1 for a false alarm. Correctly
// classified samples are skipped; an empty batch yields 0. The afferent does
// not need to be connected, which is how silent synapses are scored.
double correlation_cij(std::span<const ErrorSample> batch, int branch, int afferent,
                       const NeuronParams& params);

// eta * (w_fp * FP - w_fn * FN).
double threshold_update(int fp, int fn, const MorphConfig& cfg);

// Incremental training state for one dataset. Membrane traces are kept per
// pattern and patched one branch at a time after each swap.
class MorphTrainer {
 public:
  MorphTrainer(const Dataset& dataset, NnldModel initial, const KernelTable& table,
               MorphConfig cfg);

  // One pass: classify, swap one synapse if anything is misclassified,
  // adapt the threshold.
  IterationTrace step(Rng& rng);

  const NnldModel& model() const { return model_; }
  std::span<const EvalResult> evaluations() const { return evals_; }
  const TimeGrid& grid() const { return grid_; }
  std::size_t errors() const;
  double accuracy() const;

 private:
  void refresh(std::size_t p, int branch, std::span<const int> old_slots);
  Label classify(std::size_t p) const;

  const Dataset* dataset_;
  const KernelTable* table_;
  MorphConfig cfg_;
  NnldModel model_;
  TimeGrid grid_;
  VoltageScale scale_;
  std::vector<CompiledPattern> compiled_;
  std::vector<std::vector<std::int64_t>> voltage_;
  std::vector<EvalResult> evals_;
  std::vector<double> old_drive_;
  std::vector<double> new_drive_;
  std::vector<std::pair<long, long>> spans_;
};

// Single-iteration convenience wrapper; rebuilds the evaluation state.
std::pair<NnldModel, IterationTrace> train_iteration(const NnldModel& model,
                                                     const Dataset& dataset,
                                                     const KernelTable& table,
                                                     const MorphConfig& cfg, Rng& rng);

struct MorphResult {
  NnldModel model;  // best training accuracy seen, with the threshold it had
  double best_accuracy = 0.0;
  int best_iter = 0;
  std::vector<IterationTrace> trace;
};

MorphResult train(const Dataset& dataset, const NeuronParams& params, const MorphConfig& cfg,
                  const KernelTable& table);
MorphResult train(const Dataset& dataset, const NeuronParams& params, const MorphConfig& cfg,
                  double dt = 1.0);

// Threshold at the mode of the V_max distribution over random latency
// patterns and random wirings (histogram with Freedman-Diaconis bins).
double static_threshold(const NeuronParams& params, int d, double T, int n_samples,
                        std::uint64_t seed, double dt = 1.0);
// Mode of a sample by the same histogram rule.
double histogram_mode(std::span<const double> samples);

std::vector<Label> classify_all(const Dataset& dataset, const NnldModel& model,
                                const KernelTable& table);
double accuracy(const Dataset& dataset, const NnldModel& model, const KernelTable& table);

void write_trace_csv(std::span<const IterationTrace> trace, std::ostream& out);

}  // namespace nnld

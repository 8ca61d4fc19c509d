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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nnld/kernel.hpp"
#include "nnld/morph_learning.hpp"
#include "nnld/neuron.hpp"
#include "nnld/spike_data.hpp"

namespace nnld {

// Point neuron with one real weight per afferent and linear summation.
struct TempotronModel {
  std::vector<double> weights;
  double v_thr = 1.0;
  KernelParams kernel = KernelParams::with_default_ratio(15.0);
};

enum class QuantMode { kNone, kAfterTraining, kDuringTraining };

std::string_view to_string(QuantMode mode);
QuantMode parse_quant_mode(std::string_view name);

struct QuantSpec {
  int bits = 4;
  QuantMode mode = QuantMode::kNone;
  double range = 1.0;  // weights clip to [-range, range]

  void validate() const;
};

// Uniform mid-rise quantizer: 2^bits levels evenly spaced over [-range, range]
// with both endpoints included. Halfway values round up.
std::vector<double> quantize(std::span<const double> weights, const QuantSpec& spec);
double quantize_value(double weight, const QuantSpec& spec);

EvalResult tempotron_eval(const CompiledPattern& pattern, const TempotronModel& model,
                          const TimeGrid& grid);
EvalResult tempotron_eval(const SpikePattern& pattern, const TempotronModel& model,
                          const KernelTable& table);
// V(t_g) = sum_i w_i sum_f K(t_g - t_f) over the whole grid.
std::vector<double> tempotron_trace(const CompiledPattern& pattern, const TempotronModel& model,
                                    const TimeGrid& grid);

// Gradient step for one presentation: +lambda * sum_f K(t_max - t_f) per
// afferent for a missed positive, the negation for a false alarm, and zero
// when the pattern is already classified correctly.
std::vector<double> tempotron_update(const SpikePattern& pattern, const TempotronModel& model,
                                     const KernelTable& table, double lambda);

struct TempotronConfig {
  double lambda = 0.005;
  double v_thr = 1.0;
  int max_epochs = 300;
  double init_std = 0.01;  // initial weights ~ N(0, init_std^2)
  // The range is only used when quantizing during training; after-training
  // quantization fits the range to the largest trained weight.
  QuantSpec quant{4, QuantMode::kNone, 1.5};
  // With quantization during training, each update moves a weight by this many
  // quantizer steps times its PSP value instead of using `lambda`. Steps much
  // smaller than one level would be rounded away.
  double dt_lambda_steps = 1.0;
  KernelParams kernel = KernelParams::with_default_ratio(15.0);
  std::uint64_t seed = 1;

  void validate() const;
  // Learning rate actually applied to updates.
  double effective_lambda() const;
};

struct TempotronResult {
  TempotronModel model;  // best snapshot; quantized for AT and DT
  double best_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<IterationTrace> trace;  // one row per epoch, no swap fields
};

TempotronResult train_tempotron(const Dataset& dataset, const TempotronConfig& cfg,
                                const KernelTable& table);
TempotronResult train_tempotron(const Dataset& dataset, const TempotronConfig& cfg,
                                double dt = 1.0);

double tempotron_accuracy(const Dataset& dataset, const TempotronModel& model,
                          const KernelTable& table);

std::string weights_to_json(std::span<const double> weights);

}  // namespace nnld

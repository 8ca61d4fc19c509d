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

#include "nnld/tempotron.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "nnld/error.hpp"
#include "nnld/random.hpp"

namespace nnld {

std::string_view to_string(QuantMode mode) {
  switch (mode) {
    case QuantMode::kNone:
      return "none";
    case QuantMode::kAfterTraining:
      return "AT";
    case QuantMode::kDuringTraining:
      return "DT";
  }
  return "unknown";
}

QuantMode parse_quant_mode(std::string_view name) {
  if (name == "none") return QuantMode::kNone;
  if (name == "AT" || name == "at") return QuantMode::kAfterTraining;
  if (name == "DT" || name == "dt") return QuantMode::kDuringTraining;
  throw ParameterError("unknown quantization mode '" + std::string(name) + "'");
}

void QuantSpec::validate() const {
  if (bits < 1 || bits > 30) throw ParameterError("quantizer bits must be in [1, 30]");
  if (!(range > 0.0) || !std::isfinite(range)) throw ParameterError("quantizer range must be > 0");
}

double quantize_value(double weight, const QuantSpec& spec) {
  const long levels = 1L << spec.bits;
  const double step = 2.0 * spec.range / static_cast<double>(levels - 1);
  const double clipped = std::clamp(weight, -spec.range, spec.range);
  long index = static_cast<long>(std::floor((clipped + spec.range) / step + 0.5));
  index = std::clamp(index, 0L, levels - 1);
  if (index == 0) return -spec.range;
  if (index == levels - 1) return spec.range;
  return -spec.range + static_cast<double>(index) * step;
}

std::vector<double> quantize(std::span<const double> weights, const QuantSpec& spec) {
  spec.validate();
  std::vector<double> out(weights.size());
  std::transform(weights.begin(), weights.end(), out.begin(),
                 [&](double w) { return quantize_value(w, spec); });
  return out;
}

namespace {

struct Peak {
  double v_max = 0.0;
  std::size_t t_index = 0;
};

Peak voltage_peak(const CompiledPattern& pattern, std::span<const double> weights,
                  const KernelTable& table, std::span<double> voltage) {
  std::fill(voltage.begin(), voltage.end(), 0.0);
  const long hi = static_cast<long>(voltage.size()) - 1;
  for (int i = 0; i < pattern.afferent_count(); ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    for (const auto& term : pattern.terms(i)) table.accumulate(term, 0, hi, 0, w, voltage);
  }
  const auto peak = std::max_element(voltage.begin(), voltage.end());
  return Peak{*peak, static_cast<std::size_t>(peak - voltage.begin())};
}

TimeGrid grid_for(const Dataset& dataset, const KernelTable& table) {
  double last_spike = dataset.T;
  for (const auto& pattern : dataset.patterns) {
    for (const auto& train : pattern.afferents) {
      if (!train.empty()) last_spike = std::max(last_spike, train.back());
    }
  }
  return TimeGrid::covering(last_spike, table);
}

TimeGrid grid_for(const SpikePattern& pattern, const KernelTable& table) {
  double last_spike = 0.0;
  for (const auto& train : pattern.afferents) {
    if (!train.empty()) last_spike = std::max(last_spike, train.back());
  }
  return TimeGrid::covering(last_spike, table);
}

void check_size(std::size_t afferents, const TempotronModel& model) {
  if (afferents != model.weights.size()) {
    throw ParameterError("pattern has " + std::to_string(afferents) +
                         " afferents but the tempotron has " +
                         std::to_string(model.weights.size()) + " weights");
  }
}

}  // namespace

EvalResult tempotron_eval(const CompiledPattern& pattern, const TempotronModel& model,
                          const TimeGrid& grid) {
  check_size(static_cast<std::size_t>(pattern.afferent_count()), model);
  if (grid.steps == 0) throw ParameterError("evaluation grid is empty");
  std::vector<double> voltage(grid.steps);
  const auto peak = voltage_peak(pattern, model.weights, pattern.table(), voltage);
  EvalResult result;
  result.v_max = peak.v_max;
  result.t_index = peak.t_index;
  result.t_max = grid.time(peak.t_index);
  result.predicted = peak.v_max >= model.v_thr ? Label::kPositive : Label::kNegative;
  return result;
}

std::vector<double> tempotron_trace(const CompiledPattern& pattern, const TempotronModel& model,
                                    const TimeGrid& grid) {
  check_size(static_cast<std::size_t>(pattern.afferent_count()), model);
  std::vector<double> voltage(grid.steps);
  if (grid.steps > 0) voltage_peak(pattern, model.weights, pattern.table(), voltage);
  return voltage;
}

EvalResult tempotron_eval(const SpikePattern& pattern, const TempotronModel& model,
                          const KernelTable& table) {
  check_size(pattern.afferents.size(), model);
  return tempotron_eval(CompiledPattern(pattern, table), model, grid_for(pattern, table));
}

std::vector<double> tempotron_update(const SpikePattern& pattern, const TempotronModel& model,
                                     const KernelTable& table, double lambda) {
  const CompiledPattern compiled(pattern, table);
  check_size(pattern.afferents.size(), model);
  const auto eval = tempotron_eval(compiled, model, grid_for(pattern, table));
  std::vector<double> delta(model.weights.size(), 0.0);
  if (eval.predicted == pattern.label) return delta;
  const double sign = pattern.label == Label::kPositive ? 1.0 : -1.0;
  for (int i = 0; i < compiled.afferent_count(); ++i) {
    delta[static_cast<std::size_t>(i)] =
        sign * lambda * compiled.psp(i, static_cast<long>(eval.t_index));
  }
  return delta;
}

void TempotronConfig::validate() const {
  if (!(lambda > 0.0)) throw ParameterError("tempotron learning rate must be > 0");
  if (!(v_thr > 0.0)) throw ParameterError("tempotron threshold must be > 0");
  if (max_epochs < 1) throw ParameterError("max_epochs must be >= 1");
  if (!(init_std >= 0.0)) throw ParameterError("init_std must be >= 0");
  if (quant.mode != QuantMode::kNone) quant.validate();
  if (!(dt_lambda_steps > 0.0)) throw ParameterError("dt_lambda_steps must be > 0");
}

double TempotronConfig::effective_lambda() const {
  if (quant.mode != QuantMode::kDuringTraining) return lambda;
  const double levels = std::ldexp(1.0, quant.bits) - 1.0;
  return dt_lambda_steps * 2.0 * quant.range / levels;
}

TempotronResult train_tempotron(const Dataset& dataset, const TempotronConfig& cfg,
                                const KernelTable& table) {
  cfg.validate();
  if (dataset.patterns.empty()) throw ParameterError("cannot train on an empty dataset");
  Rng rng(cfg.seed);
  const auto d = static_cast<std::size_t>(dataset.d);
  TempotronModel model;
  model.v_thr = cfg.v_thr;
  model.kernel = table.params();
  model.weights.resize(d);
  for (auto& w : model.weights) w = cfg.init_std * rng.normal();
  const bool during = cfg.quant.mode == QuantMode::kDuringTraining;
  const double lambda = cfg.effective_lambda();
  if (during) model.weights = quantize(model.weights, cfg.quant);

  const auto grid = grid_for(dataset, table);
  std::vector<CompiledPattern> compiled;
  compiled.reserve(dataset.patterns.size());
  for (const auto& pattern : dataset.patterns) {
    check_size(pattern.afferents.size(), model);
    compiled.emplace_back(pattern, table);
  }
  std::vector<double> voltage(grid.steps);

  // Scores a weight vector as deployed: AT snapshots are range-fitted and quantized.
  const auto deployed = [&](const std::vector<double>& weights) {
    if (cfg.quant.mode != QuantMode::kAfterTraining) return weights;
    double bound = 0.0;
    for (double w : weights) bound = std::max(bound, std::abs(w));
    if (bound == 0.0) return weights;
    return quantize(weights, QuantSpec{cfg.quant.bits, QuantMode::kAfterTraining, bound});
  };

  TempotronResult result;
  result.model = model;
  result.model.weights = deployed(model.weights);
  result.best_accuracy = -1.0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    int updates = 0;
    for (std::size_t p = 0; p < compiled.size(); ++p) {
      const auto peak = voltage_peak(compiled[p], model.weights, table, voltage);
      const Label predicted = peak.v_max >= model.v_thr ? Label::kPositive : Label::kNegative;
      const Label truth = dataset.patterns[p].label;
      if (predicted == truth) continue;
      ++updates;
      const double step = (truth == Label::kPositive ? 1.0 : -1.0) * lambda;
      for (std::size_t i = 0; i < d; ++i) {
        const double psp = compiled[p].psp(static_cast<int>(i), static_cast<long>(peak.t_index));
        if (psp == 0.0) continue;
        model.weights[i] += step * psp;
        if (during) model.weights[i] = quantize_value(model.weights[i], cfg.quant);
      }
    }

    const auto snapshot = deployed(model.weights);
    IterationTrace row;
    row.iter = epoch;
    row.v_thr = model.v_thr;
    for (std::size_t p = 0; p < compiled.size(); ++p) {
      const auto peak = voltage_peak(compiled[p], snapshot, table, voltage);
      const Label predicted = peak.v_max >= model.v_thr ? Label::kPositive : Label::kNegative;
      const Label truth = dataset.patterns[p].label;
      if (predicted == truth) continue;
      if (truth == Label::kNegative) {
        ++row.fp;
      } else {
        ++row.fn;
      }
    }
    row.train_accuracy =
        1.0 - static_cast<double>(row.fp + row.fn) / static_cast<double>(compiled.size());
    result.trace.push_back(row);
    if (row.train_accuracy > result.best_accuracy) {
      result.best_accuracy = row.train_accuracy;
      result.best_epoch = epoch;
      result.model.weights = snapshot;
    }
    if (row.fp + row.fn == 0 || updates == 0) break;
  }
  return result;
}

TempotronResult train_tempotron(const Dataset& dataset, const TempotronConfig& cfg, double dt) {
  const auto table = default_table(cfg.kernel, dt);
  return train_tempotron(dataset, cfg, table);
}

double tempotron_accuracy(const Dataset& dataset, const TempotronModel& model,
                          const KernelTable& table) {
  if (dataset.patterns.empty()) return 0.0;
  const auto grid = grid_for(dataset, table);
  std::size_t correct = 0;
  for (const auto& pattern : dataset.patterns) {
    check_size(pattern.afferents.size(), model);
    if (tempotron_eval(CompiledPattern(pattern, table), model, grid).predicted == pattern.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.patterns.size());
}

std::string weights_to_json(std::span<const double> weights) {
  return nlohmann::json(std::vector<double>(weights.begin(), weights.end())).dump();
}

}  // namespace nnld

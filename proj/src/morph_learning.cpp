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

#include "nnld/morph_learning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "nnld/error.hpp"

namespace nnld {
namespace {

// Keeps v_thr positive when a burst of false negatives overshoots.
constexpr double kThresholdFloor = 1e-9;

int sign_of(Label label) { return label == Label::kPositive ? 1 : -1; }

// Index of the extreme value; exact ties are broken uniformly at random.
template <typename Better>
std::size_t pick_extreme(std::span<const double> values, Rng& rng, Better better) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (better(values[i], values[best])) best = i;
  }
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == values[best]) ties.push_back(i);
  }
  return ties.size() == 1 ? ties.front() : ties[rng.below(ties.size())];
}

}  // namespace

void MorphConfig::validate() const {
  if (n_target < 1) throw ParameterError("n_target must be >= 1");
  if (n_replace < 1) throw ParameterError("n_replace must be >= 1");
  if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (!(eta >= 0.0)) throw ParameterError("eta must be >= 0");
  if (!(w_fp >= 0.0) || !(w_fn >= 0.0)) throw ParameterError("error weightages must be >= 0");
  if (!(v_thr_lo > 0.0) || !(v_thr_hi >= v_thr_lo)) {
    throw ParameterError("initial threshold range must satisfy 0 < lo <= hi");
  }
}

MorphConfig MorphConfig::with_static_threshold(double v_thr, MorphConfig base) {
  base.eta = 0.0;
  base.v_thr_lo = v_thr;
  base.v_thr_hi = v_thr;
  return base;
}

MorphConfig MorphConfig::with_static_threshold(double v_thr) {
  return with_static_threshold(v_thr, MorphConfig{});
}

double correlation_cij(std::span<const ErrorSample> batch, int branch, int afferent,
                       const NeuronParams& params) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& sample : batch) {
    if (sample.eval->predicted == sample.label) continue;
    ++count;
    const auto& drives = sample.eval->branch_drives_at_tmax;
    if (branch < 0 || static_cast<std::size_t>(branch) >= drives.size()) {
      throw IndexError("branch " + std::to_string(branch) + " out of range");
    }
    const double slope =
        branch_nonlinearity_slope(drives[static_cast<std::size_t>(branch)], params);
    if (slope == 0.0) continue;
    const double psp = sample.pattern->psp(afferent, static_cast<long>(sample.eval->t_index));
    total += sign_of(sample.label) * slope * psp;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double threshold_update(int fp, int fn, const MorphConfig& cfg) {
  return cfg.eta * (cfg.w_fp * fp - cfg.w_fn * fn);
}

MorphTrainer::MorphTrainer(const Dataset& dataset, NnldModel initial, const KernelTable& table,
                           MorphConfig cfg)
    : dataset_(&dataset),
      table_(&table),
      cfg_(cfg),
      model_(std::move(initial)),
      grid_(TimeGrid::covering(dataset.T, table)),
      scale_(model_.params) {
  cfg_.validate();
  model_.validate();
  if (dataset.patterns.empty()) throw ParameterError("cannot train on an empty dataset");
  if (dataset.d != model_.conn.afferent_count()) {
    throw ParameterError("dataset d does not match the model's afferent count");
  }
  // Late spikes in encoded data may run past T; extend the grid to cover them.
  double last_spike = 0.0;
  for (const auto& pattern : dataset.patterns) {
    for (const auto& train : pattern.afferents) {
      if (!train.empty()) last_spike = std::max(last_spike, train.back());
    }
  }
  if (last_spike > dataset.T) grid_ = TimeGrid::covering(last_spike, table);

  compiled_.reserve(dataset.patterns.size());
  voltage_.reserve(dataset.patterns.size());
  evals_.reserve(dataset.patterns.size());
  for (const auto& pattern : dataset.patterns) {
    compiled_.emplace_back(pattern, table);
    voltage_.push_back(membrane_trace(compiled_.back(), model_, table, grid_, scale_));
    const auto& voltage = voltage_.back();
    const auto peak = std::max_element(voltage.begin(), voltage.end());
    EvalResult eval;
    eval.t_index = static_cast<std::size_t>(peak - voltage.begin());
    eval.t_max = grid_.time(eval.t_index);
    eval.v_max = scale_.decode(*peak);
    eval.branch_drives_at_tmax.resize(static_cast<std::size_t>(model_.params.m));
    for (int j = 0; j < model_.params.m; ++j) {
      eval.branch_drives_at_tmax[static_cast<std::size_t>(j)] =
          branch_drive(compiled_.back(), model_.conn.branch(j), static_cast<long>(eval.t_index));
    }
    eval.predicted = eval.v_max >= model_.v_thr ? Label::kPositive : Label::kNegative;
    evals_.push_back(std::move(eval));
  }
  old_drive_.resize(grid_.steps);
  new_drive_.resize(grid_.steps);
}

Label MorphTrainer::classify(std::size_t p) const {
  return evals_[p].v_max >= model_.v_thr ? Label::kPositive : Label::kNegative;
}

std::size_t MorphTrainer::errors() const {
  std::size_t wrong = 0;
  for (std::size_t p = 0; p < evals_.size(); ++p) {
    if (classify(p) != dataset_->patterns[p].label) ++wrong;
  }
  return wrong;
}

double MorphTrainer::accuracy() const {
  return 1.0 - static_cast<double>(errors()) / static_cast<double>(evals_.size());
}

void MorphTrainer::refresh(std::size_t p, int branch, std::span<const int> old_slots) {
  const auto& compiled = compiled_[p];
  const auto new_slots = model_.conn.branch(branch);
  const long grid_last = static_cast<long>(grid_.steps) - 1;

  // Only the supports of the removed and added afferents can change.
  auto& spans = spans_;
  spans.clear();
  for (std::size_t s = 0; s < old_slots.size(); ++s) {
    if (old_slots[s] == new_slots[s]) continue;
    for (int a : {old_slots[s], new_slots[s]}) {
      for (const auto& term : compiled.terms(a)) {
        const long lo = std::max(0L, term.first);
        const long hi = std::min(grid_last, term.last);
        if (lo <= hi) spans.emplace_back(lo, hi);
      }
    }
  }
  std::sort(spans.begin(), spans.end());

  auto& eval = evals_[p];
  auto& voltage = voltage_[p];
  const std::int64_t old_peak = voltage[eval.t_index];
  bool peak_lowered = false;
  std::int64_t window_peak = std::numeric_limits<std::int64_t>::min();
  std::size_t window_index = 0;
  std::size_t i = 0;
  while (i < spans.size()) {
    long lo = spans[i].first;
    long hi = spans[i].second;
    for (++i; i < spans.size() && spans[i].first <= hi + 1; ++i) hi = std::max(hi, spans[i].second);
    branch_drive_window(compiled, old_slots, *table_, lo, hi, old_drive_);
    branch_drive_window(compiled, new_slots, *table_, lo, hi, new_drive_);
    for (long g = lo; g <= hi; ++g) {
      const auto n = static_cast<std::size_t>(g - lo);
      auto& v = voltage[static_cast<std::size_t>(g)];
      if (old_drive_[n] != new_drive_[n]) {
        const std::int64_t before =
            old_drive_[n] != 0.0 ? scale_.encode(branch_nonlinearity(old_drive_[n], model_.params))
                                 : 0;
        const std::int64_t after =
            new_drive_[n] != 0.0 ? scale_.encode(branch_nonlinearity(new_drive_[n], model_.params))
                                 : 0;
        v += after - before;
        if (static_cast<std::size_t>(g) == eval.t_index && after < before) peak_lowered = true;
      }
      if (v > window_peak) {
        window_peak = v;
        window_index = static_cast<std::size_t>(g);
      }
    }
  }

  // The old peak still bounds everything outside the windows unless it dropped.
  std::size_t t_index = eval.t_index;
  if (peak_lowered) {
    const auto peak = std::max_element(voltage.begin(), voltage.end());
    t_index = static_cast<std::size_t>(peak - voltage.begin());
  } else if (window_peak > old_peak || (window_peak == old_peak && window_index < t_index)) {
    t_index = window_index;
  }
  eval.v_max = scale_.decode(voltage[t_index]);
  if (t_index != eval.t_index) {
    eval.t_index = t_index;
    eval.t_max = grid_.time(t_index);
    for (int j = 0; j < model_.params.m; ++j) {
      eval.branch_drives_at_tmax[static_cast<std::size_t>(j)] =
          branch_drive(compiled, model_.conn.branch(j), static_cast<long>(t_index));
    }
  } else {
    eval.branch_drives_at_tmax[static_cast<std::size_t>(branch)] =
        branch_drive(compiled, new_slots, static_cast<long>(t_index));
  }
}

IterationTrace MorphTrainer::step(Rng& rng) {
  IterationTrace trace;
  std::vector<ErrorSample> batch;
  for (std::size_t p = 0; p < evals_.size(); ++p) {
    auto& eval = evals_[p];
    eval.predicted = classify(p);
    const Label truth = dataset_->patterns[p].label;
    if (eval.predicted == truth) continue;
    if (truth == Label::kNegative) {
      ++trace.fp;
    } else {
      ++trace.fn;
    }
    batch.push_back(ErrorSample{&compiled_[p], &eval, truth});
  }
  trace.train_accuracy =
      1.0 - static_cast<double>(batch.size()) / static_cast<double>(evals_.size());

  if (!batch.empty()) {
    const int k = model_.params.k;
    const int total_slots = model_.conn.slot_count();
    trace.target_clamped = cfg_.n_target > total_slots;
    const auto targets = rng.sample(total_slots, cfg_.n_target);
    std::vector<double> fitness(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const int j = targets[t] / k;
      fitness[t] = correlation_cij(batch, j, model_.conn.at(j, targets[t] % k), model_.params);
    }
    const int worst = targets[pick_extreme(fitness, rng, std::less<>())];
    const int branch = worst / k;
    const int slot = worst % k;

    // Silent synapses: scored against the unchanged drives and t_max.
    const auto candidates = rng.sample(model_.conn.afferent_count(), cfg_.n_replace);
    fitness.resize(candidates.size());
    for (std::size_t r = 0; r < candidates.size(); ++r) {
      fitness[r] = correlation_cij(batch, branch, candidates[r], model_.params);
    }
    const int best = candidates[pick_extreme(fitness, rng, std::greater<>())];

    const auto row = model_.conn.branch(branch);
    const std::vector<int> old_slots(row.begin(), row.end());
    const int removed = model_.conn.replace(branch, slot, best);
    trace.swapped = SwapRecord{branch, slot, removed, best};
    if (removed != best) {
      for (std::size_t p = 0; p < evals_.size(); ++p) refresh(p, branch, old_slots);
    }
  }

  model_.v_thr = std::max(model_.v_thr + threshold_update(trace.fp, trace.fn, cfg_),
                          kThresholdFloor);
  trace.v_thr = model_.v_thr;
  for (std::size_t p = 0; p < evals_.size(); ++p) evals_[p].predicted = classify(p);
  return trace;
}

std::pair<NnldModel, IterationTrace> train_iteration(const NnldModel& model,
                                                     const Dataset& dataset,
                                                     const KernelTable& table,
                                                     const MorphConfig& cfg, Rng& rng) {
  MorphTrainer trainer(dataset, model, table, cfg);
  auto trace = trainer.step(rng);
  return {trainer.model(), trace};
}

MorphResult train(const Dataset& dataset, const NeuronParams& params, const MorphConfig& cfg,
                  const KernelTable& table) {
  cfg.validate();
  params.validate();
  Rng rng(cfg.seed);
  NnldModel initial;
  initial.params = params;
  initial.conn = init_connections(dataset.d, params, rng.next());
  initial.v_thr =
      cfg.v_thr_hi > cfg.v_thr_lo ? rng.uniform(cfg.v_thr_lo, cfg.v_thr_hi) : cfg.v_thr_lo;

  MorphTrainer trainer(dataset, std::move(initial), table, cfg);
  MorphResult result;
  result.model = trainer.model();
  result.best_accuracy = trainer.accuracy();
  result.trace.reserve(static_cast<std::size_t>(cfg.max_iters));
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    auto trace = trainer.step(rng);
    trace.iter = iter;
    const bool done = trace.fp + trace.fn == 0;
    result.trace.push_back(trace);
    if (done) break;
    const double acc = trainer.accuracy();
    if (acc > result.best_accuracy) {
      result.best_accuracy = acc;
      result.best_iter = iter + 1;
      result.model = trainer.model();
    }
  }
  return result;
}

MorphResult train(const Dataset& dataset, const NeuronParams& params, const MorphConfig& cfg,
                  double dt) {
  const auto table = default_table(params.kernel, dt);
  return train(dataset, params, cfg, table);
}

double histogram_mode(std::span<const double> samples) {
  if (samples.empty()) throw ParameterError("histogram needs at least one sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (lo == hi) return lo;
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(pos));
    const auto above = std::min(below + 1, sorted.size() - 1);
    return sorted[below] + (pos - static_cast<double>(below)) * (sorted[above] - sorted[below]);
  };
  const double n = static_cast<double>(sorted.size());
  double width = 2.0 * (quantile(0.75) - quantile(0.25)) / std::cbrt(n);
  if (!(width > 0.0)) {
    // Zero IQR with a non-zero range: fall back to Sturges' bin count.
    width = (hi - lo) / std::ceil(std::log2(n) + 1.0);
  }
  const auto bins = static_cast<std::size_t>(std::ceil((hi - lo) / width)) + 1;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : sorted) {
    ++counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / width))];
  }
  const auto mode = static_cast<std::size_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
  return lo + (static_cast<double>(mode) + 0.5) * width;
}

double static_threshold(const NeuronParams& params, int d, double T, int n_samples,
                        std::uint64_t seed, double dt) {
  params.validate();
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  if (d < 1) throw ParameterError("afferent count d must be >= 1");
  if (!(T >= 1.0)) throw ParameterError("pattern duration T must be >= 1 ms");
  const auto table = default_table(params.kernel, dt);
  const auto grid = TimeGrid::covering(T, table);
  const VoltageScale scale(params);
  Rng rng(seed);
  std::vector<double> peaks;
  peaks.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    const auto pattern = gen_latency(1, d, T, rng.next()).patterns.front();
    NnldModel model;
    model.params = params;
    model.conn = init_connections(d, params, rng.next());
    model.v_thr = 1.0;
    const CompiledPattern compiled(pattern, table);
    const auto voltage = membrane_trace(compiled, model, table, grid, scale);
    peaks.push_back(scale.decode(*std::max_element(voltage.begin(), voltage.end())));
  }
  return histogram_mode(peaks);
}

std::vector<Label> classify_all(const Dataset& dataset, const NnldModel& model,
                                const KernelTable& table) {
  double last_spike = dataset.T;
  for (const auto& pattern : dataset.patterns) {
    for (const auto& train : pattern.afferents) {
      if (!train.empty()) last_spike = std::max(last_spike, train.back());
    }
  }
  const auto grid = TimeGrid::covering(last_spike, table);
  std::vector<Label> out;
  out.reserve(dataset.patterns.size());
  for (const auto& pattern : dataset.patterns) {
    out.push_back(eval_pattern(pattern, model, table, grid).predicted);
  }
  return out;
}

double accuracy(const Dataset& dataset, const NnldModel& model, const KernelTable& table) {
  if (dataset.patterns.empty()) return 0.0;
  const auto predicted = classify_all(dataset, model, table);
  std::size_t correct = 0;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    if (predicted[p] == dataset.patterns[p].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

void write_trace_csv(std::span<const IterationTrace> trace, std::ostream& out) {
  out << "iter,accuracy,fp,fn,v_thr,swap_branch,swap_out,swap_in\n";
  out << std::setprecision(17);
  for (const auto& row : trace) {
    out << row.iter << ',' << row.train_accuracy << ',' << row.fp << ',' << row.fn << ','
        << row.v_thr << ',';
    if (row.swapped) {
      out << row.swapped->branch << ',' << row.swapped->removed << ',' << row.swapped->added;
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

}  // namespace nnld

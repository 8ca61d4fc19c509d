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
#include <span>
#include <string>
#include <vector>

#include "nnld/kernel.hpp"
#include "nnld/spike_data.hpp"

namespace nnld {

struct NeuronParams {
  int m = 100;  // dendritic branches
  int k = 5;    // synaptic slots per branch
  double x_thr = 1.0;
  double x_sat = 100.0;
  KernelParams kernel = KernelParams::with_default_ratio(15.0);

  void validate() const;
  bool operator==(const NeuronParams&) const = default;
};

// b(v) = min(v^2 / x_thr, x_sat).
inline double branch_nonlinearity(double v, const NeuronParams& params) {
  const double out = v * v / params.x_thr;
  return out < params.x_sat ? out : params.x_sat;
}
// b'(v) = 2v / x_thr below saturation, 0 once saturated.
double branch_nonlinearity_slope(double v, const NeuronParams& params);

// Which afferent occupies each of the k slots of each of the m branches.
// An afferent may hold several slots on one branch; its multiplicity there is
// its integer weight.
class ConnectionMap {
 public:
  ConnectionMap() = default;
  ConnectionMap(int d, int k, std::vector<std::vector<int>> slots);

  int afferent_count() const { return d_; }
  int branch_count() const { return static_cast<int>(slots_.size()); }
  int slots_per_branch() const { return k_; }
  int slot_count() const { return branch_count() * k_; }

  std::span<const int> branch(int j) const;
  int at(int branch, int slot) const;
  // Returns the afferent that was replaced.
  int replace(int branch, int slot, int afferent);
  int multiplicity(int afferent, int branch) const;

  const std::vector<std::vector<int>>& slots() const { return slots_; }
  bool operator==(const ConnectionMap&) const = default;

 private:
  int d_ = 0;
  int k_ = 0;
  std::vector<std::vector<int>> slots_;
};

ConnectionMap init_connections(int d, const NeuronParams& params, std::uint64_t seed);

struct NnldModel {
  NeuronParams params;
  ConnectionMap conn;
  double v_thr = 1.0;

  void validate() const;
  bool operator==(const NnldModel&) const = default;
};

// Uniform evaluation grid t_g = g * dt, g = 0 .. steps-1.
struct TimeGrid {
  double dt = 1.0;
  std::size_t steps = 0;

  double time(std::size_t g) const { return static_cast<double>(g) * dt; }
  // Covers [0, duration + 5 tau] so late PSPs decay before the grid ends.
  static TimeGrid covering(double duration, const KernelTable& table);
};

// Default kernel tables use an 8 tau horizon (kernel below 1e-3 beyond it).
KernelTable default_table(const KernelParams& kernel, double dt = 1.0);

struct EvalResult {
  double v_max = 0.0;
  double t_max = 0.0;
  std::size_t t_index = 0;
  std::vector<double> branch_drives_at_tmax;
  Label predicted = Label::kNegative;
};

// Spike terms of one pattern, grouped per afferent, against a kernel table.
class CompiledPattern {
 public:
  CompiledPattern(const SpikePattern& pattern, const KernelTable& table);

  std::span<const KernelTable::SpikeTerm> terms(int afferent) const {
    const auto a = static_cast<std::size_t>(afferent);
    return {terms_.data() + offsets_[a], offsets_[a + 1] - offsets_[a]};
  }
  int afferent_count() const { return static_cast<int>(offsets_.size()) - 1; }
  const KernelTable& table() const { return *table_; }
  // sum_f K(t_g - t_f) for one afferent.
  double psp(int afferent, long g) const {
    double total = 0.0;
    for (const auto& term : terms(afferent)) {
      if (g >= term.first && g <= term.last) total += table_->term_value(term, g);
    }
    return total;
  }

 private:
  const KernelTable* table_;
  std::vector<KernelTable::SpikeTerm> terms_;
  std::vector<std::size_t> offsets_;
};

// Somatic voltages are accumulated as fixed-point integers so that a sum
// updated one branch at a time stays bit-identical to a fresh evaluation.
class VoltageScale {
 public:
  explicit VoltageScale(const NeuronParams& params);
  // Branch outputs are non-negative, so truncating value + 0.5 rounds to nearest.
  std::int64_t encode(double value) const {
    return static_cast<std::int64_t>(value * scale_ + 0.5);
  }
  double decode(std::int64_t value) const { return static_cast<double>(value) * inverse_; }

 private:
  double scale_;
  double inverse_;
};

// v_j(t_g) for one branch, summed slot by slot.
double branch_drive(const CompiledPattern& pattern, std::span<const int> slots, long g);
double branch_drive(const SpikePattern& pattern, int branch, double t, const ConnectionMap& conn,
                    const KernelTable& table);

// Fills drive[g - lo] with v_j(t_g) for g in [lo, hi]. Summation order matches
// branch_drive() so both give identical doubles.
void branch_drive_window(const CompiledPattern& pattern, std::span<const int> slots,
                         const KernelTable& table, long lo, long hi, std::span<double> drive);

double membrane_voltage(const SpikePattern& pattern, const NnldModel& model,
                        const KernelTable& table, double t);

// Fixed-point V(t_g) for the whole grid.
std::vector<std::int64_t> membrane_trace(const CompiledPattern& pattern, const NnldModel& model,
                                         const KernelTable& table, const TimeGrid& grid,
                                         const VoltageScale& scale);

EvalResult eval_pattern(const CompiledPattern& pattern, const NnldModel& model,
                        const KernelTable& table, const TimeGrid& grid);
EvalResult eval_pattern(const SpikePattern& pattern, const NnldModel& model,
                        const KernelTable& table, const TimeGrid& grid);

// Snapshot: params, v_thr and the m x k slot table.
void save_model(const NnldModel& model, const std::filesystem::path& path);
NnldModel load_model(const std::filesystem::path& path);
std::string model_to_json(const NnldModel& model);
NnldModel model_from_json(std::string_view text);

}  // namespace nnld

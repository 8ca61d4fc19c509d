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

#include <cstddef>
#include <span>
#include <vector>

namespace nnld {

// Double-exponential PSP kernel K(s) = v0 * (exp(-s/tau) - exp(-s/tau_s)),
// normalized so that its peak is exactly 1. Times are in ms.
struct KernelParams {
  double tau = 15.0;
  double tau_s = 3.75;
  double v0 = 0.0;

  // tau_s = tau / 4, the ratio used throughout the experiments.
  static KernelParams with_default_ratio(double tau = 15.0);
  // Any tau > tau_s > 0.
  static KernelParams make(double tau, double tau_s);

  double peak_lag() const;
  void validate() const;
  bool operator==(const KernelParams&) const = default;
};

// Lag at which the unnormalized kernel peaks: tau*tau_s/(tau-tau_s) * ln(tau/tau_s).
double kernel_peak_lag(double tau, double tau_s);
double normalization_v0(double tau, double tau_s);
// Causal: zero for lag < 0.
double kernel_value(double lag, const KernelParams& params);

// Kernel sampled at lags 0, dt, 2*dt, ... up to the horizon. Also carries the
// two exponential components separately so that spikes falling between grid
// points can be evaluated exactly without a per-sample exp().
class KernelTable {
 public:
  // Contribution of one spike to the grid. Grid index g (time g*dt) receives
  // a * decay_tau[g - first] - b * decay_tau_s[g - first] for g in [first, last].
  struct SpikeTerm {
    long first = 0;
    long last = -1;
    double a = 0.0;
    double b = 0.0;
  };

  KernelTable(const KernelParams& params, double dt, double horizon);

  const KernelParams& params() const { return params_; }
  double dt() const { return dt_; }
  double horizon() const { return horizon_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  // Kernel at an arbitrary lag; 0 outside [0, horizon].
  double lookup(double lag) const;

  SpikeTerm spike_term(double spike_time) const;
  double term_value(const SpikeTerm& term, long grid_index) const {
    if (grid_index < term.first || grid_index > term.last) return 0.0;
    const auto n = static_cast<std::size_t>(grid_index - term.first);
    return term.a * decay_tau_[n] - term.b * decay_tau_s_[n];
  }
  // Adds scale * K to out[g - offset] for every g of the term inside [lo, hi].
  void accumulate(const SpikeTerm& term, long lo, long hi, long offset, double scale,
                  std::span<double> out) const {
    const long from = lo > term.first ? lo : term.first;
    const long to = hi < term.last ? hi : term.last;
    for (long g = from; g <= to; ++g) {
      const auto n = static_cast<std::size_t>(g - term.first);
      out[static_cast<std::size_t>(g - offset)] +=
          scale * (term.a * decay_tau_[n] - term.b * decay_tau_s_[n]);
    }
  }

 private:
  KernelParams params_;
  double dt_;
  double horizon_;
  std::vector<double> values_;
  std::vector<double> decay_tau_;
  std::vector<double> decay_tau_s_;
};

}  // namespace nnld

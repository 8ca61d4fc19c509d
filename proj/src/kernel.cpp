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

#include "nnld/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnld/error.hpp"

namespace nnld {
namespace {

void check_time_constants(double tau, double tau_s) {
  if (!(tau_s > 0.0) || !(tau > tau_s) || !std::isfinite(tau)) {
    throw ParameterError("kernel requires tau > tau_s > 0 (got tau=" +
                         std::to_string(tau) + ", tau_s=" + std::to_string(tau_s) + ")");
  }
}

}  // namespace

double kernel_peak_lag(double tau, double tau_s) {
  check_time_constants(tau, tau_s);
  return tau * tau_s / (tau - tau_s) * std::log(tau / tau_s);
}

double normalization_v0(double tau, double tau_s) {
  const double t_peak = kernel_peak_lag(tau, tau_s);
  return 1.0 / (std::exp(-t_peak / tau) - std::exp(-t_peak / tau_s));
}

KernelParams KernelParams::make(double tau, double tau_s) {
  return KernelParams{tau, tau_s, normalization_v0(tau, tau_s)};
}

KernelParams KernelParams::with_default_ratio(double tau) { return make(tau, tau / 4.0); }

double KernelParams::peak_lag() const { return kernel_peak_lag(tau, tau_s); }

void KernelParams::validate() const {
  check_time_constants(tau, tau_s);
  if (!(v0 > 0.0)) throw ParameterError("kernel v0 must be positive");
}

double kernel_value(double lag, const KernelParams& params) {
  if (lag < 0.0) return 0.0;
  // Written as a difference of two scaled exponentials so that table entries
  // and spike terms reproduce it bit for bit.
  return params.v0 * std::exp(-lag / params.tau) - params.v0 * std::exp(-lag / params.tau_s);
}

KernelTable::KernelTable(const KernelParams& params, double dt, double horizon)
    : params_(params), dt_(dt), horizon_(horizon) {
  params_.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("kernel table dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ParameterError("kernel table horizon must be positive");
  }
  const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  values_.resize(steps + 1);
  decay_tau_.resize(steps + 1);
  decay_tau_s_.resize(steps + 1);
  for (std::size_t n = 0; n <= steps; ++n) {
    const double lag = static_cast<double>(n) * dt;
    decay_tau_[n] = std::exp(-lag / params_.tau);
    decay_tau_s_[n] = std::exp(-lag / params_.tau_s);
    values_[n] = params_.v0 * decay_tau_[n] - params_.v0 * decay_tau_s_[n];
  }
}

double KernelTable::lookup(double lag) const {
  if (lag < 0.0 || lag > horizon_) return 0.0;
  const double pos = lag / dt_;
  const double n = std::round(pos);
  if (std::abs(pos - n) <= 1e-12 * std::max(1.0, pos) && n < static_cast<double>(values_.size())) {
    return values_[static_cast<std::size_t>(n)];
  }
  return kernel_value(lag, params_);
}

KernelTable::SpikeTerm KernelTable::spike_term(double spike_time) const {
  SpikeTerm term;
  const double pos = spike_time / dt_;
  double first = std::ceil(pos);
  // Spikes within rounding noise of a grid point land on it.
  if (first - pos > 1.0 - 1e-9) first -= 1.0;
  const double offset = std::max(0.0, first * dt_ - spike_time);
  term.first = static_cast<long>(first);
  const auto max_steps = static_cast<long>(values_.size()) - 1;
  const auto span = static_cast<long>(std::floor((horizon_ - offset) / dt_ + 1e-9));
  term.last = term.first + std::min(span, max_steps);
  if (offset == 0.0) {
    term.a = params_.v0;
    term.b = params_.v0;
  } else {
    term.a = params_.v0 * std::exp(-offset / params_.tau);
    term.b = params_.v0 * std::exp(-offset / params_.tau_s);
  }
  return term;
}

}  // namespace nnld

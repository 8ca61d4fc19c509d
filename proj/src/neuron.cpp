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

#include "nnld/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nnld/error.hpp"
#include "nnld/random.hpp"

namespace nnld {

using nlohmann::json;

void NeuronParams::validate() const {
  if (m < 1) throw ParameterError("branch count m must be >= 1");
  if (k < 1) throw ParameterError("slots per branch k must be >= 1");
  if (!(x_thr > 0.0) || !std::isfinite(x_thr)) throw ParameterError("x_thr must be positive");
  if (!(x_sat > 0.0) || !std::isfinite(x_sat)) throw ParameterError("x_sat must be positive");
  kernel.validate();
}

double branch_nonlinearity_slope(double v, const NeuronParams& params) {
  if (v * v / params.x_thr >= params.x_sat) return 0.0;
  return 2.0 * v / params.x_thr;
}

ConnectionMap::ConnectionMap(int d, int k, std::vector<std::vector<int>> slots)
    : d_(d), k_(k), slots_(std::move(slots)) {
  if (d_ < 1) throw ParameterError("connection map needs d >= 1");
  if (k_ < 1) throw ParameterError("connection map needs k >= 1");
  if (slots_.empty()) throw ParameterError("connection map needs at least one branch");
  for (std::size_t j = 0; j < slots_.size(); ++j) {
    if (slots_[j].size() != static_cast<std::size_t>(k_)) {
      throw ParameterError("branch " + std::to_string(j) + " has " +
                           std::to_string(slots_[j].size()) + " slots, expected " +
                           std::to_string(k_));
    }
    for (int a : slots_[j]) {
      if (a < 0 || a >= d_) {
        throw ParameterError("branch " + std::to_string(j) + " references afferent " +
                             std::to_string(a) + " outside [0, " + std::to_string(d_) + ")");
      }
    }
  }
}

std::span<const int> ConnectionMap::branch(int j) const {
  if (j < 0 || j >= branch_count()) {
    throw IndexError("branch " + std::to_string(j) + " out of range");
  }
  return slots_[static_cast<std::size_t>(j)];
}

int ConnectionMap::at(int branch_index, int slot) const {
  const auto row = branch(branch_index);
  if (slot < 0 || slot >= k_) throw IndexError("slot " + std::to_string(slot) + " out of range");
  return row[static_cast<std::size_t>(slot)];
}

int ConnectionMap::replace(int branch_index, int slot, int afferent) {
  const int previous = at(branch_index, slot);
  if (afferent < 0 || afferent >= d_) {
    throw IndexError("afferent " + std::to_string(afferent) + " out of range");
  }
  slots_[static_cast<std::size_t>(branch_index)][static_cast<std::size_t>(slot)] = afferent;
  return previous;
}

int ConnectionMap::multiplicity(int afferent, int branch_index) const {
  const auto row = branch(branch_index);
  return static_cast<int>(std::count(row.begin(), row.end(), afferent));
}

ConnectionMap init_connections(int d, const NeuronParams& params, std::uint64_t seed) {
  params.validate();
  if (d < 1) throw ParameterError("afferent count d must be >= 1");
  Rng rng(seed);
  std::vector<std::vector<int>> slots(static_cast<std::size_t>(params.m));
  for (auto& row : slots) {
    row.resize(static_cast<std::size_t>(params.k));
    for (auto& a : row) a = rng.index(static_cast<std::size_t>(d));
  }
  return ConnectionMap(d, params.k, std::move(slots));
}

void NnldModel::validate() const {
  params.validate();
  if (conn.branch_count() != params.m || conn.slots_per_branch() != params.k) {
    throw ParameterError("connection map shape does not match neuron params");
  }
  if (!(v_thr > 0.0) || !std::isfinite(v_thr)) throw ParameterError("v_thr must be positive");
}

TimeGrid TimeGrid::covering(double duration, const KernelTable& table) {
  if (!(duration >= 0.0)) throw ParameterError("grid duration must be non-negative");
  const double end = duration + 5.0 * table.params().tau;
  return TimeGrid{table.dt(), static_cast<std::size_t>(std::floor(end / table.dt() + 1e-9)) + 1};
}

KernelTable default_table(const KernelParams& kernel, double dt) {
  return KernelTable(kernel, dt, 8.0 * kernel.tau);
}

CompiledPattern::CompiledPattern(const SpikePattern& pattern, const KernelTable& table)
    : table_(&table) {
  offsets_.reserve(pattern.afferents.size() + 1);
  offsets_.push_back(0);
  terms_.reserve(pattern.spike_count());
  for (const auto& train : pattern.afferents) {
    for (double t : train) terms_.push_back(table.spike_term(t));
    offsets_.push_back(terms_.size());
  }
}

VoltageScale::VoltageScale(const NeuronParams& params) {
  const double bound = static_cast<double>(params.m) * params.x_sat;
  const int exponent = static_cast<int>(std::floor(61.0 - std::log2(bound)));
  scale_ = std::ldexp(1.0, exponent);
  inverse_ = std::ldexp(1.0, -exponent);
}


double branch_drive(const CompiledPattern& pattern, std::span<const int> slots, long g) {
  const auto& table = pattern.table();
  double drive = 0.0;
  for (int a : slots) {
    for (const auto& term : pattern.terms(a)) {
      if (g >= term.first && g <= term.last) drive += table.term_value(term, g);
    }
  }
  return drive;
}

void branch_drive_window(const CompiledPattern& pattern, std::span<const int> slots,
                         const KernelTable& table, long lo, long hi, std::span<double> drive) {
  std::fill(drive.begin(), drive.begin() + (hi - lo + 1), 0.0);
  for (int a : slots) {
    for (const auto& term : pattern.terms(a)) table.accumulate(term, lo, hi, lo, 1.0, drive);
  }
}

namespace {

long grid_index(double t, const KernelTable& table) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("time must be a non-negative grid time");
  return std::lround(t / table.dt());
}

void check_afferents(const SpikePattern& pattern, const ConnectionMap& conn) {
  if (pattern.afferents.size() != static_cast<std::size_t>(conn.afferent_count())) {
    throw ParameterError("pattern has " + std::to_string(pattern.afferents.size()) +
                         " afferents but the model expects " +
                         std::to_string(conn.afferent_count()));
  }
}

}  // namespace

double branch_drive(const SpikePattern& pattern, int branch, double t, const ConnectionMap& conn,
                    const KernelTable& table) {
  const auto slots = conn.branch(branch);
  check_afferents(pattern, conn);
  const CompiledPattern compiled(pattern, table);
  return branch_drive(compiled, slots, grid_index(t, table));
}

double membrane_voltage(const SpikePattern& pattern, const NnldModel& model,
                        const KernelTable& table, double t) {
  check_afferents(pattern, model.conn);
  const CompiledPattern compiled(pattern, table);
  const VoltageScale scale(model.params);
  const long g = grid_index(t, table);
  std::int64_t total = 0;
  for (int j = 0; j < model.conn.branch_count(); ++j) {
    total += scale.encode(
        branch_nonlinearity(branch_drive(compiled, model.conn.branch(j), g), model.params));
  }
  return scale.decode(total);
}

std::vector<std::int64_t> membrane_trace(const CompiledPattern& pattern, const NnldModel& model,
                                         const KernelTable& table, const TimeGrid& grid,
                                         const VoltageScale& scale) {
  if (grid.steps == 0) throw ParameterError("evaluation grid is empty");
  const long hi = static_cast<long>(grid.steps) - 1;
  std::vector<std::int64_t> voltage(grid.steps, 0);
  std::vector<double> drive(grid.steps);
  for (int j = 0; j < model.conn.branch_count(); ++j) {
    branch_drive_window(pattern, model.conn.branch(j), table, 0, hi, drive);
    for (std::size_t g = 0; g < grid.steps; ++g) {
      if (drive[g] != 0.0) voltage[g] += scale.encode(branch_nonlinearity(drive[g], model.params));
    }
  }
  return voltage;
}

EvalResult eval_pattern(const CompiledPattern& pattern, const NnldModel& model,
                        const KernelTable& table, const TimeGrid& grid) {
  if (pattern.afferent_count() != model.conn.afferent_count()) {
    throw ParameterError("pattern afferent count does not match the model");
  }
  const VoltageScale scale(model.params);
  const auto voltage = membrane_trace(pattern, model, table, grid, scale);
  // max_element returns the first maximum, so ties go to the earliest time.
  const auto peak = std::max_element(voltage.begin(), voltage.end());
  EvalResult result;
  result.t_index = static_cast<std::size_t>(peak - voltage.begin());
  result.t_max = grid.time(result.t_index);
  result.v_max = scale.decode(*peak);
  result.branch_drives_at_tmax.resize(static_cast<std::size_t>(model.conn.branch_count()));
  for (int j = 0; j < model.conn.branch_count(); ++j) {
    result.branch_drives_at_tmax[static_cast<std::size_t>(j)] =
        branch_drive(pattern, model.conn.branch(j), static_cast<long>(result.t_index));
  }
  result.predicted = result.v_max >= model.v_thr ? Label::kPositive : Label::kNegative;
  return result;
}

EvalResult eval_pattern(const SpikePattern& pattern, const NnldModel& model,
                        const KernelTable& table, const TimeGrid& grid) {
  check_afferents(pattern, model.conn);
  return eval_pattern(CompiledPattern(pattern, table), model, table, grid);
}

std::string model_to_json(const NnldModel& model) {
  json out;
  out["params"] = {{"m", model.params.m},
                   {"k", model.params.k},
                   {"x_thr", model.params.x_thr},
                   {"x_sat", model.params.x_sat},
                   {"tau", model.params.kernel.tau},
                   {"tau_s", model.params.kernel.tau_s}};
  out["d"] = model.conn.afferent_count();
  out["v_thr"] = model.v_thr;
  out["slots"] = model.conn.slots();
  return out.dump(2);
}

NnldModel model_from_json(std::string_view text) {
  try {
    const auto in = json::parse(text);
    NnldModel model;
    const auto& p = in.at("params");
    model.params.m = p.at("m").get<int>();
    model.params.k = p.at("k").get<int>();
    model.params.x_thr = p.at("x_thr").get<double>();
    model.params.x_sat = p.at("x_sat").get<double>();
    model.params.kernel = KernelParams::make(p.at("tau").get<double>(), p.at("tau_s").get<double>());
    model.v_thr = in.at("v_thr").get<double>();
    model.conn = ConnectionMap(in.at("d").get<int>(), model.params.k,
                               in.at("slots").get<std::vector<std::vector<int>>>());
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model snapshot: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("model snapshot: ") + e.what());
  }
}

void save_model(const NnldModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << model_to_json(model) << '\n';
}

NnldModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace nnld

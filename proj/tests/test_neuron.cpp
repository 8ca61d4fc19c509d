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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nnld/error.hpp"
#include "nnld/neuron.hpp"
#include "nnld/random.hpp"
#include "oracles.hpp"

using namespace nnld;

namespace {

SpikePattern pattern_of(std::vector<std::vector<double>> spikes) {
  SpikePattern p;
  p.afferents = std::move(spikes);
  return p;
}

NnldModel model_of(int d, std::vector<std::vector<int>> slots, double v_thr = 1.0) {
  NnldModel model;
  model.params.m = static_cast<int>(slots.size());
  model.params.k = static_cast<int>(slots.front().size());
  model.conn = ConnectionMap(d, model.params.k, std::move(slots));
  model.v_thr = v_thr;
  return model;
}

}  // namespace

TEST_CASE("branch nonlinearity and slope") {
  NeuronParams p;
  CHECK(branch_nonlinearity(2.0, p) == 4.0);
  CHECK(branch_nonlinearity(20.0, p) == 100.0);
  CHECK(branch_nonlinearity(0.0, p) == 0.0);
  CHECK(branch_nonlinearity_slope(3.0, p) == 6.0);
  CHECK(branch_nonlinearity_slope(20.0, p) == 0.0);
  p.x_thr = 2.0;
  CHECK(branch_nonlinearity(2.0, p) == 2.0);
  CHECK(branch_nonlinearity_slope(2.0, p) == 2.0);
}

TEST_CASE("random wiring fills every slot") {
  NeuronParams p;
  const auto conn = init_connections(500, p, 3);
  CHECK(conn.branch_count() == 100);
  CHECK(conn.slot_count() == 500);
  for (int j = 0; j < 100; ++j) {
    REQUIRE(conn.branch(j).size() == 5);
    for (int a : conn.branch(j)) {
      CHECK(a >= 0);
      CHECK(a < 500);
    }
  }
  CHECK(init_connections(500, p, 3) == conn);
  CHECK_FALSE(init_connections(500, p, 4) == conn);
  const auto single = init_connections(1, p, 9);
  for (const auto& branch : single.slots()) {
    for (int a : branch) CHECK(a == 0);
  }
  CHECK_THROWS_AS(conn.branch(100), IndexError);
  CHECK_THROWS_AS(conn.branch(-1), IndexError);
}

TEST_CASE("connection map bookkeeping") {
  ConnectionMap conn(4, 3, {{0, 0, 2}, {1, 3, 3}});
  CHECK(conn.multiplicity(0, 0) == 2);
  CHECK(conn.multiplicity(3, 1) == 2);
  CHECK(conn.multiplicity(2, 1) == 0);
  CHECK(conn.replace(0, 1, 1) == 0);
  CHECK(conn.multiplicity(0, 0) == 1);
  CHECK(conn.branch(0).size() == 3);
  CHECK_THROWS(ConnectionMap(4, 3, {{0, 0}}));
  CHECK_THROWS(ConnectionMap(4, 2, {{0, 4}}));
}

TEST_CASE("branch drive counts each slot") {
  const auto table = default_table(KernelParams::with_default_ratio(15.0));
  const oracle::Kernel K(15.0, 3.75);
  const auto empty = pattern_of({{}, {}});
  const auto one = pattern_of({{100.0}, {}});
  const ConnectionMap single(2, 1, {{0}});
  const ConnectionMap twice(2, 2, {{0, 0}});
  for (double t = 0.0; t <= 250.0; t += 1.0) {
    CHECK(branch_drive(empty, 0, t, twice, table) == 0.0);
    const double expected = t - 100.0 > table.horizon() ? 0.0 : K(t - 100.0);
    CHECK(std::abs(branch_drive(one, 0, t, single, table) - expected) < 1e-9);
    CHECK(branch_drive(one, 0, t, twice, table) == 2.0 * branch_drive(one, 0, t, single, table));
  }
  CHECK_THROWS_AS(branch_drive(one, 1, 0.0, single, table), IndexError);
}

TEST_CASE("empty pattern never fires") {
  const auto table = default_table(KernelParams::with_default_ratio(15.0));
  const auto model = model_of(3, {{0, 1}, {2, 2}}, 0.5);
  const auto grid = TimeGrid::covering(400.0, table);
  const auto r = eval_pattern(pattern_of({{}, {}, {}}), model, table, grid);
  CHECK(r.v_max == 0.0);
  CHECK(r.predicted == Label::kNegative);
  CHECK(r.t_index == 0);
}

TEST_CASE("single spike peaks at one after the kernel lag") {
  const auto kernel = KernelParams::with_default_ratio(15.0);
  const auto model = model_of(1, {{0}});
  const auto fine = default_table(kernel, 0.01);
  const auto r = eval_pattern(pattern_of({{100.0}}), model, fine, TimeGrid::covering(400.0, fine));
  CHECK(std::abs(r.v_max - 1.0) < 1e-6);
  CHECK(std::abs(r.t_max - (100.0 + kernel.peak_lag())) <= 0.01);
  const auto coarse = default_table(kernel, 1.0);
  const auto rc =
      eval_pattern(pattern_of({{100.0}}), model, coarse, TimeGrid::covering(400.0, coarse));
  CHECK(rc.t_max == 107.0);
  CHECK(rc.v_max > 0.999);
  CHECK(rc.v_max <= 1.0);
  // The 1 ms grid misses the exact peak, so a unit threshold is not reached.
  CHECK(rc.predicted == Label::kNegative);
}

TEST_CASE("identical branches double the voltage") {
  const auto table = default_table(KernelParams::with_default_ratio(15.0));
  const auto pattern = pattern_of({{10.0, 30.0}, {12.5}, {}});
  const auto one = model_of(3, {{0, 1}});
  const auto two = model_of(3, {{0, 1}, {0, 1}});
  for (double t = 0.0; t < 120.0; t += 1.0) {
    CHECK(membrane_voltage(pattern, two, table, t) ==
          doctest::Approx(2.0 * membrane_voltage(pattern, one, table, t)).epsilon(1e-12));
  }
}

TEST_CASE("symmetries, saturation and monotone multiplicity") {
  const auto table = default_table(KernelParams::with_default_ratio(15.0));
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 6;
    SpikePattern p;
    p.afferents.resize(d);
    for (auto& a : p.afferents) {
      const int n = rng.index(4);
      for (int f = 0; f < n; ++f) a.push_back(rng.uniform(0.0, 60.0));
      std::sort(a.begin(), a.end());
    }
    std::vector<std::vector<int>> slots(4, std::vector<int>(3));
    for (auto& b : slots) {
      for (auto& s : b) s = rng.index(d);
    }
    const auto model = model_of(d, slots);
    auto permuted_branches = slots;
    std::reverse(permuted_branches.begin(), permuted_branches.end());
    auto permuted_slots = slots;
    for (auto& b : permuted_slots) std::rotate(b.begin(), b.begin() + 1, b.end());
    const auto mb = model_of(d, permuted_branches);
    const auto ms = model_of(d, permuted_slots);
    NnldModel saturating = model;
    saturating.params.x_sat = 0.5;
    // One more slot per branch; branch 0 gets a random afferent.
    auto more = slots;
    for (auto& b : more) b.push_back(b.front());
    more[0].back() = rng.index(d);
    const auto bigger = model_of(d, more);
    for (double t = 0.0; t < 150.0; t += 1.0) {
      const double v = membrane_voltage(p, model, table, t);
      CHECK(membrane_voltage(p, mb, table, t) == doctest::Approx(v).epsilon(1e-12));
      CHECK(membrane_voltage(p, ms, table, t) == doctest::Approx(v).epsilon(1e-12));
      CHECK(membrane_voltage(p, saturating, table, t) <= 4 * 0.5 + 1e-12);
      CHECK(branch_drive(p, 0, t, bigger.conn, table) >= branch_drive(p, 0, t, model.conn, table));
    }
  }
}

TEST_CASE("grid evaluation matches a direct evaluation on tiny instances") {
  const auto kernel = KernelParams::with_default_ratio(15.0);
  const oracle::Kernel K(15.0, 3.75);
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + rng.index(5);
    const int m = 1 + rng.index(2);
    const int k = 1 + rng.index(2);
    oracle::Spikes spikes(static_cast<std::size_t>(d));
    const int n_spikes = 1 + rng.index(3);
    for (int f = 0; f < n_spikes; ++f) {
      spikes[static_cast<std::size_t>(rng.index(static_cast<std::size_t>(d)))].push_back(
          rng.uniform(0.0, 40.0));
    }
    for (auto& a : spikes) std::sort(a.begin(), a.end());
    oracle::Slots slots(static_cast<std::size_t>(m), std::vector<int>(static_cast<std::size_t>(k)));
    for (auto& b : slots) {
      for (auto& s : b) s = rng.index(static_cast<std::size_t>(d));
    }
    SpikePattern p;
    p.afferents = spikes;
    auto model = model_of(d, slots);
    model.params.x_sat = 3.0;
    const auto table = default_table(kernel, 1.0);
    const auto grid = TimeGrid::covering(40.0, table);
    const auto r = eval_pattern(p, model, table, grid);
    const auto voltage = [&](double t) { return oracle::nnld_voltage(K, spikes, slots, 1.0, 3.0, t); };
    // Grid values coincide with direct evaluation at the grid times.
    for (std::size_t g = 0; g < grid.steps; ++g) {
      CHECK(std::abs(membrane_voltage(p, model, table, grid.time(g)) - voltage(grid.time(g))) < 1e-9);
    }
    CHECK(std::abs(r.v_max - voltage(r.t_max)) < 1e-9);
    // The coarse peak is close to the peak on a 10x finer grid.
    const auto fine = oracle::scan_max(voltage, 40.0 + 75.0, 0.1);
    CHECK(r.v_max <= fine.v + 1e-9 + 0.02 * std::max(1.0, fine.v));
    CHECK(r.v_max >= fine.v - 0.05 * std::max(1.0, fine.v));
    // And the library on the finer grid agrees with the oracle scan.
    const auto fine_table = default_table(kernel, 0.1);
    const auto rf = eval_pattern(p, model, fine_table, TimeGrid::covering(40.0, fine_table));
    CHECK(std::abs(rf.v_max - fine.v) < 1e-6);
    CHECK(r.predicted == (r.v_max >= model.v_thr ? Label::kPositive : Label::kNegative));
  }
}

TEST_CASE("fixed-point trace matches the floating voltage") {
  const auto table = default_table(KernelParams::with_default_ratio(15.0));
  NeuronParams params;
  const auto conn = init_connections(50, params, 5);
  NnldModel model{params, conn, 10.0};
  const auto ds = gen_latency(3, 50, 400.0, 8);
  const auto grid = TimeGrid::covering(400.0, table);
  const VoltageScale scale(params);
  for (const auto& p : ds.patterns) {
    const CompiledPattern c(p, table);
    const auto trace = membrane_trace(c, model, table, grid, scale);
    for (std::size_t g = 0; g < grid.steps; g += 7) {
      CHECK(std::abs(scale.decode(trace[g]) - membrane_voltage(p, model, table, grid.time(g))) <
            1e-9);
    }
  }
}

TEST_CASE("model snapshots round-trip") {
  NeuronParams params;
  params.m = 7;
  params.k = 3;
  params.x_sat = 42.5;
  NnldModel model{params, init_connections(20, params, 1), 12.345678901234567};
  CHECK(model_from_json(model_to_json(model)) == model);
  const auto path = std::filesystem::temp_directory_path() / "nnld_model_test.json";
  save_model(model, path);
  CHECK(load_model(path) == model);
  CHECK_THROWS(model_from_json("{\"params\": 3}"));
}

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
#include <limits>

#include "doctest.h"
#include "nnld/error.hpp"
#include "nnld/morph_learning.hpp"
#include "nnld/random.hpp"
#include "oracles.hpp"

using namespace nnld;

namespace {

const KernelTable& table1() {
  static const KernelTable table = default_table(KernelParams::with_default_ratio(15.0));
  return table;
}

Dataset random_dataset(int P, int d, double T, int max_spikes, Rng& rng) {
  Dataset ds;
  ds.d = d;
  ds.T = T;
  ds.task = TaskKind::kEncoded;
  for (int p = 0; p < P; ++p) {
    SpikePattern pattern;
    pattern.id = p;
    pattern.label = p % 2 == 0 ? Label::kPositive : Label::kNegative;
    pattern.afferents.resize(static_cast<std::size_t>(d));
    for (auto& a : pattern.afferents) {
      const int n = rng.index(static_cast<std::size_t>(max_spikes + 1));
      for (int f = 0; f < n; ++f) a.push_back(rng.uniform(0.0, T));
      std::sort(a.begin(), a.end());
    }
    ds.patterns.push_back(std::move(pattern));
  }
  return ds;
}

NnldModel random_model(int d, int m, int k, double v_thr, std::uint64_t seed) {
  NnldModel model;
  model.params.m = m;
  model.params.k = k;
  model.conn = init_connections(d, model.params, seed);
  model.v_thr = v_thr;
  return model;
}

// Direct evaluation of one pattern on the integer-ms grid: earliest maximum
// of V and the branch drives there.
struct OracleEval {
  double t_max = 0.0;
  double v_max = 0.0;
  std::vector<double> drives;
};

OracleEval oracle_eval(const oracle::Kernel& K, const SpikePattern& p, const NnldModel& model,
                       double t_end) {
  const auto& slots = model.conn.slots();
  const auto voltage = [&](double t) {
    return oracle::nnld_voltage(K, p.afferents, slots, model.params.x_thr, model.params.x_sat, t);
  };
  const auto peak = oracle::scan_max(voltage, t_end, 1.0);
  OracleEval out{peak.t, peak.v, {}};
  for (const auto& branch : slots) {
    double v = 0.0;
    for (int a : branch) v += oracle::psp(K, p.afferents[static_cast<std::size_t>(a)], peak.t);
    out.drives.push_back(v);
  }
  return out;
}

// Batch-averaged c_ij computed from scratch.
double oracle_cij(const oracle::Kernel& K, const Dataset& ds, const NnldModel& model, int branch,
                  int afferent, double t_end) {
  double total = 0.0;
  int count = 0;
  for (const auto& p : ds.patterns) {
    const auto e = oracle_eval(K, p, model, t_end);
    const Label predicted = e.v_max >= model.v_thr ? Label::kPositive : Label::kNegative;
    if (predicted == p.label) continue;
    ++count;
    const double v = e.drives[static_cast<std::size_t>(branch)];
    const double slope =
        v * v / model.params.x_thr >= model.params.x_sat ? 0.0 : 2.0 * v / model.params.x_thr;
    const double s = p.label == Label::kPositive ? 1.0 : -1.0;
    total += s * slope * oracle::psp(K, p.afferents[static_cast<std::size_t>(afferent)], e.t_max);
  }
  return count == 0 ? 0.0 : total / count;
}

}  // namespace

TEST_CASE("threshold update follows the error balance") {
  MorphConfig cfg;
  cfg.eta = 0.1;
  CHECK(threshold_update(3, 1, cfg) == doctest::Approx(0.2));
  CHECK(threshold_update(4, 4, cfg) == 0.0);
  CHECK(threshold_update(0, 5, cfg) == doctest::Approx(-0.5));
  for (int fp = 0; fp < 6; ++fp) {
    for (int fn = 0; fn < 6; ++fn) {
      const double delta = threshold_update(fp, fn, cfg);
      CHECK((delta > 0) == (fp > fn));
      CHECK((delta < 0) == (fp < fn));
    }
  }
}

TEST_CASE("config validation") {
  MorphConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_target = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = MorphConfig{};
  cfg.eta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  const auto fixed = MorphConfig::with_static_threshold(7.5);
  CHECK(fixed.eta == 0.0);
  CHECK(fixed.v_thr_lo == 7.5);
  CHECK(fixed.v_thr_hi == 7.5);
}

TEST_CASE("correlation of an empty or correct batch is zero") {
  NeuronParams params;
  CHECK(correlation_cij({}, 0, 0, params) == 0.0);
  const auto ds = gen_latency(1, 3, 50.0, 1);
  const CompiledPattern c(ds.patterns[0], table1());
  EvalResult e;
  e.branch_drives_at_tmax = {1.0};
  e.predicted = ds.patterns[0].label;
  const ErrorSample sample{&c, &e, ds.patterns[0].label};
  CHECK(correlation_cij(std::span(&sample, 1), 0, 0, params) == 0.0);
}

TEST_CASE("afferents silent before t_max do not correlate") {
  NeuronParams params;
  SpikePattern p;
  p.afferents = {{10.0}, {200.0}};
  p.label = Label::kPositive;
  const CompiledPattern c(p, table1());
  EvalResult e;
  e.t_index = 20;
  e.t_max = 20.0;
  e.branch_drives_at_tmax = {0.5};
  e.predicted = Label::kNegative;
  const ErrorSample sample{&c, &e, Label::kPositive};
  CHECK(correlation_cij(std::span(&sample, 1), 0, 1, params) == 0.0);
  CHECK(correlation_cij(std::span(&sample, 1), 0, 0, params) > 0.0);
}

TEST_CASE("mirror patterns cancel") {
  NeuronParams params;
  SpikePattern p;
  p.afferents = {{10.0, 14.0}, {3.0}};
  const CompiledPattern c(p, table1());
  EvalResult missed;
  missed.t_index = 17;
  missed.branch_drives_at_tmax = {1.3, 0.2};
  missed.predicted = Label::kNegative;
  EvalResult alarm = missed;
  alarm.predicted = Label::kPositive;
  const std::vector<ErrorSample> batch = {{&c, &missed, Label::kPositive},
                                          {&c, &alarm, Label::kNegative}};
  for (int j = 0; j < 2; ++j) {
    for (int a = 0; a < 2; ++a) CHECK(correlation_cij(batch, j, a, params) == 0.0);
  }
}

TEST_CASE("saturated branches carry no correlation") {
  NeuronParams params;
  SpikePattern p;
  p.afferents = {{10.0}};
  const CompiledPattern c(p, table1());
  EvalResult e;
  e.t_index = 17;
  e.branch_drives_at_tmax = {10.5};
  e.predicted = Label::kNegative;
  const ErrorSample sample{&c, &e, Label::kPositive};
  CHECK(correlation_cij(std::span(&sample, 1), 0, 0, params) == 0.0);
}

TEST_CASE("correlation matches a finite difference of the error at frozen t_max") {
  const oracle::Kernel K(15.0, 3.75);
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = random_dataset(1, 6, 60.0, 2, rng);
    auto model = random_model(6, 3, 2, 1e6, rng.next());
    SpikePattern p = ds.patterns[0];
    p.label = trial % 2 == 0 ? Label::kPositive : Label::kNegative;
    model.v_thr = p.label == Label::kPositive ? 1e6 : 1e-9;  // force a mistake
    const auto grid = TimeGrid::covering(60.0, table1());
    const CompiledPattern c(p, table1());
    auto e = eval_pattern(c, model, table1(), grid);
    const ErrorSample sample{&c, &e, p.label};
    const double s = p.label == Label::kPositive ? 1.0 : -1.0;
    for (int j = 0; j < 3; ++j) {
      for (int a = 0; a < 6; ++a) {
        const double psp = oracle::psp(K, p.afferents[static_cast<std::size_t>(a)], e.t_max);
        // E = s * (v_thr - V(t_max)); perturb the multiplicity of (a, j) by +-1.
        const auto energy = [&](double dw) {
          double v = 0.0;
          for (std::size_t b = 0; b < e.branch_drives_at_tmax.size(); ++b) {
            double drive = e.branch_drives_at_tmax[b];
            if (static_cast<int>(b) == j) drive += dw * psp;
            v += std::min(drive * drive / model.params.x_thr, model.params.x_sat);
          }
          return s * (model.v_thr - v);
        };
        const double fd = -(energy(1.0) - energy(-1.0)) / 2.0;
        const double cij = correlation_cij(std::span(&sample, 1), j, a, model.params);
        const double drive = e.branch_drives_at_tmax[static_cast<std::size_t>(j)];
        if ((drive + psp) * (drive + psp) >= model.params.x_sat) continue;
        if (std::abs(fd) < 1e-12) {
          CHECK(std::abs(cij) < 1e-9);
        } else {
          CHECK(std::abs(cij - fd) / std::abs(fd) < 0.10);
        }
      }
    }
  }
}

TEST_CASE("batch average is the mean of per-sample correlations") {
  Rng rng(8);
  const auto ds = random_dataset(6, 5, 60.0, 2, rng);
  const auto model = random_model(5, 2, 2, 1e6, 3);
  const auto grid = TimeGrid::covering(60.0, table1());
  std::vector<CompiledPattern> compiled;
  std::vector<EvalResult> evals;
  for (const auto& p : ds.patterns) compiled.emplace_back(p, table1());
  for (const auto& c : compiled) evals.push_back(eval_pattern(c, model, table1(), grid));
  std::vector<ErrorSample> batch;
  for (std::size_t p = 0; p < compiled.size(); ++p) {
    evals[p].predicted = other(ds.patterns[p].label);
    batch.push_back({&compiled[p], &evals[p], ds.patterns[p].label});
  }
  for (int a = 0; a < 5; ++a) {
    double sum = 0.0;
    for (const auto& s : batch) sum += correlation_cij(std::span(&s, 1), 1, a, model.params);
    CHECK(correlation_cij(batch, 1, a, model.params) * 6.0 == doctest::Approx(sum));
  }
}

TEST_CASE("swap selection matches exhaustive search") {
  const oracle::Kernel K(15.0, 3.75);
  Rng data_rng(31);
  int swaps_checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto ds = random_dataset(2, 4, 40.0, 2, data_rng);
    const auto model = random_model(4, 1, 2, data_rng.uniform(0.2, 3.0), data_rng.next());
    MorphConfig cfg;
    cfg.n_target = 2;
    cfg.n_replace = 4;
    cfg.eta = 0.0;
    Rng rng(static_cast<std::uint64_t>(trial));
    const auto [after, trace] = train_iteration(model, ds, table1(), cfg, rng);
    const double t_end = TimeGrid::covering(40.0, table1()).time(
        TimeGrid::covering(40.0, table1()).steps - 1);
    if (!trace.swapped) {
      for (const auto& p : ds.patterns) {
        const auto e = oracle_eval(K, p, model, t_end);
        CHECK((e.v_max >= model.v_thr ? Label::kPositive : Label::kNegative) == p.label);
      }
      continue;
    }
    ++swaps_checked;
    std::vector<double> slot_c;
    for (int s = 0; s < 2; ++s) slot_c.push_back(oracle_cij(K, ds, model, 0, model.conn.at(0, s), t_end));
    const double min_c = *std::min_element(slot_c.begin(), slot_c.end());
    CHECK(std::abs(slot_c[static_cast<std::size_t>(trace.swapped->slot)] - min_c) < 1e-9);
    CHECK(trace.swapped->removed == model.conn.at(0, trace.swapped->slot));
    std::vector<double> cand_c;
    for (int a = 0; a < 4; ++a) cand_c.push_back(oracle_cij(K, ds, model, 0, a, t_end));
    const double max_c = *std::max_element(cand_c.begin(), cand_c.end());
    CHECK(std::abs(cand_c[static_cast<std::size_t>(trace.swapped->added)] - max_c) < 1e-9);
    CHECK(after.conn.at(0, trace.swapped->slot) == trace.swapped->added);
  }
  CHECK(swaps_checked > 10);
}

TEST_CASE("sampled target set is respected") {
  const oracle::Kernel K(15.0, 3.75);
  Rng data_rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = random_dataset(4, 6, 40.0, 2, data_rng);
    const auto model = random_model(6, 3, 2, data_rng.uniform(0.2, 3.0), data_rng.next());
    MorphConfig cfg;
    cfg.n_target = 1;
    cfg.n_replace = 6;
    Rng rng(static_cast<std::uint64_t>(100 + trial));
    Rng replay = rng;
    const auto targets = replay.sample(model.conn.slot_count(), 1);
    const auto [after, trace] = train_iteration(model, ds, table1(), cfg, rng);
    if (!trace.swapped) continue;
    CHECK(trace.swapped->branch * 2 + trace.swapped->slot == targets[0]);
  }
}

TEST_CASE("candidate scoring leaves every evaluation untouched") {
  Rng rng(12);
  const auto ds = gen_latency(40, 60, 200.0, 3);
  NeuronParams params;
  params.m = 10;
  params.k = 4;
  NnldModel model{params, init_connections(60, params, 4), 8.0};
  MorphConfig cfg;
  MorphTrainer trainer(ds, model, table1(), cfg);
  for (int iter = 0; iter < 30; ++iter) {
    // Snapshot, score all afferents as silent synapses, compare bit for bit.
    std::vector<ErrorSample> batch;
    const auto evals = trainer.evaluations();
    std::vector<CompiledPattern> compiled;
    compiled.reserve(ds.patterns.size());
    for (const auto& p : ds.patterns) compiled.emplace_back(p, table1());
    std::vector<EvalResult> before(evals.begin(), evals.end());
    for (std::size_t p = 0; p < before.size(); ++p) {
      if (before[p].predicted != ds.patterns[p].label) {
        batch.push_back({&compiled[p], &evals[p], ds.patterns[p].label});
      }
    }
    for (int j = 0; j < params.m; ++j) {
      for (int a = 0; a < 60; ++a) (void)correlation_cij(batch, j, a, params);
    }
    for (std::size_t p = 0; p < before.size(); ++p) {
      CHECK(evals[p].v_max == before[p].v_max);
      CHECK(evals[p].t_index == before[p].t_index);
      CHECK(evals[p].predicted == before[p].predicted);
    }
    trainer.step(rng);
    // Incremental state equals a fresh evaluation of the updated model.
    for (std::size_t p = 0; p < ds.patterns.size(); ++p) {
      const auto fresh = eval_pattern(compiled[p], trainer.model(), table1(), trainer.grid());
      CHECK(trainer.evaluations()[p].v_max == fresh.v_max);
      CHECK(trainer.evaluations()[p].t_index == fresh.t_index);
      CHECK(trainer.evaluations()[p].branch_drives_at_tmax == fresh.branch_drives_at_tmax);
    }
    for (const auto& branch : trainer.model().conn.slots()) CHECK(branch.size() == 4);
  }
}

TEST_CASE("a fully correct dataset is left alone") {
  Dataset ds;
  ds.d = 2;
  ds.T = 50.0;
  ds.task = TaskKind::kEncoded;
  SpikePattern quiet;
  quiet.afferents = {{}, {}};
  quiet.label = Label::kNegative;
  ds.patterns = {quiet};
  NnldModel model = random_model(2, 2, 2, 1.0, 1);
  Rng rng(1);
  const auto [after, trace] = train_iteration(model, ds, table1(), MorphConfig{}, rng);
  CHECK_FALSE(trace.swapped.has_value());
  CHECK(trace.v_thr == model.v_thr);
  CHECK(after == model);
  CHECK(trace.fp + trace.fn == 0);
}

TEST_CASE("n_target beyond the slot count is clamped and flagged") {
  const auto ds = gen_latency(6, 4, 50.0, 2);
  const auto model = random_model(4, 1, 2, 1e6, 1);
  MorphConfig cfg;
  cfg.n_target = 50;
  Rng rng(2);
  const auto [after, trace] = train_iteration(model, ds, table1(), cfg, rng);
  CHECK(trace.target_clamped);
  CHECK(after.conn.branch(0).size() == 2);
}

TEST_CASE("trace rows satisfy their invariants and k is preserved") {
  const auto ds = gen_latency(60, 100, 400.0, 21);
  NeuronParams params;
  params.m = 20;
  MorphConfig cfg;
  cfg.max_iters = 200;
  cfg.seed = 4;
  const auto result = train(ds, params, cfg);
  for (const auto& row : result.trace) {
    CHECK(row.train_accuracy == doctest::Approx(1.0 - (row.fp + row.fn) / 60.0));
  }
  for (const auto& branch : result.model.conn.slots()) CHECK(branch.size() == 5);
  CHECK(result.best_accuracy >= result.trace.front().train_accuracy);
  CHECK(accuracy(ds, result.model, table1()) == doctest::Approx(result.best_accuracy));
}

TEST_CASE("two trivially separable patterns are learnt quickly") {
  Dataset ds;
  ds.d = 10;
  ds.T = 100.0;
  ds.task = TaskKind::kEncoded;
  SpikePattern empty;
  empty.afferents.resize(10);
  empty.label = Label::kNegative;
  SpikePattern dense;
  dense.afferents.assign(10, {50.0});
  dense.label = Label::kPositive;
  dense.id = 1;
  ds.patterns = {empty, dense};
  NeuronParams params;
  params.m = 4;
  params.k = 2;
  MorphConfig cfg;
  cfg.eta = 1.0;
  cfg.max_iters = 100;
  const auto result = train(ds, params, cfg);
  CHECK(result.best_accuracy == 1.0);
  CHECK(result.trace.size() < 60);
}

TEST_CASE("latency task with 100 patterns is learnt completely") {
  const auto ds = gen_latency(100, 500, 400.0, 1001);
  NeuronParams params;
  MorphConfig cfg;
  cfg.seed = 78;
  const auto result = train(ds, params, cfg);
  CHECK(result.best_accuracy == 1.0);
}

TEST_CASE("training is deterministic") {
  const auto ds = gen_latency(50, 200, 400.0, 5);
  NeuronParams params;
  params.m = 30;
  MorphConfig cfg;
  cfg.max_iters = 100;
  const auto a = train(ds, params, cfg);
  const auto b = train(ds, params, cfg);
  CHECK(a.trace == b.trace);
  CHECK(a.model == b.model);
}

TEST_CASE("chosen swaps reduce the error at least as often as random ones") {
  Rng rng(2718);
  int chosen_better = 0;
  int random_better = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto ds = random_dataset(8, 8, 60.0, 2, rng);
    const auto model = random_model(8, 3, 2, rng.uniform(0.5, 4.0), rng.next());
    const auto grid = TimeGrid::covering(60.0, table1());
    const auto error = [&](const NnldModel& m) {
      double e = 0.0;
      for (const auto& p : ds.patterns) {
        const double v = eval_pattern(p, m, table1(), grid).v_max;
        e += p.label == Label::kPositive ? std::max(0.0, m.v_thr - v) : std::max(0.0, v - m.v_thr);
      }
      return e;
    };
    MorphConfig cfg;
    cfg.eta = 0.0;
    cfg.n_target = 6;
    cfg.n_replace = 8;
    Rng step_rng(rng.next());
    const auto [after, trace] = train_iteration(model, ds, table1(), cfg, step_rng);
    if (!trace.swapped) continue;
    const double base = error(model);
    if (error(after) < base) ++chosen_better;
    NnldModel random = model;
    random.conn.replace(rng.index(3), rng.index(2), rng.index(8));
    if (error(random) < base) ++random_better;
  }
  CHECK(chosen_better >= random_better);
}

TEST_CASE("histogram mode") {
  CHECK_THROWS_AS(histogram_mode({}), ParameterError);
  const std::vector<double> same(20, 3.25);
  CHECK(histogram_mode(same) == 3.25);
  Rng rng(3);
  std::vector<double> samples;
  for (int i = 0; i < 20000; ++i) samples.push_back(10.0 + 2.0 * rng.normal());
  CHECK(std::abs(histogram_mode(samples) - 10.0) < 1.0);
}

TEST_CASE("static threshold estimates") {
  NeuronParams one;
  one.m = 1;
  one.k = 1;
  const double fixed = static_threshold(one, 1, 1.0, 25, 3);
  const auto table = default_table(one.kernel);
  SpikePattern p;
  p.afferents = {{1.0}};
  NnldModel m{one, ConnectionMap(1, 1, {{0}}), 1.0};
  CHECK(fixed == eval_pattern(p, m, table, TimeGrid::covering(1.0, table)).v_max);

  NeuronParams params;
  const double a = static_threshold(params, 500, 400.0, 400, 9);
  const double b = static_threshold(params, 500, 400.0, 800, 9);
  CHECK(std::isfinite(a));
  CHECK(a > 0.0);
  CHECK(a < params.m * params.x_sat);
  CHECK(std::abs(a - b) / a < 0.15);
}

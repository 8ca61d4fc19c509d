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

#include "nnld/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "nnld/error.hpp"
#include "nnld/random.hpp"

namespace nnld {

void AnalogRecording::validate() const {
  if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
    throw ParameterError("sample period must be positive");
  }
  for (const auto& channel : channels) {
    if (channel.size() != samples()) throw ParameterError("channels differ in length");
  }
}

void LifParams::validate() const {
  if (!(leak > 0.0)) throw ParameterError("LIF leak time constant must be positive");
  if (!(gain > 0.0)) throw ParameterError("LIF gain must be positive");
  if (!(threshold > 0.0)) throw ParameterError("LIF threshold must be positive");
  if (!(reset >= 0.0) || !(reset < threshold)) {
    throw ParameterError("LIF reset must satisfy 0 <= reset < threshold");
  }
}

DigitalRecording binarize(const AnalogRecording& recording, double threshold) {
  recording.validate();
  DigitalRecording out;
  out.sample_period = recording.sample_period;
  out.channels.reserve(recording.channels.size());
  for (const auto& channel : recording.channels) {
    std::vector<std::uint8_t> bits(channel.size());
    std::transform(channel.begin(), channel.end(), bits.begin(),
                   [&](double x) { return static_cast<std::uint8_t>(x >= threshold ? 1 : 0); });
    out.channels.push_back(std::move(bits));
  }
  return out;
}

DigitalRecording invert(const DigitalRecording& digital) {
  DigitalRecording out = digital;
  for (auto& channel : out.channels) {
    for (auto& bit : channel) bit = static_cast<std::uint8_t>(bit ? 0 : 1);
  }
  return out;
}

std::vector<double> lif_encode(std::span<const std::uint8_t> bits, double sample_period,
                               const LifParams& lif) {
  lif.validate();
  if (!(sample_period > 0.0)) throw ParameterError("sample period must be positive");
  const double decay = std::exp(-sample_period / lif.leak);
  std::vector<double> spikes;
  double state = 0.0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    state = state * decay + (bits[i] ? lif.gain : 0.0);
    if (state >= lif.threshold) {
      spikes.push_back(static_cast<double>(i) * sample_period);
      state = lif.reset;
    }
  }
  return spikes;
}

SpikePattern encode_recording(const AnalogRecording& recording, const LifParams& lif,
                              double threshold) {
  const auto digital = binarize(recording, threshold);
  const auto inverted = invert(digital);
  SpikePattern pattern;
  pattern.afferents.reserve(2 * digital.channels.size());
  for (const auto& channel : digital.channels) {
    pattern.afferents.push_back(lif_encode(channel, recording.sample_period, lif));
  }
  for (const auto& channel : inverted.channels) {
    pattern.afferents.push_back(lif_encode(channel, recording.sample_period, lif));
  }
  return pattern;
}

AnalogRecording synth_tactile(IndenterKind kind, std::uint64_t seed,
                              const TactileSynthConfig& cfg) {
  if (cfg.rows < 1 || cfg.cols < 1) throw ParameterError("taxel grid must be non-empty");
  if (!(cfg.duration > 0.0) || !(cfg.sample_period > 0.0)) {
    throw ParameterError("duration and sample period must be positive");
  }
  Rng rng(seed);
  const auto samples = static_cast<std::size_t>(std::floor(cfg.duration / cfg.sample_period));
  const double radius = kind == IndenterKind::kSmall ? cfg.small_radius : cfg.large_radius;
  const double center_row =
      (cfg.rows - 1) / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter);
  const double center_col =
      (cfg.cols - 1) / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter);
  const double onset = rng.uniform(0.075, 0.2) * cfg.duration;
  const double release = rng.uniform(0.75, 0.9) * cfg.duration;

  AnalogRecording recording;
  recording.sample_period = cfg.sample_period;
  recording.channels.resize(static_cast<std::size_t>(cfg.channels()));
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const double dist = std::hypot(r - center_row, c - center_col);
      const bool pressed = dist <= radius;
      const double level = pressed ? 0.65 + 0.3 * (1.0 - dist / radius) : 0.15;
      auto& channel = recording.channels[static_cast<std::size_t>(r * cfg.cols + c)];
      channel.resize(samples);
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) * cfg.sample_period;
        double x = (t >= onset && t < release) ? level : 0.15;
        if (cfg.noise > 0.0) x += cfg.noise * rng.normal();
        channel[i] = std::clamp(x, 0.0, 1.0);
      }
    }
  }
  return recording;
}

Dataset gen_encoded(int per_class, std::uint64_t seed, const LifParams& lif,
                    const TactileSynthConfig& cfg, double threshold) {
  if (per_class < 1) throw ParameterError("per_class must be >= 1");
  lif.validate();
  Rng rng(seed);
  Dataset dataset;
  dataset.d = 2 * cfg.channels();
  dataset.T = cfg.duration;
  dataset.task = TaskKind::kEncoded;
  for (int i = 0; i < per_class; ++i) {
    for (auto kind : {IndenterKind::kSmall, IndenterKind::kLarge}) {
      auto pattern = encode_recording(synth_tactile(kind, rng.next(), cfg), lif, threshold);
      pattern.label = kind == IndenterKind::kLarge ? Label::kPositive : Label::kNegative;
      pattern.id = static_cast<std::int64_t>(dataset.patterns.size());
      dataset.patterns.push_back(std::move(pattern));
    }
  }
  return dataset;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ParameterError("train fraction must lie in [0, 1]");
  }
  Rng rng(seed);
  std::vector<char> in_train(dataset.patterns.size(), 0);
  for (auto label : {Label::kPositive, Label::kNegative}) {
    std::vector<int> members;
    for (std::size_t p = 0; p < dataset.patterns.size(); ++p) {
      if (dataset.patterns[p].label == label) members.push_back(static_cast<int>(p));
    }
    rng.shuffle(std::span<int>(members));
    const auto take = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < take; ++i) in_train[static_cast<std::size_t>(members[i])] = 1;
  }
  Dataset train = dataset;
  Dataset test = dataset;
  train.patterns.clear();
  test.patterns.clear();
  for (std::size_t p = 0; p < dataset.patterns.size(); ++p) {
    (in_train[p] ? train : test).patterns.push_back(dataset.patterns[p]);
  }
  return {std::move(train), std::move(test)};
}

void save_recording_csv(const AnalogRecording& recording, const std::filesystem::path& path) {
  recording.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17) << "sample_period," << recording.sample_period << '\n';
  for (std::size_t i = 0; i < recording.samples(); ++i) {
    for (std::size_t c = 0; c < recording.channels.size(); ++c) {
      if (c > 0) out << ',';
      out << recording.channels[c][i];
    }
    out << '\n';
  }
}

AnalogRecording load_recording_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  AnalogRecording recording;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw FormatError("line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) throw FormatError("line 1: missing sample_period header");
  ++line_no;
  {
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != "sample_period") {
      fail("expected header 'sample_period,<ms>'");
    }
    try {
      recording.sample_period = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail("sample_period is not a number");
    }
    if (!(recording.sample_period > 0.0)) fail("sample_period must be positive");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail("cell '" + cell + "' is not a number");
      }
    }
    if (recording.channels.empty()) recording.channels.resize(row.size());
    if (row.size() != recording.channels.size()) {
      fail("row has " + std::to_string(row.size()) + " columns, expected " +
           std::to_string(recording.channels.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) recording.channels[c].push_back(row[c]);
  }
  return recording;
}

}  // namespace nnld

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
#include <vector>

#include "nnld/spike_data.hpp"

namespace nnld {

struct AnalogRecording {
  std::vector<std::vector<double>> channels;  // samples in [0, 1]
  double sample_period = 1.0;                 // ms

  std::size_t samples() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const { return static_cast<double>(samples()) * sample_period; }
  void validate() const;
  bool operator==(const AnalogRecording&) const = default;
};

struct DigitalRecording {
  std::vector<std::vector<std::uint8_t>> channels;
  double sample_period = 1.0;
  bool operator==(const DigitalRecording&) const = default;
};

// Discrete-time leaky integrate-and-fire converter:
//   state <- state * exp(-sample_period / leak) + gain * bit,
// spike and reset when state >= threshold.
struct LifParams {
  double leak = 20.0;  // ms
  double gain = 0.065;
  double threshold = 1.0;
  double reset = 0.0;

  void validate() const;
};

// sample >= threshold -> 1.
DigitalRecording binarize(const AnalogRecording& recording, double threshold = 0.5);
DigitalRecording invert(const DigitalRecording& digital);

// Spike times (ms) at sample instants i * sample_period, strictly increasing.
std::vector<double> lif_encode(std::span<const std::uint8_t> bits, double sample_period,
                               const LifParams& lif);

// Afferents 0..c-1 encode the binarized channels, c..2c-1 their inversions.
SpikePattern encode_recording(const AnalogRecording& recording, const LifParams& lif,
                              double threshold = 0.5);

enum class IndenterKind { kSmall, kLarge };

// Stand-in for tactile sensor data: a taxel array pressed by a round
// indenter. Pressed taxels step up and hold; the two kinds differ in contact
// radius and hence in how many channels go high.
struct TactileSynthConfig {
  int rows = 5;
  int cols = 13;
  double duration = 400.0;  // ms
  double sample_period = 1.0;
  double small_radius = 1.6;  // taxels
  double large_radius = 2.6;
  double center_jitter = 0.6;
  double noise = 0.05;  // Gaussian sd; 0 gives piecewise-constant traces

  int channels() const { return rows * cols; }
};

AnalogRecording synth_tactile(IndenterKind kind, std::uint64_t seed,
                              const TactileSynthConfig& cfg = {});

// per_class recordings of each kind, encoded. Large indenter -> positive.
Dataset gen_encoded(int per_class, std::uint64_t seed, const LifParams& lif = {},
                    const TactileSynthConfig& cfg = {}, double threshold = 0.5);

// Random per-class split: round(train_fraction * n_class) of each class train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          std::uint64_t seed);

// CSV: first row "sample_period,<ms>", then one row per sample, one column per channel.
void save_recording_csv(const AnalogRecording& recording, const std::filesystem::path& path);
AnalogRecording load_recording_csv(const std::filesystem::path& path);

}  // namespace nnld

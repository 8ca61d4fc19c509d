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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nnld {

enum class Label : std::uint8_t { kNegative = 0, kPositive = 1 };

inline Label other(Label label) {
  return label == Label::kPositive ? Label::kNegative : Label::kPositive;
}

enum class TaskKind { kLatency, kSynchrony, kEncoded };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct SpikePattern {
  // One ascending list of spike times (ms) per afferent.
  std::vector<std::vector<double>> afferents;
  Label label = Label::kNegative;
  std::int64_t id = 0;

  std::size_t spike_count() const;
  bool operator==(const SpikePattern&) const = default;
};

// Perfect matching of afferents, each pair stored as (low, high), sorted.
using Pairing = std::vector<std::pair<int, int>>;

struct ClassPairings {
  Pairing positive;
  Pairing negative;

  const Pairing& for_label(Label label) const {
    return label == Label::kPositive ? positive : negative;
  }
  bool operator==(const ClassPairings&) const = default;
};

struct Dataset {
  std::vector<SpikePattern> patterns;
  int d = 0;
  double T = 0.0;
  TaskKind task = TaskKind::kLatency;
  std::optional<ClassPairings> class_pairings;

  // Throws ParameterError on a broken invariant.
  void validate() const;
  std::size_t count(Label label) const;
  bool operator==(const Dataset&) const = default;
};

enum class LabelMode {
  kCoinFlip,    // independent fair coin per pattern
  kExactSplit,  // floor(P/2) positives, shuffled
};

Dataset gen_latency(int P, int d, double T, std::uint64_t seed,
                    LabelMode labels = LabelMode::kCoinFlip);
Dataset gen_synchrony(int P, int d, double T, std::uint64_t seed,
                      LabelMode labels = LabelMode::kCoinFlip);

// JSON-lines: a header object, then one object per pattern.
void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);
std::string to_jsonl(const Dataset& dataset);
Dataset from_jsonl(std::string_view text);

}  // namespace nnld

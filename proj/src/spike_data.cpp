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

#include "nnld/spike_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "nnld/error.hpp"
#include "nnld/random.hpp"

namespace nnld {

using nlohmann::json;

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kLatency:
      return "latency";
    case TaskKind::kSynchrony:
      return "synchrony";
    case TaskKind::kEncoded:
      return "encoded";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "latency") return TaskKind::kLatency;
  if (name == "synchrony") return TaskKind::kSynchrony;
  if (name == "encoded") return TaskKind::kEncoded;
  throw ParameterError("unknown task kind '" + std::string(name) + "'");
}

std::size_t SpikePattern::spike_count() const {
  std::size_t total = 0;
  for (const auto& train : afferents) total += train.size();
  return total;
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      patterns.begin(), patterns.end(), [&](const SpikePattern& p) { return p.label == label; }));
}

namespace {

void check_pairing(const Pairing& pairing, int d, const char* which) {
  std::vector<int> seen(static_cast<std::size_t>(d), 0);
  for (const auto& [a, b] : pairing) {
    if (a < 0 || b < 0 || a >= d || b >= d || a == b) {
      throw ParameterError(std::string(which) + " pairing has an invalid pair");
    }
    ++seen[static_cast<std::size_t>(a)];
    ++seen[static_cast<std::size_t>(b)];
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw ParameterError(std::string(which) + " pairing is not a perfect matching");
  }
}

}  // namespace

void Dataset::validate() const {
  if (d < 1) throw ParameterError("dataset afferent count must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("dataset duration must be positive");
  for (const auto& pattern : patterns) {
    if (pattern.afferents.size() != static_cast<std::size_t>(d)) {
      throw ParameterError("pattern " + std::to_string(pattern.id) + " has " +
                           std::to_string(pattern.afferents.size()) + " afferents, expected " +
                           std::to_string(d));
    }
    for (const auto& train : pattern.afferents) {
      for (std::size_t i = 0; i < train.size(); ++i) {
        if (!std::isfinite(train[i]) || train[i] < 0.0) {
          throw ParameterError("pattern " + std::to_string(pattern.id) +
                               " has a negative or non-finite spike time");
        }
        if (i > 0 && train[i] < train[i - 1]) {
          throw ParameterError("pattern " + std::to_string(pattern.id) +
                               " has unsorted spike times");
        }
      }
      if (task == TaskKind::kLatency && train.size() != 1) {
        throw ParameterError("latency pattern " + std::to_string(pattern.id) +
                             " must have exactly one spike per afferent");
      }
    }
  }
  if (class_pairings) {
    check_pairing(class_pairings->positive, d, "positive");
    check_pairing(class_pairings->negative, d, "negative");
  }
  if (task == TaskKind::kSynchrony && !class_pairings) {
    throw ParameterError("synchrony dataset is missing its class pairings");
  }
}

namespace {

void check_generator_args(int P, int d, double T) {
  if (P < 1) throw ParameterError("pattern count P must be >= 1");
  if (d < 1) throw ParameterError("afferent count d must be >= 1");
  if (!(T >= 1.0) || !std::isfinite(T)) {
    throw ParameterError("pattern duration T must be >= 1 ms (spike times are drawn from [1, T])");
  }
}

std::vector<Label> draw_labels(int P, LabelMode mode, Rng& rng) {
  std::vector<Label> labels(static_cast<std::size_t>(P));
  if (mode == LabelMode::kCoinFlip) {
    for (auto& label : labels) label = rng.coin() ? Label::kPositive : Label::kNegative;
  } else {
    for (int i = 0; i < P; ++i) {
      labels[static_cast<std::size_t>(i)] = i < P / 2 ? Label::kPositive : Label::kNegative;
    }
    rng.shuffle(std::span<Label>(labels));
  }
  return labels;
}

double draw_time(double T, Rng& rng) { return T == 1.0 ? 1.0 : rng.uniform(1.0, T); }

Pairing random_matching(int d, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<int>(order));
  Pairing pairing;
  pairing.reserve(order.size() / 2);
  for (std::size_t i = 0; i + 1 < order.size(); i += 2) {
    pairing.emplace_back(std::min(order[i], order[i + 1]), std::max(order[i], order[i + 1]));
  }
  std::sort(pairing.begin(), pairing.end());
  return pairing;
}

}  // namespace

Dataset gen_latency(int P, int d, double T, std::uint64_t seed, LabelMode labels) {
  check_generator_args(P, d, T);
  Rng rng(seed);
  Dataset dataset;
  dataset.d = d;
  dataset.T = T;
  dataset.task = TaskKind::kLatency;
  const auto drawn = draw_labels(P, labels, rng);
  dataset.patterns.reserve(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) {
    SpikePattern pattern;
    pattern.id = p;
    pattern.label = drawn[static_cast<std::size_t>(p)];
    pattern.afferents.resize(static_cast<std::size_t>(d));
    for (auto& train : pattern.afferents) train.push_back(draw_time(T, rng));
    dataset.patterns.push_back(std::move(pattern));
  }
  return dataset;
}

Dataset gen_synchrony(int P, int d, double T, std::uint64_t seed, LabelMode labels) {
  check_generator_args(P, d, T);
  if (d % 2 != 0) throw ParameterError("synchrony task needs an even afferent count");
  Rng rng(seed);
  Dataset dataset;
  dataset.d = d;
  dataset.T = T;
  dataset.task = TaskKind::kSynchrony;
  ClassPairings pairings;
  pairings.positive = random_matching(d, rng);
  // A single pair has only one matching; otherwise the classes must differ.
  do {
    pairings.negative = random_matching(d, rng);
  } while (d > 2 && pairings.negative == pairings.positive);
  const auto drawn = draw_labels(P, labels, rng);
  dataset.patterns.reserve(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) {
    SpikePattern pattern;
    pattern.id = p;
    pattern.label = drawn[static_cast<std::size_t>(p)];
    pattern.afferents.resize(static_cast<std::size_t>(d));
    for (const auto& [a, b] : pairings.for_label(pattern.label)) {
      const double t = draw_time(T, rng);
      pattern.afferents[static_cast<std::size_t>(a)].push_back(t);
      pattern.afferents[static_cast<std::size_t>(b)].push_back(t);
    }
    dataset.patterns.push_back(std::move(pattern));
  }
  dataset.class_pairings = std::move(pairings);
  return dataset;
}

namespace {

json pairing_to_json(const Pairing& pairing) {
  json out = json::array();
  for (const auto& [a, b] : pairing) out.push_back({a, b});
  return out;
}

[[noreturn]] void format_error(std::size_t line, const std::string& what) {
  throw FormatError("line " + std::to_string(line) + ": " + what);
}

Pairing pairing_from_json(const json& value, std::size_t line, const char* field) {
  if (!value.is_array()) format_error(line, std::string("pairings.") + field + " must be an array");
  Pairing pairing;
  for (const auto& pair : value) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer()) {
      format_error(line, std::string("pairings.") + field + " entries must be [int, int]");
    }
    pairing.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  return pairing;
}

}  // namespace

std::string to_jsonl(const Dataset& dataset) {
  std::ostringstream out;
  json header;
  header["d"] = dataset.d;
  header["T"] = dataset.T;
  header["task"] = std::string(to_string(dataset.task));
  header["count"] = dataset.patterns.size();
  if (dataset.class_pairings) {
    header["pairings"] = {{"+", pairing_to_json(dataset.class_pairings->positive)},
                          {"-", pairing_to_json(dataset.class_pairings->negative)}};
  } else {
    header["pairings"] = nullptr;
  }
  out << header.dump() << '\n';
  for (const auto& pattern : dataset.patterns) {
    json line;
    line["id"] = pattern.id;
    line["label"] = pattern.label == Label::kPositive ? "+" : "-";
    line["spikes"] = pattern.afferents;
    out << line.dump() << '\n';
  }
  return out.str();
}

Dataset from_jsonl(std::string_view text) {
  Dataset dataset;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared_count;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error& e) {
      format_error(line_no, std::string("invalid JSON (") + e.what() + ")");
    }
    if (!value.is_object()) format_error(line_no, "expected a JSON object");
    if (!have_header) {
      have_header = true;
      if (!value.contains("d") || !value["d"].is_number_integer()) {
        format_error(line_no, "header field 'd' missing or not an integer");
      }
      if (!value.contains("T") || !value["T"].is_number()) {
        format_error(line_no, "header field 'T' missing or not a number");
      }
      if (!value.contains("task") || !value["task"].is_string()) {
        format_error(line_no, "header field 'task' missing or not a string");
      }
      dataset.d = value["d"].get<int>();
      dataset.T = value["T"].get<double>();
      try {
        dataset.task = parse_task_kind(value["task"].get<std::string>());
      } catch (const ParameterError& e) {
        format_error(line_no, std::string("header field 'task': ") + e.what());
      }
      if (value.contains("count")) {
        if (!value["count"].is_number_unsigned()) {
          format_error(line_no, "header field 'count' must be a non-negative integer");
        }
        declared_count = value["count"].get<std::size_t>();
      }
      if (value.contains("pairings") && !value["pairings"].is_null()) {
        const auto& p = value["pairings"];
        if (!p.is_object() || !p.contains("+") || !p.contains("-")) {
          format_error(line_no, "header field 'pairings' must hold '+' and '-' matchings");
        }
        dataset.class_pairings =
            ClassPairings{pairing_from_json(p["+"], line_no, "+"),
                          pairing_from_json(p["-"], line_no, "-")};
      }
      continue;
    }
    SpikePattern pattern;
    if (!value.contains("id") || !value["id"].is_number_integer()) {
      format_error(line_no, "field 'id' missing or not an integer");
    }
    pattern.id = value["id"].get<std::int64_t>();
    if (!value.contains("label") || !value["label"].is_string()) {
      format_error(line_no, "field 'label' missing or not a string");
    }
    const auto label = value["label"].get<std::string>();
    if (label == "+") {
      pattern.label = Label::kPositive;
    } else if (label == "-") {
      pattern.label = Label::kNegative;
    } else {
      format_error(line_no, "field 'label' must be \"+\" or \"-\"");
    }
    if (!value.contains("spikes") || !value["spikes"].is_array()) {
      format_error(line_no, "field 'spikes' missing or not an array");
    }
    const auto& spikes = value["spikes"];
    if (spikes.size() != static_cast<std::size_t>(dataset.d)) {
      format_error(line_no, "field 'spikes' has " + std::to_string(spikes.size()) +
                                " afferents but header declares d=" + std::to_string(dataset.d));
    }
    pattern.afferents.reserve(spikes.size());
    for (std::size_t i = 0; i < spikes.size(); ++i) {
      if (!spikes[i].is_array()) {
        format_error(line_no, "field 'spikes[" + std::to_string(i) + "]' is not an array");
      }
      std::vector<double> train;
      train.reserve(spikes[i].size());
      for (const auto& t : spikes[i]) {
        if (!t.is_number()) {
          format_error(line_no, "field 'spikes[" + std::to_string(i) + "]' holds a non-number");
        }
        train.push_back(t.get<double>());
      }
      pattern.afferents.push_back(std::move(train));
    }
    dataset.patterns.push_back(std::move(pattern));
  }
  if (!have_header) throw FormatError("line 1: missing header");
  if (declared_count && *declared_count != dataset.patterns.size()) {
    format_error(line_no, "header declares " + std::to_string(*declared_count) +
                              " patterns but file holds " +
                              std::to_string(dataset.patterns.size()));
  }
  try {
    dataset.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid dataset: ") + e.what());
  }
  return dataset;
}

void save(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << to_jsonl(dataset);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_jsonl(buffer.str());
}

}  // namespace nnld

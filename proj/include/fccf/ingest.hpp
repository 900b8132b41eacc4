// Copyright 2026 The fccf Authors
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

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fccf/csv.hpp"
#include "fccf/error.hpp"

namespace fccf {

// A position sample that may be missing (tracking dropout).
using MaybeReal = std::optional<double>;

/// One recording: paired dopamine and position signals plus group labels.
struct Session {
  std::string id;
  double sample_rate_hz = 0.0;
  std::vector<double> dopamine;
  std::vector<MaybeReal> position;
  std::map<std::string, std::string> labels;

  std::size_t length() const { return dopamine.size(); }

  void validate() const {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
      throw validation_error("session " + id +
                             ": sample rate must be positive");
    }
    if (dopamine.size() != position.size()) {
      throw validation_error("session " + id +
                             ": dopamine and position lengths differ");
    }
    if (dopamine.size() < 2) {
      throw validation_error("session " + id + ": too short");
    }
    if (labels.empty()) {
      throw validation_error("session " + id + ": no labels");
    }
  }
};

/// Fills interior gaps by linear interpolation between the nearest present
/// neighbours. Present values are returned unchanged.
inline std::vector<double> interpolate_position(
    std::span<const MaybeReal> position) {
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < position.size(); ++i) {
    if (position[i].has_value()) present.push_back(i);
  }
  if (present.empty()) throw validation_error("empty signal");
  if (present.front() != 0 || present.back() != position.size() - 1) {
    throw validation_error("unbounded gap");
  }
  std::vector<double> out(position.size());
  for (std::size_t k = 0; k < present.size(); ++k) {
    const std::size_t i = present[k];
    out[i] = *position[i];
    if (k + 1 == present.size()) break;
    const std::size_t j = present[k + 1];
    const double lo = *position[i];
    const double hi = *position[j];
    const double span_len = static_cast<double>(j - i);
    for (std::size_t m = i + 1; m < j; ++m) {
      const double frac = static_cast<double>(m - i) / span_len;
      out[m] = lo + (hi - lo) * frac;
    }
  }
  return out;
}

inline std::vector<double> interpolate_position(
    const std::vector<MaybeReal>& position) {
  return interpolate_position(std::span<const MaybeReal>(position));
}

/// v(t) = (pos(t+1) - pos(t)) * rate, in position units per second.
inline std::vector<double> derive_velocity(std::span<const double> position,
                                           double sample_rate_hz) {
  if (position.size() < 2) throw validation_error("too short");
  std::vector<double> v(position.size() - 1);
  for (std::size_t t = 0; t + 1 < position.size(); ++t) {
    v[t] = (position[t + 1] - position[t]) * sample_rate_hz;
  }
  return v;
}

struct Acceleration {
  std::vector<double> signed_values;
  std::vector<double> absolute;
};

inline Acceleration derive_acceleration(std::span<const double> velocity,
                                        double sample_rate_hz) {
  if (velocity.size() < 2) throw validation_error("too short");
  Acceleration acc;
  acc.signed_values.resize(velocity.size() - 1);
  acc.absolute.resize(velocity.size() - 1);
  for (std::size_t t = 0; t + 1 < velocity.size(); ++t) {
    const double a = (velocity[t + 1] - velocity[t]) * sample_rate_hz;
    acc.signed_values[t] = a;
    acc.absolute[t] = std::abs(a);
  }
  return acc;
}

struct DerivedSignals {
  std::vector<double> velocity;      // length T-1
  std::vector<double> accel_signed;  // length T-2
  std::vector<double> accel_abs;     // length T-2
};

inline DerivedSignals derive_signals(std::span<const double> position,
                                     double sample_rate_hz) {
  if (position.size() < 3) throw validation_error("too short");
  DerivedSignals d;
  d.velocity = derive_velocity(position, sample_rate_hz);
  auto acc = derive_acceleration(d.velocity, sample_rate_hz);
  d.accel_signed = std::move(acc.signed_values);
  d.accel_abs = std::move(acc.absolute);
  return d;
}

// ---------------------------------------------------------------------------
// Measures

enum class Measure {
  kDopamine,
  kPosition,
  kVelocity,
  kAccelSigned,
  kAccelAbs,
};

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::kDopamine: return "dopamine";
    case Measure::kPosition: return "position";
    case Measure::kVelocity: return "velocity";
    case Measure::kAccelSigned: return "accel_signed";
    case Measure::kAccelAbs: return "accel_abs";
  }
  return "unknown";
}

inline std::optional<Measure> parse_measure(std::string_view name) {
  for (Measure m : {Measure::kDopamine, Measure::kPosition,
                    Measure::kVelocity, Measure::kAccelSigned,
                    Measure::kAccelAbs}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

/// All session signals on a common time base of length T-2. Every series is
/// truncated from its tail to the shortest derived length, so index t pairs
/// dopamine(t) with velocity(t) = pos(t+1) - pos(t) and so on.
struct AlignedSignals {
  std::vector<double> dopamine;
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> accel_signed;
  std::vector<double> accel_abs;

  const std::vector<double>& get(Measure m) const {
    switch (m) {
      case Measure::kDopamine: return dopamine;
      case Measure::kPosition: return position;
      case Measure::kVelocity: return velocity;
      case Measure::kAccelSigned: return accel_signed;
      case Measure::kAccelAbs: return accel_abs;
    }
    return dopamine;
  }
};

inline AlignedSignals align_session(const Session& s) {
  s.validate();
  if (s.length() < 3) {
    throw validation_error("session " + s.id + ": too short");
  }
  AlignedSignals out;
  out.position = interpolate_position(s.position);
  auto derived = derive_signals(out.position, s.sample_rate_hz);
  const std::size_t len = derived.accel_signed.size();
  out.dopamine.assign(s.dopamine.begin(), s.dopamine.begin() + len);
  out.position.resize(len);
  derived.velocity.resize(len);
  out.velocity = std::move(derived.velocity);
  out.accel_signed = std::move(derived.accel_signed);
  out.accel_abs = std::move(derived.accel_abs);
  return out;
}

// ---------------------------------------------------------------------------
// Trimming

/// Time window applied to the `t` column before derivation. Bounds are in
/// the file's time units (seconds). `last_seconds` keeps the final span of
/// the recording and is applied after start/end.
struct TrimWindow {
  std::optional<double> start;
  std::optional<double> end;
  std::optional<double> last_seconds;

  bool empty() const { return !start && !end && !last_seconds; }
};

// ---------------------------------------------------------------------------
// Files

/// Raw session: header `t,dopamine,position`; an empty position cell is a
/// gap. Any other malformed cell fails the whole session.
inline Session parse_session_csv(std::istream& in, const std::string& source,
                                 std::string id, double sample_rate_hz,
                                 std::map<std::string, std::string> labels,
                                 const TrimWindow& window = {}) {
  const auto table = csv::read_table(in, source);
  if (table.header != std::vector<std::string>{"t", "dopamine", "position"}) {
    throw validation_error(source +
                           ": expected header t,dopamine,position");
  }
  std::vector<double> times;
  Session s;
  s.id = std::move(id);
  s.sample_rate_hz = sample_rate_hz;
  s.labels = std::move(labels);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = source + ":" + std::to_string(table.line_numbers[r]);
    const auto t = csv::parse_double(row[0]);
    const auto dop = csv::parse_double(row[1]);
    if (!t || !std::isfinite(*t)) {
      throw validation_error(where + ": unparseable t");
    }
    if (!dop || !std::isfinite(*dop)) {
      throw validation_error(where + ": unparseable dopamine");
    }
    MaybeReal pos;
    if (!csv::trim(row[2]).empty()) {
      pos = csv::parse_double(row[2]);
      if (!pos || !std::isfinite(*pos)) {
        throw validation_error(where + ": unparseable position");
      }
    }
    times.push_back(*t);
    s.dopamine.push_back(*dop);
    s.position.push_back(pos);
  }
  if (!window.empty()) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (window.start && times[i] < *window.start) continue;
      if (window.end && times[i] >= *window.end) continue;
      keep.push_back(i);
    }
    if (window.last_seconds && !keep.empty()) {
      const double cutoff = times[keep.back()] - *window.last_seconds;
      std::erase_if(keep, [&](std::size_t i) { return times[i] < cutoff; });
    }
    std::vector<double> dop;
    std::vector<MaybeReal> pos;
    for (std::size_t i : keep) {
      dop.push_back(s.dopamine[i]);
      pos.push_back(s.position[i]);
    }
    s.dopamine = std::move(dop);
    s.position = std::move(pos);
  }
  s.validate();
  return s;
}

inline Session read_session_csv(const std::filesystem::path& path,
                                std::string id, double sample_rate_hz,
                                std::map<std::string, std::string> labels,
                                const TrimWindow& window = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  return parse_session_csv(in, path.string(), std::move(id), sample_rate_hz,
                           std::move(labels), window);
}

inline std::string write_session_csv(const Session& s) {
  std::string out = "t,dopamine,position\n";
  for (std::size_t i = 0; i < s.length(); ++i) {
    out += csv::format_double(static_cast<double>(i) / s.sample_rate_hz);
    out += ',';
    out += csv::format_double(s.dopamine[i]);
    out += ',';
    if (s.position[i]) out += csv::format_double(*s.position[i]);
    out += '\n';
  }
  return out;
}

/// One manifest row. Columns after `sample_rate_hz` are factor labels.
struct ManifestEntry {
  std::string session_id;
  std::filesystem::path file;  // resolved against the manifest directory
  double sample_rate_hz = 0.0;
  std::map<std::string, std::string> labels;
};

inline const std::vector<std::string>& manifest_columns() {
  static const std::vector<std::string> cols = {
      "session_id", "file", "sample_rate_hz", "region", "sex", "condition"};
  return cols;
}

inline std::vector<ManifestEntry> read_manifest(
    const std::filesystem::path& path) {
  const auto table = csv::read_table(path);
  const auto& required = manifest_columns();
  if (table.header.size() < 3 || table.header[0] != required[0] ||
      table.header[1] != required[1] || table.header[2] != required[2]) {
    throw validation_error(path.string() +
                           ": header must start with "
                           "session_id,file,sample_rate_hz");
  }
  if (table.header.size() < 4) {
    throw validation_error(path.string() + ": no label columns");
  }
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  std::vector<ManifestEntry> entries;
  std::map<std::string, bool> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where =
        path.string() + ":" + std::to_string(table.line_numbers[r]);
    ManifestEntry e;
    e.session_id = row[0];
    if (e.session_id.empty()) throw validation_error(where + ": empty id");
    if (seen[e.session_id]) {
      throw validation_error(where + ": duplicate session " + e.session_id);
    }
    seen[e.session_id] = true;
    e.file = std::filesystem::path(row[1]);
    if (e.file.is_relative()) e.file = base / e.file;
    const auto rate = csv::parse_double(row[2]);
    if (!rate || !(*rate > 0.0) || !std::isfinite(*rate)) {
      throw validation_error(where + ": sample_rate_hz must be positive");
    }
    e.sample_rate_hz = *rate;
    for (std::size_t c = 3; c < table.header.size(); ++c) {
      e.labels[table.header[c]] = row[c];
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::string write_manifest(const std::vector<ManifestEntry>& entries,
                                  const std::vector<std::string>& factors) {
  std::string out = "session_id,file,sample_rate_hz";
  for (const auto& f : factors) out += "," + f;
  out += '\n';
  for (const auto& e : entries) {
    out += e.session_id + "," + e.file.generic_string() + "," +
           csv::format_double(e.sample_rate_hz);
    for (const auto& f : factors) {
      const auto it = e.labels.find(f);
      out += "," + (it == e.labels.end() ? std::string() : it->second);
    }
    out += '\n';
  }
  return out;
}

}  // namespace fccf

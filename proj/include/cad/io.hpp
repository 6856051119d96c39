// Copyright 2026 The CAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string_view>

#include "cad/transform.hpp"

namespace cad {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SignalFormat { kAuto, kPgm, kPpm, kRawF64 };

SignalFormat parse_signal_format(std::string_view name);

/// Samples are stored channel-planar: channel c occupies
/// [c * pixels, (c + 1) * pixels).
struct LoadedSignal {
  Signal signal;
  std::size_t channels = 1;
  Index width = 0;   // 0 for raw inputs
  Index height = 0;

  Index pixels() const { return signal.size() / static_cast<Index>(channels); }
  Signal channel(std::size_t c) const;
};

/// Reads a binary PGM (P5), binary PPM (P6), or raw little-endian float64
/// array with a `<path>.json` sidecar {"n": ..., "channels": ...}.
/// Integer images are scaled by 1/maxval. Raw samples must already lie in
/// [0, 1]. Throws IoError; nothing is returned on failure.
LoadedSignal load_signal(const std::filesystem::path& path, SignalFormat format = SignalFormat::kAuto);

/// 8-bit P5 export; samples are clamped to [0, 1] first.
void write_pgm(const std::filesystem::path& path, const Signal& s, Index width, Index height);

/// Raw float64 dump plus the JSON sidecar read by load_signal.
void write_raw_f64(const std::filesystem::path& path, const Signal& s, std::size_t channels = 1);

/// Concatenates per-channel signals into the planar layout.
Signal join_channels(const std::vector<Signal>& channels);

}  // namespace cad

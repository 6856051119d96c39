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

#include "cad/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cad {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "raw IO assumes a little-endian host");

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Cursor over a netpbm header: whitespace and '#' comments between tokens.
class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) {
      fail("truncated header");
    }
    return out;
  }

  long number() {
    const std::string t = token();
    long value = 0;
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch)) || value > 1'000'000'000L) {
        fail("bad header field '" + t + "'");
      }
      value = value * 10 + (ch - '0');
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail("missing raster separator");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw IoError(path_.string() + ": " + why);
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

LoadedSignal load_netpbm(const fs::path& path, std::size_t channels) {
  const auto bytes = read_bytes(path);
  HeaderReader header(bytes, path);
  const std::string magic = header.token();
  const std::string want = channels == 1 ? "P5" : "P6";
  if (magic != want) {
    header.fail("expected magic " + want + ", found '" + magic + "'");
  }
  const long width = header.number();
  const long height = header.number();
  const long maxval = header.number();
  if (width <= 0 || height <= 0) {
    header.fail("non-positive image size");
  }
  if (maxval <= 0 || maxval > 65535) {
    header.fail("maxval out of range");
  }
  const std::size_t start = header.raster_start();
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  const auto pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t need = pixels * channels * sample_bytes;
  if (bytes.size() - start < need) {
    header.fail("raster truncated");
  }

  LoadedSignal out;
  out.channels = channels;
  out.width = width;
  out.height = height;
  out.signal = Signal::zeros(static_cast<Index>(pixels * channels));
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = start + (p * channels + c) * sample_bytes;
      long value = bytes[at];
      if (sample_bytes == 2) {
        value = (value << 8) | bytes[at + 1];
      }
      if (value > maxval) {
        header.fail("sample exceeds maxval");
      }
      out.signal.values[static_cast<Index>(c * pixels + p)] = static_cast<double>(value) * scale;
    }
  }
  return out;
}

fs::path sidecar_path(const fs::path& path) {
  return fs::path(path.string() + ".json");
}

LoadedSignal load_raw(const fs::path& path) {
  nlohmann::json meta;
  {
    std::ifstream in(sidecar_path(path));
    if (!in) {
      throw IoError("missing sidecar " + sidecar_path(path).string());
    }
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(sidecar_path(path).string() + ": " + e.what());
    }
  }
  std::size_t n = 0;
  std::size_t channels = 1;
  try {
    n = meta.at("n").get<std::size_t>();
    channels = meta.value("channels", std::size_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(sidecar_path(path).string() + ": " + e.what());
  }
  if (n == 0 || channels == 0) {
    throw IoError(sidecar_path(path).string() + ": empty signal");
  }
  const auto bytes = read_bytes(path);
  const std::size_t count = n * channels;
  if (bytes.size() != count * sizeof(double)) {
    throw IoError(path.string() + ": expected " + std::to_string(count * sizeof(double)) +
                  " bytes, found " + std::to_string(bytes.size()));
  }
  LoadedSignal out;
  out.channels = channels;
  out.signal = Signal::zeros(static_cast<Index>(count));
  std::memcpy(out.signal.values.data(), bytes.data(), bytes.size());
  for (Index i = 0; i < out.signal.size(); ++i) {
    const double v = out.signal.values[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw IoError(path.string() + ": sample " + std::to_string(i) + " outside [0, 1]");
    }
  }
  return out;
}

}  // namespace

SignalFormat parse_signal_format(std::string_view name) {
  if (name == "auto") return SignalFormat::kAuto;
  if (name == "pgm") return SignalFormat::kPgm;
  if (name == "ppm") return SignalFormat::kPpm;
  if (name == "raw" || name == "f64") return SignalFormat::kRawF64;
  throw std::invalid_argument("unknown signal format: " + std::string(name));
}

Signal LoadedSignal::channel(std::size_t c) const {
  if (c >= channels) {
    throw std::out_of_range("channel index out of range");
  }
  const Index p = pixels();
  return Signal(signal.values.segment(static_cast<Index>(c) * p, p));
}

LoadedSignal load_signal(const fs::path& path, SignalFormat format) {
  if (format == SignalFormat::kAuto) {
    const auto ext = path.extension().string();
    if (ext == ".pgm") {
      format = SignalFormat::kPgm;
    } else if (ext == ".ppm") {
      format = SignalFormat::kPpm;
    } else {
      format = SignalFormat::kRawF64;
    }
  }
  switch (format) {
    case SignalFormat::kPgm: return load_netpbm(path, 1);
    case SignalFormat::kPpm: return load_netpbm(path, 3);
    default: return load_raw(path);
  }
}

void write_pgm(const fs::path& path, const Signal& s, Index width, Index height) {
  if (width * height != s.size()) {
    throw DimensionError("PGM size does not match signal length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (Index i = 0; i < s.size(); ++i) {
    const double v = std::clamp(s[i], 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

void write_raw_f64(const fs::path& path, const Signal& s, std::size_t channels) {
  if (channels == 0 || s.size() % static_cast<Index>(channels) != 0) {
    throw DimensionError("signal length is not a multiple of the channel count");
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(s.values.data()),
              static_cast<std::streamsize>(s.size() * sizeof(double)));
    if (!out) {
      throw IoError("write failed: " + path.string());
    }
  }
  std::ofstream meta(sidecar_path(path));
  meta << nlohmann::json{{"n", s.size() / static_cast<Index>(channels)}, {"channels", channels}}.dump()
       << '\n';
  if (!meta) {
    throw IoError("write failed: " + sidecar_path(path).string());
  }
}

Signal join_channels(const std::vector<Signal>& channels) {
  Index total = 0;
  for (const auto& c : channels) total += c.size();
  Signal out = Signal::zeros(total);
  Index at = 0;
  for (const auto& c : channels) {
    out.values.segment(at, c.size()) = c.values;
    at += c.size();
  }
  return out;
}

}  // namespace cad

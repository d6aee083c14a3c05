// seqdiar/wav.hpp
//
// 16-bit PCM mono WAV reading and writing.  Samples are held as doubles in
// [-1, 1).

// Copyright 2026  Seqdiar Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "seqdiar/common.hpp"

namespace seqdiar {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

namespace wav_detail {

inline uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}
inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

}  // namespace wav_detail

inline Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("read_wav: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("read_wav: not a RIFF/WAVE file: " + path);

  using wav_detail::read_u16;
  using wav_detail::read_u32;
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  bool got_fmt = false;
  Waveform w;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t sz = read_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + sz > bytes.size()) throw FormatError("read_wav: truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw FormatError("read_wav: short fmt chunk");
      const uint16_t audio_format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      bits = read_u16(bytes.data() + body + 14);
      if (audio_format != 1) throw FormatError("read_wav: only PCM supported");
      got_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!got_fmt) throw FormatError("read_wav: data before fmt");
      if (bits != 16) throw FormatError("read_wav: only 16-bit PCM supported");
      if (channels != 1) throw FormatError("read_wav: only mono supported");
      const size_t n = sz / 2;
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(read_u16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(s) / 32768.0;
      }
      w.sample_rate = sample_rate;
      return w;
    }
    pos = body + sz + (sz & 1);  // chunks are word-aligned
  }
  throw FormatError("read_wav: no data chunk in " + path);
}

inline void write_wav(const std::string& path, const Waveform& w) {
  using wav_detail::put_u16;
  using wav_detail::put_u32;
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  std::vector<uint8_t> b;
  b.reserve(44 + data_bytes);
  const char* riff = "RIFF";
  b.insert(b.end(), riff, riff + 4);
  put_u32(b, 36 + data_bytes);
  const char* wavefmt = "WAVEfmt ";
  b.insert(b.end(), wavefmt, wavefmt + 8);
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, static_cast<uint32_t>(w.sample_rate));
  put_u32(b, static_cast<uint32_t>(w.sample_rate * 2));
  put_u16(b, 2);
  put_u16(b, 16);
  const char* data = "data";
  b.insert(b.end(), data, data + 4);
  put_u32(b, data_bytes);
  for (double v : w.samples) {
    const double c = std::clamp(v, -1.0, 32767.0 / 32768.0);
    const int16_t s = static_cast<int16_t>(std::lrint(c * 32768.0));
    put_u16(b, static_cast<uint16_t>(s));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("write_wav: cannot open " + path);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw FormatError("write_wav: write failed for " + path);
}

}  // namespace seqdiar

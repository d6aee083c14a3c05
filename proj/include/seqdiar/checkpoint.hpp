// seqdiar/checkpoint.hpp
//
// Binary checkpoint container: string metadata plus named float64 tensors.
// Doubles are stored as raw IEEE bit patterns, so a save/load round-trip is
// bit-exact.

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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqdiar/layers.hpp"
#include "seqdiar/tensor.hpp"

namespace seqdiar {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

class Checkpoint {
 public:
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, TensorPtr>> tensors;

  void put(const std::string& name, const TensorPtr& t) { tensors.emplace_back(name, t); }

  TensorPtr get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    return nullptr;
  }

  void put_params(const ParamMap& pm, const std::string& /*unused*/ = "") {
    for (const auto& [n, t] : pm.items) put(n, t);
  }

  // Copies stored values into the registered parameters.  Every parameter
  // must be present with a matching shape; extra stored tensors are allowed.
  void load_params(ParamMap& pm) const {
    for (auto& [n, t] : pm.items) {
      const TensorPtr src = get(n);
      if (!src) throw FormatError("checkpoint: missing tensor " + n);
      if (src->shape != t->shape)
        throw FormatError("checkpoint: shape mismatch for " + n + ": stored " + src->shape_str() +
                          " vs model " + t->shape_str());
      t->data = src->data;
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("checkpoint: cannot open " + path + " for writing");
    write_bytes(out, "SDCK", 4);
    write_u32(out, 1);  // version
    write_u32(out, static_cast<uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
      write_str(out, k);
      write_str(out, v);
    }
    write_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      write_str(out, name);
      write_u32(out, static_cast<uint32_t>(t->shape.size()));
      for (int64_t d : t->shape) write_i64(out, d);
      out.write(reinterpret_cast<const char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    if (!out) throw FormatError("checkpoint: write failed for " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SDCK", 4) != 0)
      throw FormatError("checkpoint: bad magic in " + path);
    if (read_u32(in) != 1) throw FormatError("checkpoint: unsupported version in " + path);
    Checkpoint ck;
    const uint32_t meta_n = read_u32(in);
    for (uint32_t i = 0; i < meta_n; ++i) {
      const std::string k = read_str(in);
      const std::string v = read_str(in);
      ck.meta[k] = v;
    }
    const uint32_t tensor_n = read_u32(in);
    for (uint32_t i = 0; i < tensor_n; ++i) {
      const std::string name = read_str(in);
      const uint32_t ndim = read_u32(in);
      if (ndim > 8) throw FormatError("checkpoint: implausible rank");
      std::vector<int64_t> shape(ndim);
      for (uint32_t d = 0; d < ndim; ++d) shape[d] = read_i64(in);
      auto t = Tensor::create(shape);
      in.read(reinterpret_cast<char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(double)));
      if (!in) throw FormatError("checkpoint: truncated tensor data in " + path);
      ck.tensors.emplace_back(name, t);
    }
    return ck;
  }

 private:
  static void write_bytes(std::ofstream& out, const char* p, size_t n) { out.write(p, static_cast<std::streamsize>(n)); }
  static void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
  static void write_i64(std::ofstream& out, int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
  static void write_str(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw FormatError("checkpoint: truncated file");
    return v;
  }
  static int64_t read_i64(std::ifstream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw FormatError("checkpoint: truncated file");
    return v;
  }
  static std::string read_str(std::ifstream& in) {
    const uint32_t n = read_u32(in);
    if (n > (1u << 20)) throw FormatError("checkpoint: implausible string length");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw FormatError("checkpoint: truncated string");
    return s;
  }
};

}  // namespace seqdiar

// Copyright 2026 The cmplan Authors.
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

#ifndef CMPLAN_BINARY_IO_H_
#define CMPLAN_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "cmplan/error.h"

namespace cmplan {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

// Little-endian primitive writer over an ostream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void Bytes(std::string_view bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  void U8(std::uint8_t v) { Put(v); }
  void U16(std::uint16_t v) { Put(v); }
  void U32(std::uint32_t v) { Put(v); }
  void U64(std::uint64_t v) { Put(v); }
  void F64(double v) { Put(std::bit_cast<std::uint64_t>(v)); }
  void F64s(std::span<const double> values) {
    for (double v : values) F64(v);
  }
  bool ok() const { return static_cast<bool>(out_); }

 private:
  template <typename T>
  void Put(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    out_.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }

  std::ostream& out_;
};

// Little-endian primitive reader; throws IoError on truncated input.
class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  std::string Bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    Check();
    return s;
  }
  std::uint8_t U8() { return Get<std::uint8_t>(); }
  std::uint16_t U16() { return Get<std::uint16_t>(); }
  std::uint32_t U32() { return Get<std::uint32_t>(); }
  std::uint64_t U64() { return Get<std::uint64_t>(); }
  double F64() { return std::bit_cast<double>(Get<std::uint64_t>()); }
  void F64s(std::span<double> out) {
    for (double& v : out) v = F64();
  }
  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  template <typename T>
  T Get() {
    unsigned char buf[sizeof(T)];
    in_.read(reinterpret_cast<char*>(buf), sizeof(T));
    Check();
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    }
    return v;
  }
  void Check() {
    if (!in_) throw IoError("truncated file: " + source_);
  }

  std::istream& in_;
  std::string source_;
};

}  // namespace cmplan

#endif  // CMPLAN_BINARY_IO_H_

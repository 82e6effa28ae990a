// zrtopic/binary_io.h

// Copyright 2026  The zrtopic Authors

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

#ifndef ZRTOPIC_BINARY_IO_H_
#define ZRTOPIC_BINARY_IO_H_

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "zrtopic/common.h"

// Little-endian primitives shared by the binary file formats.
namespace zrtopic::binio {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 4);
}

inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline bool read_u64(std::istream& is, std::uint64_t& v) {
  std::array<unsigned char, 8> b;
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

inline bool read_u32(std::istream& is, std::uint32_t& v) {
  std::array<unsigned char, 4> b;
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

inline bool read_f64(std::istream& is, double& v) {
  std::uint64_t bits = 0;
  if (!read_u64(is, bits)) return false;
  v = std::bit_cast<double>(bits);
  return true;
}

inline void expect_magic(std::istream& is, const char* magic) {
  std::array<char, 4> m{};
  if (!is.read(m.data(), 4) || std::string(m.data(), 4) != std::string(magic, 4))
    throw Error(std::string("malformed header: expected magic ") + magic);
}

inline std::uint32_t need_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!read_u32(is, v)) throw Error("truncated binary file");
  return v;
}

inline std::uint64_t need_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!read_u64(is, v)) throw Error("truncated binary file");
  return v;
}

inline double need_f64(std::istream& is) {
  double v = 0;
  if (!read_f64(is, v)) throw Error("truncated binary file");
  return v;
}

template <class Derived>
void write_block(std::ostream& os, const Eigen::DenseBase<Derived>& m) {
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
}

inline Matrix read_block(std::istream& is) {
  const std::uint32_t rows = need_u32(is), cols = need_u32(is);
  Matrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = need_f64(is);
  return m;
}

}  // namespace zrtopic::binio

#endif  // ZRTOPIC_BINARY_IO_H_

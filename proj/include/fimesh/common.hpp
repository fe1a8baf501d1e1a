// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fimesh {

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2,
// MissingInputError / DataError -> 3, NumericError -> 4.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input exists but its contents are unusable (truncated file, bad magic,
// undecodable image).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingInput = 3;
inline constexpr int kExitNumeric = 4;

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// All on-disk formats are little-endian; this code assumes a little-endian
// host and copies POD values byte for byte.
static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os_) throw DataError("write failed");
  }

  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    bytes(&v, sizeof(T));
  }

  // Magic strings are exactly 8 bytes, no terminator.
  void magic(const char (&m)[9]) { bytes(m, 8); }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  void bytes(void* data, std::size_t n) {
    is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw DataError("unexpected end of file");
  }

  template <typename T>
  T pod() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    bytes(&v, sizeof(T));
    return v;
  }

  void expect_magic(const char (&m)[9]) {
    char got[8];
    bytes(got, 8);
    if (std::memcmp(got, m, 8) != 0)
      throw DataError(std::string("bad magic, expected ") + m);
  }

  // True if at least one more byte is available.
  bool more() {
    return is_.peek() != std::char_traits<char>::eof();
  }

 private:
  std::istream& is_;
};

}  // namespace fimesh

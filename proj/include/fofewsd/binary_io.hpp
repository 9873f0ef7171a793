#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "fofewsd/error.hpp"

namespace fofewsd::binary {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

// Appends little-endian scalars to a byte buffer. finish() adds the trailing
// checksum: the sum of every preceding byte, mod 2^64, as a u64.
class Writer {
 public:
  explicit Writer(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  void put_u32(std::uint64_t value) {
    if (value > UINT32_MAX) throw InvalidArgument("value does not fit in u32: " + std::to_string(value));
    put(static_cast<std::uint32_t>(value));
  }

  void put_string(std::string_view s) {
    put_u32(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  // Count-prefixed f32 array.
  template <typename Range>
  void put_f32_array(const Range& values) {
    put_u32(std::size(values));
    for (double v : values) put(static_cast<float>(v));
  }

  std::vector<char> finish() && {
    put(checksum(bytes_));
    return std::move(bytes_);
  }

  static std::uint64_t checksum(const std::vector<char>& bytes, std::size_t n) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<unsigned char>(bytes[i]);
    return sum;
  }
  static std::uint64_t checksum(const std::vector<char>& bytes) { return checksum(bytes, bytes.size()); }

 private:
  std::vector<char> bytes_;
};

// Bounds-checked reader over a complete container. The constructor validates
// magic and checksum; every read past the payload raises DataError.
class Reader {
 public:
  Reader(std::vector<char> bytes, std::string_view magic, std::string_view what)
      : bytes_(std::move(bytes)), what_(what) {
    if (bytes_.size() < magic.size() || std::string_view(bytes_.data(), magic.size()) != magic)
      throw DataError("incompatible " + what_ + ": bad magic");
    if (bytes_.size() < magic.size() + sizeof(std::uint64_t))
      throw DataError("truncated " + what_);
    end_ = bytes_.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, bytes_.data() + end_, sizeof stored);
    if (stored != Writer::checksum(bytes_, end_))
      throw DataError("truncated or corrupt " + what_ + ": checksum mismatch");
    pos_ = magic.size();
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::uint32_t get_u32() { return get<std::uint32_t>(); }

  std::string get_string() {
    const std::size_t n = get_u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  // Reads a count-prefixed f32 array, widening to double.
  std::vector<double> get_f32_array() {
    const std::size_t n = get_u32();
    need(n * sizeof(float));
    std::vector<double> out(n);
    for (auto& v : out) v = get<float>();
    return out;
  }

  bool at_end() const { return pos_ == end_; }

  void expect_end() const {
    if (!at_end()) throw DataError("trailing bytes in " + what_);
  }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw DataError("truncated " + what_);
  }

  std::vector<char> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

// Rounds to the nearest f32 value. Parameters stored through a container are
// narrowed first so that a save/load cycle reproduces them bit for bit.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace fofewsd::binary

#pragma once

// Little-endian encode/decode helpers shared by the dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "aemu/error.hpp"

namespace aemu::detail {

template <typename T>
T to_little(T v) {
  static_assert(std::is_integral_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    T out{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out = static_cast<T>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  } else {
    return v;
  }
}

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    if constexpr (std::is_floating_point_v<T>) {
      using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
      put(std::bit_cast<U>(v));
    } else {
      const T le = to_little(v);
      char raw[sizeof(T)];
      std::memcpy(raw, &le, sizeof(T));
      buf_.append(raw, sizeof(T));
    }
  }
  void put_bytes(std::string_view bytes) { buf_.append(bytes); }

  std::string& buffer() { return buf_; }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, ErrorCode truncated_code) : data_(data), code_(truncated_code) {}

  template <typename T>
  T get() {
    if constexpr (std::is_floating_point_v<T>) {
      using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
      return std::bit_cast<T>(get<U>());
    } else {
      need(sizeof(T));
      T v;
      std::memcpy(&v, data_.data() + pos_, sizeof(T));
      pos_ += sizeof(T);
      return to_little(v);
    }
  }

  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw Error(code_, "unexpected end of data at byte " + std::to_string(pos_));
    }
  }

  std::string_view data_;
  ErrorCode code_;
  std::size_t pos_ = 0;
};

}  // namespace aemu::detail

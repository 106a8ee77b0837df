#pragma once

// Normalized compression distance over raw-deflate at level 9:
//   NCD(x, y) = (C(xy) - min(C(x), C(y))) / max(C(x), C(y))
// The concatenation puts the lexicographically smaller string first so the
// measure is exactly symmetric.

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "botwatch/model.hpp"

namespace botwatch {

class Compressor {
 public:
  Compressor() {
    if (deflateInit2(&stream_, Z_BEST_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 9,
                     Z_DEFAULT_STRATEGY) != Z_OK) {
      throw std::runtime_error("deflateInit2 failed");
    }
  }
  ~Compressor() { deflateEnd(&stream_); }
  Compressor(const Compressor&) = delete;
  Compressor& operator=(const Compressor&) = delete;

  // Compressed size of the concatenation a·b.
  std::size_t compressed_size(std::span<const std::uint8_t> a,
                              std::span<const std::uint8_t> b = {}) {
    deflateReset(&stream_);
    std::size_t total = 0;
    feed(a, Z_NO_FLUSH, total);
    feed(b, Z_FINISH, total);
    return total;
  }

 private:
  void feed(std::span<const std::uint8_t> in, int flush, std::size_t& total) {
    stream_.next_in = const_cast<Bytef*>(in.data());
    stream_.avail_in = static_cast<uInt>(in.size());
    int rc;
    do {
      stream_.next_out = scratch_.data();
      stream_.avail_out = static_cast<uInt>(scratch_.size());
      rc = deflate(&stream_, flush);
      total += scratch_.size() - stream_.avail_out;
    } while (stream_.avail_out == 0 || (flush == Z_FINISH && rc != Z_STREAM_END));
  }

  z_stream stream_{};
  std::vector<Bytef> scratch_ = std::vector<Bytef>(16384);
};

inline Compressor& thread_compressor() {
  thread_local Compressor c;
  return c;
}

inline std::size_t compressed_size(std::span<const std::uint8_t> x) {
  return thread_compressor().compressed_size(x);
}

// NCD with the single-string sizes supplied by the caller (they are reused
// across a distance matrix row).
inline double ncd(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                  std::size_t cx, std::size_t cy) {
  if (x.empty() && y.empty()) return 0.0;
  bool x_first = std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end()) ||
                 std::equal(x.begin(), x.end(), y.begin(), y.end());
  auto cxy = x_first ? thread_compressor().compressed_size(x, y)
                     : thread_compressor().compressed_size(y, x);
  auto lo = std::min(cx, cy);
  auto hi = std::max(cx, cy);
  return std::max(0.0, static_cast<double>(cxy) - static_cast<double>(lo)) /
         static_cast<double>(hi);
}

inline double ncd(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
  if (x.empty() && y.empty()) return 0.0;
  return ncd(x, y, compressed_size(x), compressed_size(y));
}

}  // namespace botwatch

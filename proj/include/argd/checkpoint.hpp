#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "argd/error.hpp"
#include "argd/matrix.hpp"

namespace argd {

// Matrix checkpoint format: magic "ARGD01" (6 bytes), rows and cols as
// 8-byte little-endian unsigned integers, then rows*cols little-endian
// 8-byte IEEE-754 doubles in row-major order.

inline constexpr char kCheckpointMagic[6] = {'A', 'R', 'G', 'D', '0', '1'};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return value;
}

/// Write the whole file through a temp path and rename into place, so a
/// crash never leaves a truncated checkpoint behind.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::io, "cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error(ErrorCode::io, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::io, "rename " + tmp.string() + " -> " + path.string() +
                                   " failed: " + ec.message());
  }
}

}  // namespace detail

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  detail::require_nonempty(m, "save_matrix");
  std::string bytes;
  bytes.reserve(6 + 16 + 8 * m.size());
  bytes.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u64_le(bytes, m.rows());
  detail::put_u64_le(bytes, m.cols());
  for (double x : m.data()) {
    detail::put_u64_le(bytes, std::bit_cast<std::uint64_t>(x));
  }
  detail::atomic_write_file(path, bytes);
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io, "cannot open " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 6 + 16) {
    throw Error(ErrorCode::format, path.string() + ": truncated header");
  }
  if (bytes.compare(0, 6, kCheckpointMagic, 6) != 0) {
    throw Error(ErrorCode::format, path.string() + ": bad magic string");
  }
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 6;
  const std::uint64_t rows = detail::get_u64_le(p);
  const std::uint64_t cols = detail::get_u64_le(p + 8);
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20) ||
      rows * cols > (std::uint64_t(1) << 32)) {
    throw Error(ErrorCode::format, path.string() + ": implausible dimensions");
  }
  const std::uint64_t expected = 6 + 16 + 8 * rows * cols;
  if (bytes.size() != expected) {
    throw Error(ErrorCode::format,
                path.string() + ": payload size " + std::to_string(bytes.size()) +
                    " does not match header (" + std::to_string(expected) + ")");
  }
  std::vector<double> data(rows * cols);
  const unsigned char* q = p + 16;
  for (std::uint64_t i = 0; i < rows * cols; ++i) {
    data[i] = std::bit_cast<double>(detail::get_u64_le(q + 8 * i));
  }
  try {
    return Matrix(rows, cols, std::move(data));
  } catch (const Error&) {
    throw Error(ErrorCode::format, path.string() + ": nonfinite entries in payload");
  }
}

}  // namespace argd

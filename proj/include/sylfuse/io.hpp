#pragma once

// Cube files: "MBC1" binary (little-endian u32 bands/rows/cols, then f64 data, band-major,
// row-major within band), "band,row,col,value" CSV import, and per-band PGM dumps.

#include "sylfuse/core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sylfuse {

inline constexpr std::array<char, 4> kCubeMagic{'M', 'B', 'C', '1'};
inline constexpr std::size_t kCubeHeaderBytes = 16;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

inline void put_u32(std::string& out, std::uint32_t v) {
  v = to_little(v);
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  return to_little(v);
}

}  // namespace detail

/// Serialized MBC1 bytes.
inline std::string encode_cube(const ImageCube& x) {
  std::string out;
  out.reserve(kCubeHeaderBytes + static_cast<std::size_t>(x.data().size()) * sizeof(double));
  out.append(kCubeMagic.data(), kCubeMagic.size());
  detail::put_u32(out, static_cast<std::uint32_t>(x.bands()));
  detail::put_u32(out, static_cast<std::uint32_t>(x.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(x.cols()));
  for (Index i = 0; i < x.data().size(); ++i) {
    const double v = detail::to_little(x.data().data()[i]);
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  return out;
}

inline ImageCube decode_cube(const std::string& bytes, const std::string& origin = "cube") {
  if (bytes.size() < kCubeHeaderBytes || std::memcmp(bytes.data(), kCubeMagic.data(), 4) != 0) {
    fail(ErrorKind::kValidation, origin + ": not an MBC1 cube file");
  }
  const std::uint64_t bands = detail::get_u32(bytes.data() + 4);
  const std::uint64_t rows = detail::get_u32(bytes.data() + 8);
  const std::uint64_t cols = detail::get_u32(bytes.data() + 12);
  if (bands == 0 || rows == 0 || cols == 0) fail(ErrorKind::kValidation, origin + ": zero dimension in header");
  const std::uint64_t count = bands * rows * cols;
  if (bytes.size() - kCubeHeaderBytes != count * sizeof(double)) {
    fail(ErrorKind::kValidation, origin + ": header declares " + std::to_string(bands) + "x" + std::to_string(rows) +
                                     "x" + std::to_string(cols) + " values but payload has " +
                                     std::to_string(bytes.size() - kCubeHeaderBytes) + " bytes");
  }
  ImageCube x(static_cast<Index>(bands), static_cast<Index>(rows), static_cast<Index>(cols));
  const char* p = bytes.data() + kCubeHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    double v;
    std::memcpy(&v, p + i * sizeof(double), sizeof v);
    x.data().data()[i] = detail::to_little(v);
  }
  return x;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

/// CSV with header "band,row,col,value"; dimensions are inferred from the largest indices
/// and every entry must be given exactly once.
inline ImageCube parse_csv_cube(const std::string& text, const std::string& origin = "csv") {
  std::istringstream in(text);
  std::string line;
  struct Entry {
    long band, row, col;
    double value;
  };
  std::vector<Entry> entries;
  long nb = 0, nr = 0, nc = 0;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line_no == 1 && line.find("band") != std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Entry e{};
    std::string extra;
    if (!(fields >> e.band >> e.row >> e.col >> e.value) || (fields >> extra)) {
      fail(ErrorKind::kValidation, origin + ":" + std::to_string(line_no) + ": expected band,row,col,value");
    }
    if (e.band < 0 || e.row < 0 || e.col < 0) {
      fail(ErrorKind::kValidation, origin + ":" + std::to_string(line_no) + ": negative index");
    }
    nb = std::max(nb, e.band + 1);
    nr = std::max(nr, e.row + 1);
    nc = std::max(nc, e.col + 1);
    entries.push_back(e);
  }
  if (entries.empty()) fail(ErrorKind::kValidation, origin + ": no entries");
  ImageCube x(nb, nr, nc);
  std::vector<char> seen(static_cast<std::size_t>(nb * nr * nc), 0);
  for (const Entry& e : entries) {
    const auto k = static_cast<std::size_t>((e.band * nr + e.row) * nc + e.col);
    if (seen[k]) fail(ErrorKind::kValidation, origin + ": duplicate entry for " + std::to_string(e.band) + "," +
                                                  std::to_string(e.row) + "," + std::to_string(e.col));
    seen[k] = 1;
    x.at(e.band, e.row, e.col) = e.value;
  }
  if (entries.size() != seen.size()) {
    fail(ErrorKind::kValidation, origin + ": " + std::to_string(seen.size() - entries.size()) + " entries missing");
  }
  return x;
}

/// Loads an MBC1 file, or a CSV file when the name ends in ".csv".
inline ImageCube load_cube(const std::string& path) {
  const std::string bytes = read_file(path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return parse_csv_cube(bytes, path);
  return decode_cube(bytes, path);
}

inline void save_cube(const std::string& path, const ImageCube& x) { write_file(path, encode_cube(x)); }

/// 8-bit binary PGM of one band, linearly stretched to [0, 255].
inline std::string encode_pgm(const ImageCube& x, Index band) {
  if (band < 0 || band >= x.bands()) fail(ErrorKind::kValidation, "band index out of range");
  const auto row = x.data().row(band);
  const double lo = row.minCoeff();
  const double hi = row.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::string out = "P5\n" + std::to_string(x.cols()) + " " + std::to_string(x.rows()) + "\n255\n";
  for (Index i = 0; i < x.pixels(); ++i) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround((row(i) - lo) * scale))));
  }
  return out;
}

}  // namespace sylfuse

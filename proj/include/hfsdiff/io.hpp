#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hfsdiff/core.hpp"

#include "json.hpp"

namespace hfsdiff {

// On-disk array format (BART-compatible pair): <base>.hdr is a text header
// with a "# Dimensions" line followed by space-separated extents; <base>.cfl
// holds interleaved little-endian float32 (real, imag), column-major with the
// first listed dimension varying fastest. Multi-coil stacks carry a trailing
// coil dimension.

inline void write_cfl(const std::string& base, const std::vector<ComplexField>& stack) {
  if (stack.empty()) throw io_error("write_cfl: empty stack");
  for (const auto& f : stack)
    if (!f.same_shape(stack[0])) throw dimension_error("write_cfl: shape mismatch in stack");
  std::ofstream hdr(base + ".hdr");
  if (!hdr) throw io_error("cannot write " + base + ".hdr");
  hdr << "# Dimensions\n" << stack[0].rows() << " " << stack[0].cols();
  if (stack.size() > 1) hdr << " " << stack.size();
  hdr << "\n";

  std::ofstream bin(base + ".cfl", std::ios::binary);
  if (!bin) throw io_error("cannot write " + base + ".cfl");
  std::vector<float> buf;
  buf.reserve(2 * stack[0].size());
  for (const auto& f : stack) {
    buf.clear();
    for (std::size_t i = 0; i < f.size(); ++i) {
      buf.push_back(static_cast<float>(f[i].real()));
      buf.push_back(static_cast<float>(f[i].imag()));
    }
    bin.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!bin) throw io_error("write failed for " + base + ".cfl");
}

inline void write_cfl(const std::string& base, const ComplexField& f) {
  write_cfl(base, std::vector<ComplexField>{f});
}

inline std::vector<ComplexField> read_cfl(const std::string& base,
                                          Domain domain = Domain::image) {
  std::ifstream hdr(base + ".hdr");
  if (!hdr) throw io_error("cannot read " + base + ".hdr");
  std::string line;
  std::getline(hdr, line);
  if (line.rfind("# Dimensions", 0) != 0)
    throw io_error("malformed header (missing '# Dimensions'): " + base + ".hdr");
  std::getline(hdr, line);
  std::istringstream dims(line);
  std::vector<std::size_t> extents;
  std::size_t d;
  while (dims >> d)
    if (d > 1 || extents.size() < 2) extents.push_back(d);
  if (extents.size() < 2) throw io_error("header needs at least two extents: " + base);
  const std::size_t rows = extents[0], cols = extents[1];
  std::size_t count = 1;
  for (std::size_t i = 2; i < extents.size(); ++i) count *= extents[i];

  std::ifstream bin(base + ".cfl", std::ios::binary);
  if (!bin) throw io_error("cannot read " + base + ".cfl");
  std::vector<ComplexField> stack;
  std::vector<float> buf(2 * rows * cols);
  for (std::size_t k = 0; k < count; ++k) {
    bin.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!bin) throw io_error("array file truncated: " + base + ".cfl");
    ComplexField f(rows, cols, domain);
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] = {static_cast<double>(buf[2 * i]), static_cast<double>(buf[2 * i + 1])};
    stack.push_back(std::move(f));
  }
  return stack;
}

inline ComplexField read_cfl_one(const std::string& base, Domain domain = Domain::image) {
  auto stack = read_cfl(base, domain);
  if (stack.size() != 1) throw io_error("expected a single array at " + base);
  return std::move(stack[0]);
}

// FNV-1a 64-bit digest of a file's bytes, as fixed-width hex.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot digest " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char chunk[4096];
  while (in) {
    in.read(chunk, sizeof(chunk));
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// 16-bit binary PGM of the magnitude image, min-max scaled: pixel =
// round((|x| - min) / (max - min) * 65535). Returns (min, max) so the scale
// can go into the manifest; a constant image maps to all zeros.
inline std::pair<double, double> write_pgm16(const std::string& path, const ComplexField& f) {
  double lo = std::abs(f[0]), hi = std::abs(f[0]);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double m = std::abs(f[i]);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << "P5\n" << f.cols() << " " << f.rows() << "\n65535\n";
  // PGM raster is row-major, most significant byte first.
  for (std::size_t r = 0; r < f.rows(); ++r)
    for (std::size_t c = 0; c < f.cols(); ++c) {
      const double m = std::abs(f(r, c));
      const unsigned v =
          static_cast<unsigned>(std::lround((m - lo) * scale));
      const unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8),
                                      static_cast<unsigned char>(v & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  if (!out) throw io_error("write failed for " + path);
  return {lo, hi};
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace hfsdiff

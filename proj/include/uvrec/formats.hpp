#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uvrec/fourier.hpp"
#include "uvrec/observation.hpp"

namespace uvrec {

// Binary layouts, all little-endian, row-major:
//   FIMG: "FIMG" u32 H u32 W, H*W float32
//   FVIS: "FVIS" u32 H u32 W u8 kind, H*W (float32 re, float32 im)
//   FMSK: "FMSK" u32 H u32 W, H*W bytes in {0, 1}
// Readers reject bad magic, zero extents, short files and trailing bytes.

enum class VisKind : std::uint8_t { Dense = 0, Sparse = 1 };

struct VisFile {
  ComplexGrid grid;
  VisKind kind = VisKind::Dense;
};

void write_fimg(const std::filesystem::path& path, const RealGrid& image);
RealGrid read_fimg(const std::filesystem::path& path);

void write_fvis(const std::filesystem::path& path, const ComplexGrid& grid, VisKind kind);
VisFile read_fvis(const std::filesystem::path& path);

void write_fmsk(const std::filesystem::path& path, const UVMask& mask);
UVMask read_fmsk(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// Little-endian byte sink / source shared by the binary formats.
class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u8(std::uint8_t v) { buffer_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  const std::vector<std::uint8_t>& data() const { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& data, std::string what)
      : data_(data), what_(std::move(what)) {}
  void expect_magic(const char (&magic)[5]);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string string(std::size_t n);
  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;
  const std::vector<std::uint8_t>& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace uvrec

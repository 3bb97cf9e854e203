#include "uvrec/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace uvrec {

void ByteWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buffer_.insert(buffer_.end(), p, p + n);
}

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) throw std::runtime_error(what_ + ": truncated file");
}

void ByteReader::expect_magic(const char (&magic)[5]) {
  need(4);
  if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
    throw std::runtime_error(what_ + ": bad magic, expected '" + std::string(magic) + "'");
  }
  pos_ += 4;
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data_[pos_++] << (8 * i));
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_++]} << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_++]} << (8 * i);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::string(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) throw std::runtime_error(what_ + ": unexpected trailing bytes");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

std::pair<std::size_t, std::size_t> read_extents(ByteReader& in, const std::string& what) {
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  if (h == 0 || w == 0) throw std::runtime_error(what + ": zero grid extent");
  return {h, w};
}

std::string label(const char* kind, const std::filesystem::path& path) {
  return std::string(kind) + " '" + path.string() + "'";
}

}  // namespace

void write_fimg(const std::filesystem::path& path, const RealGrid& image) {
  ByteWriter out;
  out.bytes("FIMG", 4);
  out.u32(static_cast<std::uint32_t>(image.height));
  out.u32(static_cast<std::uint32_t>(image.width));
  for (double v : image.values) out.f32(static_cast<float>(v));
  write_file_bytes(path, out.data());
}

RealGrid read_fimg(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string what = label("FIMG", path);
  ByteReader in(bytes, what);
  in.expect_magic("FIMG");
  const auto [h, w] = read_extents(in, what);
  if (in.remaining() != h * w * 4) throw std::runtime_error(what + ": payload length mismatch");
  RealGrid image(h, w);
  for (double& v : image.values) v = in.f32();
  in.expect_end();
  return image;
}

void write_fvis(const std::filesystem::path& path, const ComplexGrid& grid, VisKind kind) {
  ByteWriter out;
  out.bytes("FVIS", 4);
  out.u32(static_cast<std::uint32_t>(grid.height));
  out.u32(static_cast<std::uint32_t>(grid.width));
  out.u8(static_cast<std::uint8_t>(kind));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.f32(static_cast<float>(grid.re[i]));
    out.f32(static_cast<float>(grid.im[i]));
  }
  write_file_bytes(path, out.data());
}

VisFile read_fvis(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string what = label("FVIS", path);
  ByteReader in(bytes, what);
  in.expect_magic("FVIS");
  const auto [h, w] = read_extents(in, what);
  const std::uint8_t kind = in.u8();
  if (kind > 1) throw std::runtime_error(what + ": unknown kind " + std::to_string(kind));
  if (in.remaining() != h * w * 8) throw std::runtime_error(what + ": payload length mismatch");
  VisFile file;
  file.kind = static_cast<VisKind>(kind);
  file.grid = ComplexGrid(h, w);
  for (std::size_t i = 0; i < h * w; ++i) {
    file.grid.re[i] = in.f32();
    file.grid.im[i] = in.f32();
  }
  in.expect_end();
  return file;
}

void write_fmsk(const std::filesystem::path& path, const UVMask& mask) {
  ByteWriter out;
  out.bytes("FMSK", 4);
  out.u32(static_cast<std::uint32_t>(mask.height));
  out.u32(static_cast<std::uint32_t>(mask.width));
  out.bytes(mask.bits.data(), mask.bits.size());
  write_file_bytes(path, out.data());
}

UVMask read_fmsk(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string what = label("FMSK", path);
  ByteReader in(bytes, what);
  in.expect_magic("FMSK");
  const auto [h, w] = read_extents(in, what);
  if (in.remaining() != h * w) throw std::runtime_error(what + ": payload length mismatch");
  UVMask mask(h, w);
  for (auto& b : mask.bits) {
    b = in.u8();
    if (b > 1) throw std::runtime_error(what + ": mask byte outside {0, 1}");
  }
  in.expect_end();
  return mask;
}

}  // namespace uvrec

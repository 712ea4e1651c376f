#pragma once

// Little-endian container shared by checkpoints and index dumps:
//   8-byte magic | u32 format version | payload
// Payload scalars are u64 / f64 / u8; tensors are f64 in row-major order.

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "proxyel/errors.hpp"
#include "proxyel/numerics.hpp"

namespace proxyel::detail {

static_assert(std::endian::native == std::endian::little, "container format assumes little-endian");

inline constexpr std::uint32_t kContainerVersion = 1;

class ContainerWriter {
public:
  ContainerWriter(const std::filesystem::path& path, std::string_view magic)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path.string()) {
    require(out_.good(), ErrorCategory::io, "cannot open '" + path_ + "' for writing");
    require(magic.size() == 8, ErrorCategory::invalid_argument, "container magic must be 8 bytes");
    out_.write(magic.data(), 8);
    u32(kContainerVersion);
  }

  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64s(std::span<const double> v) { raw(v.data(), v.size_bytes()); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void matrix(const Matrix& m) {
    u64(m.rows);
    u64(m.cols);
    f64s(m.data);
  }
  void vector(const Vector& v) {
    u64(v.size());
    f64s(v);
  }

  void finish() {
    out_.flush();
    require(out_.good(), ErrorCategory::io, "write to '" + path_ + "' failed");
  }

private:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  std::ofstream out_;
  std::string path_;
};

class ContainerReader {
public:
  ContainerReader(const std::filesystem::path& path, std::string_view magic)
      : in_(path, std::ios::binary), path_(path.string()) {
    require(in_.good(), ErrorCategory::io, "cannot open '" + path_ + "'");
    std::array<char, 8> got{};
    raw(got.data(), 8);
    require(std::string_view(got.data(), 8) == magic, ErrorCategory::parse,
            "'" + path_ + "': bad magic header");
    const auto version = u32();
    require(version == kContainerVersion, ErrorCategory::parse,
            "'" + path_ + "': unsupported format version " + std::to_string(version));
  }

  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  std::string str() {
    std::string s(bounded(u64(), 1), '\0');
    raw(s.data(), s.size());
    return s;
  }
  Matrix matrix() {
    const auto r = u64();
    const auto c = u64();
    Matrix m(bounded(r, 1), bounded(c, 1));
    bounded(r * c, sizeof(double));
    raw(m.data.data(), m.data.size() * sizeof(double));
    return m;
  }
  Vector vector() {
    Vector v(bounded(u64(), sizeof(double)));
    raw(v.data(), v.size() * sizeof(double));
    return v;
  }

  void expect_end() {
    in_.peek();
    require(in_.eof(), ErrorCategory::parse, "'" + path_ + "': trailing bytes");
  }

private:
  // Guards against absurd sizes from corrupt files before allocating.
  std::size_t bounded(std::uint64_t count, std::size_t width) {
    constexpr std::uint64_t kLimit = std::uint64_t{1} << 34;
    require(count * width <= kLimit, ErrorCategory::parse, "'" + path_ + "': implausible size field");
    return static_cast<std::size_t>(count);
  }

  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(in_.gcount()) == n, ErrorCategory::parse,
            "'" + path_ + "': truncated file");
  }

  std::ifstream in_;
  std::string path_;
};

}  // namespace proxyel::detail

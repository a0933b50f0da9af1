#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace slosh::binio {

inline constexpr std::uint32_t kEndianTag = 0x01020304u;

std::uint64_t fnv1a64(std::string_view bytes);

/// Little-endian append-only byte buffer.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(std::string_view b) { buf_.append(b); }
  /// u32 length prefix then raw bytes.
  void str(std::string_view s);

  std::size_t size() const { return buf_.size(); }
  const std::string& data() const { return buf_; }
  std::string& data() { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian reader; running off the end throws
/// CorruptionError mentioning `what`.
class Reader {
 public:
  Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string_view bytes(std::size_t n);
  std::string str();

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void seek(std::size_t p);

 private:
  void need(std::size_t n);
  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Writes to a sibling temp file, then renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace slosh::binio

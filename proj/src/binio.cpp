#include "slosh/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "slosh/errors.hpp"

namespace slosh::binio {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void Writer::u32(std::uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void Writer::u64(std::uint64_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void Writer::f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }

void Writer::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void Reader::need(std::size_t n) {
  if (n > remaining()) throw CorruptionError(what_ + ": unexpected end of data at byte " + std::to_string(pos_));
}

std::uint8_t Reader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double Reader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

std::string_view Reader::bytes(std::size_t n) {
  need(n);
  auto s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string Reader::str() {
  const std::uint32_t n = u32();
  return std::string(bytes(n));
}

void Reader::seek(std::size_t p) {
  if (p > data_.size()) throw CorruptionError(what_ + ": offset " + std::to_string(p) + " past end of data");
  pos_ = p;
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace slosh::binio

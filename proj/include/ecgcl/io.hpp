#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgcl::io {

/// Little-endian byte buffer writer/reader for the binary container formats.
class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void str(std::string_view s) { buf_.append(s); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void expect_magic(std::string_view magic);
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::string str(std::size_t n);
  void f32(std::span<float> out);
  std::string_view rest() const { return data_.substr(pos_); }
  bool done() const { return pos_ == data_.size(); }

 private:
  template <typename P>
  P pod() {
    need(sizeof(P));
    P v;
    std::memcpy(&v, data_.data() + pos_, sizeof(P));
    pos_ += sizeof(P);
    return v;
  }
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha1_hex(std::string_view data);
/// git-style content hash: sha1("blob <len>\0" + content).
std::string content_hash(std::string_view data);

}  // namespace ecgcl::io

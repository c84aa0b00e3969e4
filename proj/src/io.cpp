#include "ecgcl/io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/sha.h>

namespace ecgcl::io {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

void ByteReader::need(std::size_t n) const {
  if (pos_ + n > data_.size()) throw std::runtime_error("truncated binary data");
}

void ByteReader::expect_magic(std::string_view magic) {
  if (str(magic.size()) != magic) throw std::runtime_error("bad magic, expected '" + std::string(magic) + "'");
}

std::string ByteReader::str(std::size_t n) {
  need(n);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

void ByteReader::f32(std::span<float> out) {
  need(out.size_bytes());
  std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha1_hex(std::string_view data) {
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  std::string hex;
  for (unsigned char b : digest) hex += fmt::format("{:02x}", b);
  return hex;
}

std::string content_hash(std::string_view data) {
  std::string blob = "blob " + std::to_string(data.size());
  blob.push_back('\0');
  blob.append(data);
  return sha1_hex(blob);
}

}  // namespace ecgcl::io

#include "dadapt/serialize.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dadapt/errors.hpp"

namespace dadapt {

namespace {

const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::vector<std::uint8_t> f64_to_le_bytes(const std::vector<double>& v) {
  std::vector<std::uint8_t> bytes(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &v[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(u >> (8 * b));
  }
  return bytes;
}

}  // namespace

std::string base64_encode_f64(const std::vector<double>& v) {
  auto bytes = f64_to_le_bytes(v);
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    std::uint32_t chunk = bytes[i] << 16;
    int have = 1;
    if (i + 1 < bytes.size()) { chunk |= bytes[i + 1] << 8; have = 2; }
    if (i + 2 < bytes.size()) { chunk |= bytes[i + 2]; have = 3; }
    out.push_back(kB64[(chunk >> 18) & 63]);
    out.push_back(kB64[(chunk >> 12) & 63]);
    out.push_back(have >= 2 ? kB64[(chunk >> 6) & 63] : '=');
    out.push_back(have >= 3 ? kB64[chunk & 63] : '=');
  }
  return out;
}

std::vector<double> base64_decode_f64(const std::string& s) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw CheckpointError("base64: invalid character");
  };
  std::vector<std::uint8_t> bytes;
  bytes.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i + 3 < s.size(); i += 4) {
    int a = val(s[i]), b = val(s[i + 1]), c = val(s[i + 2]), d = val(s[i + 3]);
    if (a < 0 || b < 0) throw CheckpointError("base64: malformed block");
    bytes.push_back(static_cast<std::uint8_t>((a << 2) | (b >> 4)));
    if (c >= 0) bytes.push_back(static_cast<std::uint8_t>(((b & 15) << 4) | (c >> 2)));
    if (c >= 0 && d >= 0) bytes.push_back(static_cast<std::uint8_t>(((c & 3) << 6) | d));
  }
  if (bytes.size() % 8 != 0) {
    throw CheckpointError("base64: payload is not a whole number of f64 values");
  }
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    std::memcpy(&out[i], &u, 8);
  }
  return out;
}

std::string params_checksum(const std::vector<std::vector<double>>& arrays) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (const auto& arr : arrays) {
    for (auto b : f64_to_le_bytes(arr)) feed(b);
    feed(0xFF);  // array separator
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace dadapt

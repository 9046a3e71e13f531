#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dadapt {

// f64 arrays travel in checkpoints as base64 of little-endian bytes.
std::string base64_encode_f64(const std::vector<double>& v);
std::vector<double> base64_decode_f64(const std::string& s);

// FNV-1a 64 over the little-endian bytes of all arrays, hex string.
// Used as the checkpoint integrity checksum.
std::string params_checksum(const std::vector<std::vector<double>>& arrays);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// shortest round-trip double formatting (deterministic across runs)
std::string format_double(double v);

}  // namespace dadapt

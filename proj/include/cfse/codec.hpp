#pragma once

#include <string>
#include <vector>

namespace cfse {

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

// Little-endian IEEE-754 packing.
std::string doubles_to_base64(const std::vector<double>& values);
std::vector<double> doubles_from_base64(const std::string& text);

std::string sha256_hex(const std::string& data);

}  // namespace cfse

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scorepa {

std::string base64_encode(std::string_view bytes);
/// Throws ParseError on characters outside the standard alphabet or bad padding.
std::string base64_decode(std::string_view text);

/// Little-endian f64 buffers.
std::string encode_f64(const std::vector<double>& v);
std::vector<double> decode_f64(std::string_view text);

}  // namespace scorepa

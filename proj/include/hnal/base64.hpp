#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hnal {

std::string encode_doubles_base64(std::span<const double> values);
// Throws VersionMismatch on malformed input.
std::vector<double> decode_doubles_base64(std::string_view text);

}  // namespace hnal

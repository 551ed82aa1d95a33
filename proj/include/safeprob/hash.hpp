#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace safeprob {

std::uint64_t fnv1a64(std::string_view data) noexcept;
/// 16 lowercase hex digits of fnv1a64(data).
std::string hash_hex(std::string_view data);

}  // namespace safeprob

#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <type_traits>

namespace recap::detail {

// True when `j` holds a value of T's JSON type. Unsigned targets accept
// non-negative integers of either signedness; nothing is truncated or wrapped.
template <typename T>
bool json_holds(const nlohmann::json& j) {
  if constexpr (std::is_same_v<T, bool>) {
    return j.is_boolean();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    return j.is_number_unsigned() ||
           (j.is_number_integer() && j.template get<std::int64_t>() >= 0);
  } else if constexpr (std::is_integral_v<T>) {
    return j.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    return j.is_number();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return j.is_string();
  } else {
    return true;
  }
}

}  // namespace recap::detail

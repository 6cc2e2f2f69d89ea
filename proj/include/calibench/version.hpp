#pragma once

namespace calibench {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace calibench

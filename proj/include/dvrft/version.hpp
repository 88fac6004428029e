#pragma once

namespace dvrft {

inline constexpr const char* version = "0.1.0";

}  // namespace dvrft

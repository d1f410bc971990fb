#pragma once

namespace cellseg {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace cellseg

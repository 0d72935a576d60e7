#pragma once

namespace agb {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr const char* kGeneratorVersion = "agb-synthfield/0.3.0";

}  // namespace agb

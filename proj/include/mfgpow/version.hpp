#pragma once

namespace mfgpow {

inline constexpr const char* version_string = "0.1.0";

}  // namespace mfgpow

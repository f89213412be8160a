#pragma once

namespace bci {

inline constexpr const char* kSoftwareVersion = "0.3.0";

}  // namespace bci

#pragma once

namespace rdae {
inline constexpr const char* kVersion = "0.1.0";
}

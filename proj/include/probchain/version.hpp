#pragma once

namespace probchain {
inline constexpr const char* kVersion = "0.1.0";
}

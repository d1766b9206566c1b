#pragma once

namespace sess {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sess

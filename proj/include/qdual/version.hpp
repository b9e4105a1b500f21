#pragma once

namespace qdual {
inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "qdual";
}  // namespace qdual

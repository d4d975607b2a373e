#pragma once

namespace fpqe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fpqe

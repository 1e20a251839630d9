#pragma once

namespace trialsim {

inline constexpr const char* kEngineVersion = "1.0.0";

}  // namespace trialsim

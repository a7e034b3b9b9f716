#pragma once

namespace entrofield {

inline constexpr const char* version_string = "0.1.0";
inline constexpr const char* report_format_version = "1";

}

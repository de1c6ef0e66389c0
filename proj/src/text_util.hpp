#pragma once

#include <cstdio>
#include <string>

namespace sentinel {

/// printf-style fixed-point formatting (no std::format on this toolchain).
inline std::string fixed(double v, int precision) {
  if (v == 0.0) v = 0.0;  // no "-0.000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s(buf);
  if (s.size() > 1 && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace sentinel

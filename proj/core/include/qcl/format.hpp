#pragma once

#include <cstdio>
#include <string>

namespace qcl {

/// 17 significant digits, '.' decimal separator, shortest of %e/%f.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace qcl

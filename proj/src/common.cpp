#include "mgcn/common.hpp"

#include <cstdio>
#include <cstdlib>

namespace mgcn {

std::string real_to_text(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Real text_to_real(const std::string& s) {
  if (s.empty()) throw Error("empty numeric field");
  char* end = nullptr;
  const Real v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw Error("not a number: '" + s + "'");
  return v;
}

}  // namespace mgcn

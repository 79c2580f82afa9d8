#pragma once

#include <fstream>
#include <string>

#include "polyray/polynomial.hpp"

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(POLYRAY_FIXTURE_DIR) + "/" + name; }

inline polyray::Polynomial load(const std::string& name) {
  std::ifstream in(path(name));
  return polyray::polynomial_from_json(nlohmann::json::parse(in));
}

/// z^3 + 4.32 z + 2.256i: -1.2i superattracting fixed, 1.2i escaping.
inline polyray::Polynomial cubic() { return load("cubic.json"); }
/// z^4 - 6z^2 + 8z - 2: double critical point 1 fixed, -2 escaping.
inline polyray::Polynomial quartic() { return load("quartic.json"); }
inline polyray::Polynomial connected() { return load("connected.json"); }

inline const polyray::cplx kCubicBounded{0.0, -1.2};
inline const polyray::cplx kCubicEscaping{0.0, 1.2};

}  // namespace fixtures

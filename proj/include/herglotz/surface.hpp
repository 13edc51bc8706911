#pragma once

#include <functional>

#include "herglotz/contact_core.hpp"

namespace herglotz {

/// Boundary h(q) = 0 of the admissible region h(q) >= 0.
struct SwitchingSurface {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> grad_h;
};

}  // namespace herglotz

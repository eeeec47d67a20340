#pragma once

#include <stdexcept>

namespace ovqa {

// Numeric failure (a non-finite loss, a diverged fit); distinct from input
// errors so the CLI can map the two to different exit codes.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ovqa

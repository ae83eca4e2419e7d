#pragma once

// Placeholder during bring-up; the full subcommand set lands with the harness.
#include <cstdio>

namespace gmm::cli {
inline int run(int, char**) {
  std::puts("gmm-moments: not yet wired");
  return 2;
}
}  // namespace gmm::cli

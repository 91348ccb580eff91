#pragma once

#include <cstddef>

namespace mcpscope::kernels {

/// Every parallel kernel ships a serial reference; both must produce identical results.
enum class Exec { serial, parallel };

/// Threads OpenMP would use for a parallel region (1 when built without OpenMP).
int max_threads();

}  // namespace mcpscope::kernels

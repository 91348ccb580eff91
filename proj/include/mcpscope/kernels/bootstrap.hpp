#pragma once

#include <cstddef>
#include <functional>

#include "mcpscope/kernels/exec.hpp"

namespace mcpscope::kernels {

/// Calls body(r) for r in [0, n). Bodies must write only to slot r of their output;
/// under Exec::parallel the order of calls is unspecified.
void run_replicates(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec);

}  // namespace mcpscope::kernels

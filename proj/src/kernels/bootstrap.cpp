#include "mcpscope/kernels/bootstrap.hpp"

namespace mcpscope::kernels {

void run_replicates(std::size_t n, const std::function<void(std::size_t)>& body, Exec exec) {
    if (exec == Exec::serial) {
        for (std::size_t r = 0; r < n; ++r) body(r);
        return;
    }
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long long r = 0; r < count; ++r) body(static_cast<std::size_t>(r));
}

}  // namespace mcpscope::kernels

#pragma once

#include <cstddef>
#include <functional>

namespace psir {

/// Worker cap: min(hardware threads, PSIR_THREADS if set). Cached on first use.
int worker_count();

/// Runs fn(i) for i in [0, n). Work is chunked across worker_count() threads;
/// callers that need deterministic results must write to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace psir

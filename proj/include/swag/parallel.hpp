#pragma once

#include <cstddef>
#include <functional>

namespace swag {

/// Cap on worker threads for all parallel loops (0 = library default).
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n) in parallel. Iterations must be independent;
/// callers that reduce must write per-iteration partials and combine them in
/// index order afterwards so the result is independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn);

} // namespace swag

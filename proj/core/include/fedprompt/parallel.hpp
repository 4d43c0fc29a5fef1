#pragma once

#include <cstddef>
#include <functional>

namespace fedprompt {

/// Global worker-thread cap used by parallel_for. 1 disables threading.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Work items must be independent: each item
/// writes only to its own slot and draws only from its own rng. Results are
/// therefore identical for every thread count; callers reduce in index
/// order afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fedprompt

#pragma once

#include <cstddef>
#include <functional>

namespace semloc {

/// Worker cap used when a caller passes threads = 0. Defaults to hardware concurrency.
void set_default_threads(unsigned threads);
unsigned default_threads();

/// Runs fn(i) for every i in [0, n). Each index is processed exactly once, so results that
/// are written per index and reduced afterwards in index order do not depend on `threads`.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0);

}  // namespace semloc

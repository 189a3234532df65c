#pragma once

#include <cstddef>
#include <functional>

namespace uniconv {

/// Thread count from UNICONV_THREADS, falling back to the hardware count.
int default_thread_count();

/// Runs body(chunk) for chunk in [0, chunks). Chunks are claimed dynamically
/// but each chunk writes only to its own slot, so results never depend on
/// the thread count. threads <= 1 runs inline.
void parallel_chunks(std::size_t chunks, int threads,
                     const std::function<void(std::size_t chunk)>& body);

}  // namespace uniconv

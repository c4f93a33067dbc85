#pragma once

#include <cstddef>
#include <functional>

namespace pilotwave {

// 0 means "use std::thread::hardware_concurrency()".
[[nodiscard]] unsigned resolve_workers(unsigned requested);

// Calls body(i) for i in [0, count) on up to `workers` threads. Work is handed
// out in small chunks; callers write results into slot i so the output does not
// depend on scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace pilotwave

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mvsseg {

/// Worker count honoring the MVSSEG_THREADS environment variable.
/// Both the env var and `requestedCap` cap hardware concurrency; 0 means
/// "no cap". Always returns at least 1.
inline int effectiveThreadCount(int requestedCap = 0) {
	int n = static_cast<int>(std::thread::hardware_concurrency());
	if (n <= 0) n = 1;
	if (requestedCap > 0) n = std::min(n, requestedCap);
	if (const char* env = std::getenv("MVSSEG_THREADS")) {
		char* end = nullptr;
		long v = std::strtol(env, &end, 10);
		if (end != env && v > 0) n = std::min(n, static_cast<int>(v));
	}
	return std::max(n, 1);
}

/// Runs fn(begin, end) over contiguous chunks of [0, count) on up to
/// effectiveThreadCount(threadCap) threads. Results must not depend on the
/// chunking: callers write to disjoint per-index slots only, which keeps
/// outputs identical for every thread count.
template <class Fn>
void parallelChunks(std::int64_t count, Fn&& fn, int threadCap = 0) {
	if (count <= 0) return;
	int workers = effectiveThreadCount(threadCap);
	workers = static_cast<int>(std::min<std::int64_t>(workers, count));
	if (workers <= 1) {
		fn(std::int64_t{0}, count);
		return;
	}
	std::vector<std::thread> pool;
	pool.reserve(workers);
	for (int w = 0; w < workers; ++w) {
		std::int64_t begin = count * w / workers;
		std::int64_t end = count * (w + 1) / workers;
		pool.emplace_back([&fn, begin, end] { fn(begin, end); });
	}
	for (auto& t : pool) t.join();
}

/// Per-element variant of parallelChunks.
template <class Fn>
void parallelFor(std::int64_t count, Fn&& fn, int threadCap = 0) {
	parallelChunks(
	    count,
	    [&fn](std::int64_t begin, std::int64_t end) {
		    for (std::int64_t i = begin; i < end; ++i) fn(i);
	    },
	    threadCap);
}

}  // namespace mvsseg

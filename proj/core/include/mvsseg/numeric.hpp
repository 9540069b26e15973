#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace mvsseg {

/// Kahan-Babuska (Neumaier) compensated accumulator. Summation order still
/// matters for bit-exact reproducibility, so callers feed values in a fixed
/// order (ascending triangle index throughout this library).
class CompensatedSum {
public:
	void add(double value) {
		double t = sum_ + value;
		if (std::abs(sum_) >= std::abs(value))
			comp_ += (sum_ - t) + value;
		else
			comp_ += (value - t) + sum_;
		sum_ = t;
	}
	double value() const { return sum_ + comp_; }

private:
	double sum_ = 0.0;
	double comp_ = 0.0;
};

inline double compensatedSum(std::span<const double> values) {
	CompensatedSum acc;
	for (double v : values) acc.add(v);
	return acc.value();
}

/// FNV-1a 64-bit content digest, used for pipeline stage caching.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
	const unsigned char* p = static_cast<const unsigned char*>(data);
	std::uint64_t h = seed;
	for (std::size_t i = 0; i < size; ++i) {
		h ^= p[i];
		h *= 0x100000001b3ull;
	}
	return h;
}

}  // namespace mvsseg

#include "mvsseg/clustering.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace mvsseg;

namespace {

// Block-diagonal-ish similarity: masks of the same group overlap strongly,
// strangers rarely and weakly, roughly what lifted masks look like.
std::vector<float> randomSimilarity(int n, std::mt19937_64& rng) {
	auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
	const int groups = std::max(1, n / 20);
	std::vector<int> group(n);
	for (int& g : group) g = static_cast<int>(rng() % groups);
	std::vector<float> m(static_cast<std::size_t>(n) * n, 0.0f);
	for (int i = 0; i < n; ++i) {
		m[static_cast<std::size_t>(i) * n + i] = 1.0f;
		for (int j = i + 1; j < n; ++j) {
			float v = 0.0f;
			if (group[i] == group[j])
				v = static_cast<float>(0.5 + 0.5 * unit());
			else if (rng() % 50 == 0)
				v = static_cast<float>(0.2 * unit());
			m[static_cast<std::size_t>(i) * n + j] = v;
			m[static_cast<std::size_t>(j) * n + i] = v;
		}
	}
	return m;
}

void maskClustering(benchmark::State& state) {
	const int n = static_cast<int>(state.range(0));
	std::mt19937_64 rng(11);
	std::vector<float> dense = randomSimilarity(n, rng);
	std::vector<double> probs(n);
	for (double& p : probs) p = 0.5 + 0.5 * ((rng() >> 11) * 0x1.0p-53);
	SimilarityMatrix m = SimilarityMatrix::fromDense(n, dense);
	for (auto _ : state) {
		MaskConfidences conf = confidences(m, probs, 0.5);
		MaskMapping mapping = cluster(m, conf);
		benchmark::DoNotOptimize(mapping.assignment.data());
	}
	state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK(maskClustering)->Arg(100)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

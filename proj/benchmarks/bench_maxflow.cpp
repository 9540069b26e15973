#include "mvsseg/building.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace mvsseg;

namespace {

// Grid-shaped labeling problem: one seeded corner each way, noisy data terms,
// 4-neighborhood edges, the shape the building growth produces.
MrfProblem gridProblem(int side) {
	std::mt19937_64 rng(3);
	auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
	const int n = side * side;
	MrfProblem p;
	p.triangles.resize(n);
	for (int i = 0; i < n; ++i) p.triangles[i] = i;
	p.seedFg.assign(n, 0);
	p.seedBg.assign(n, 0);
	p.dataFg.assign(n, 0.0);
	p.dataBg.assign(n, 0.0);
	p.seedFg[0] = 1;
	p.seedBg[n - 1] = 1;
	for (int i = 1; i < n - 1; ++i) {
		p.dataFg[i] = 3.0 * unit();
		p.dataBg[i] = 1.0;
	}
	for (int y = 0; y < side; ++y)
		for (int x = 0; x < side; ++x) {
			const int i = y * side + x;
			if (x + 1 < side) p.edges.push_back({i, i + 1, 0.1 + 0.9 * unit()});
			if (y + 1 < side) p.edges.push_back({i, i + side, 0.1 + 0.9 * unit()});
		}
	return p;
}

void graphCut(benchmark::State& state) {
	MrfProblem p = gridProblem(static_cast<int>(state.range(0)));
	for (auto _ : state) {
		std::vector<std::uint8_t> labels = solveMrf(p);
		benchmark::DoNotOptimize(labels.data());
	}
	state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.triangles.size()));
}

}  // namespace

BENCHMARK(graphCut)->Arg(16)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

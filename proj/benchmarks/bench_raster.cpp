#include "mvsseg/camera.hpp"
#include "mvsseg/synth.hpp"

#include <benchmark/benchmark.h>

using namespace mvsseg;

namespace {

SynthScene& scene() {
	static SynthScene s = [] {
		SynthConfig cfg;
		cfg.seed = 7;
		cfg.buildingCount = 12;
		cfg.groundExtent = 120.0;
		cfg.viewpointSpacing = 120.0;  // one viewpoint, the mesh is what matters
		return generateScene(cfg);
	}();
	return s;
}

void depthRender(benchmark::State& state) {
	const SynthScene& s = scene();
	CameraView cam = s.cameras.front();
	cam.width = static_cast<int>(state.range(0));
	cam.height = cam.width;
	cam.cx = cam.cy = cam.width / 2.0;
	cam.fx = cam.fy = cam.width * 2.5;
	for (auto _ : state) {
		DepthMap depth = renderDepth(s.mesh, cam);
		benchmark::DoNotOptimize(depth.data().data());
	}
	state.SetItemsProcessed(state.iterations() * s.mesh.triangleCount());
}

void heightRender(benchmark::State& state) {
	const SynthScene& s = scene();
	CameraView cam = s.cameras.front();
	for (auto _ : state) {
		HeightMap height = renderHeightmap(s.mesh, cam);
		benchmark::DoNotOptimize(height.data().data());
	}
}

}  // namespace

BENCHMARK(depthRender)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(heightRender)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

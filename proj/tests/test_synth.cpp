#include "mvsseg/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <set>

using namespace mvsseg;

namespace {

/// Small scene used by most cases: two attached pairs, 20 cameras, 128 px.
SynthConfig smallConfig() {
	SynthConfig cfg;
	cfg.seed = 9;
	cfg.buildingCount = 4;
	cfg.attachedFraction = 1.0;
	cfg.heightMin = 6.0;
	cfg.heightMax = 12.0;
	cfg.groundExtent = 100.0;
	cfg.viewpointSpacing = 50.0;
	cfg.imageWidth = 128;
	cfg.imageHeight = 128;
	cfg.focalLength = 110.0;
	return cfg;
}

std::vector<std::vector<std::int32_t>> maskPixels(const ViewMasks& vm) {
	std::vector<std::vector<std::int32_t>> px(vm.probabilities.size());
	const auto& data = vm.labels.data();
	for (std::size_t i = 0; i < data.size(); ++i)
		if (data[i] >= 0) px[data[i]].push_back(static_cast<std::int32_t>(i));
	return px;
}

}  // namespace

TEST_CASE("synth: validation rejects bad configs") {
	auto expectThrow = [](auto mutate) {
		SynthConfig cfg = smallConfig();
		mutate(cfg);
		CHECK_THROWS_AS(generateScene(cfg), std::invalid_argument);
	};
	expectThrow([](SynthConfig& c) { c.buildingCount = 0; });
	expectThrow([](SynthConfig& c) { c.attachedFraction = 1.5; });
	expectThrow([](SynthConfig& c) { c.attachedFraction = -0.1; });
	expectThrow([](SynthConfig& c) { c.footprintMax = c.footprintMin - 1.0; });
	expectThrow([](SynthConfig& c) { c.heightMax = c.heightMin - 1.0; });
	expectThrow([](SynthConfig& c) { c.groundExtent = c.footprintMax; });
	expectThrow([](SynthConfig& c) { c.imageWidth = 8; });
	expectThrow([](SynthConfig& c) { c.focalLength = 0.0; });
	expectThrow([](SynthConfig& c) {
		c.buildingCount = 1;
		c.attachedFraction = 0.0;
		c.roofStyle = RoofStyle::Flat;
		c.cameraAltitude = 0.1;  // cameras would sit inside the building
	});
}

TEST_CASE("synth: placement failure is reported, not looped forever") {
	SynthConfig cfg = smallConfig();
	cfg.buildingCount = 2;
	cfg.attachedFraction = 0.0;
	cfg.footprintMin = 18.0;
	cfg.footprintMax = 18.0;
	cfg.groundExtent = 36.5;  // barely admits one building
	CHECK_THROWS_AS(generateScene(cfg), std::runtime_error);

	// An attached pair of that size cannot even clear the boundary margin.
	cfg.attachedFraction = 1.0;
	CHECK_THROWS_AS(generateScene(cfg), std::runtime_error);
}

TEST_CASE("synth: scene labels, attachments, cameras, and exact masks") {
	SynthConfig cfg = smallConfig();
	SynthScene scene = generateScene(cfg);

	REQUIRE(scene.mesh.triangleCount() > 0);
	REQUIRE(scene.gtBuildingIds.size() == static_cast<std::size_t>(scene.mesh.triangleCount()));
	REQUIRE(scene.gtRoofIds.size() == scene.gtBuildingIds.size());

	// Every building contributes at least one roof triangle, and roof
	// triangles carry their building's id.
	std::set<std::int32_t> roofIds, buildingIds;
	for (std::size_t t = 0; t < scene.gtRoofIds.size(); ++t) {
		if (scene.gtRoofIds[t] >= 0) {
			roofIds.insert(scene.gtRoofIds[t]);
			CHECK(scene.gtBuildingIds[t] == scene.gtRoofIds[t]);
		}
		if (scene.gtBuildingIds[t] >= 0) buildingIds.insert(scene.gtBuildingIds[t]);
	}
	CHECK(roofIds == std::set<std::int32_t>{0, 1, 2, 3});
	CHECK(buildingIds == std::set<std::int32_t>{0, 1, 2, 3});

	// Ground triangles sit flat at z = 0 and are never roofs.
	for (std::int32_t t = 0; t < scene.mesh.triangleCount(); ++t)
		if (scene.gtBuildingIds[t] < 0) {
			CHECK(scene.gtRoofIds[t] == -1);
			for (std::int32_t v : scene.mesh.triangle(t)) CHECK(scene.mesh.vertex(v).z() == 0.0);
		}

	// Attached pairs share deduplicated vertices along the party wall;
	// unrelated buildings share none.
	std::array<std::set<std::int32_t>, 4> verts;
	for (std::int32_t t = 0; t < scene.mesh.triangleCount(); ++t) {
		std::int32_t b = scene.gtBuildingIds[t];
		if (b < 0) continue;
		for (std::int32_t v : scene.mesh.triangle(t)) verts[b].insert(v);
	}
	auto sharedCount = [&](int a, int b) {
		std::size_t n = 0;
		for (std::int32_t v : verts[a]) n += verts[b].count(v);
		return n;
	};
	CHECK(sharedCount(0, 1) >= 2);
	CHECK(sharedCount(2, 3) >= 2);
	CHECK(sharedCount(0, 2) == 0);
	CHECK(sharedCount(1, 3) == 0);

	// Viewpoint grid: floor(100 / 50)^2 positions, five cameras each, ids in
	// order, the first of each burst looking straight down.
	REQUIRE(scene.cameras.size() == 20);
	REQUIRE(scene.masks.size() == 20);
	for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
		const CameraView& cam = scene.cameras[i];
		CHECK(cam.imageId == static_cast<int>(i));
		CHECK(cam.rotationOrthonormal());
		if (i % 5 == 0) CHECK((cam.rotation.row(2).transpose() - Vec3(0, 0, -1)).norm() < 1e-12);
	}

	// GT masks are exactly the rasterized roof footprints.
	for (std::size_t vi = 0; vi < scene.cameras.size(); ++vi) {
		const ViewMasks& vm = scene.masks[vi];
		REQUIRE(!vm.labels.empty());
		CHECK(vm.labels.imageId() == scene.cameras[vi].imageId);
		REQUIRE(vm.sources.size() == vm.probabilities.size());
		for (double p : vm.probabilities) CHECK(p == 1.0);
		std::set<std::int32_t> masked;
		for (const auto& src : vm.sources) {
			REQUIRE(src.size() == 1);
			masked.insert(src[0]);
		}

		auto [depth, ids] = renderDepthWithIds(scene.mesh, scene.cameras[vi]);
		(void)depth;
		std::vector<std::int64_t> pixelCount(vm.probabilities.size(), 0);
		for (int y = 0; y < vm.labels.height(); ++y)
			for (int x = 0; x < vm.labels.width(); ++x) {
				std::int32_t label = vm.labels.at(x, y);
				std::int32_t t = ids[static_cast<std::size_t>(y) * vm.labels.width() + x];
				std::int32_t roof = t >= 0 ? scene.gtRoofIds[t] : -1;
				if (label >= 0) {
					REQUIRE(roof >= 0);
					CHECK(vm.sources[label][0] == roof);
					++pixelCount[label];
				} else {
					CHECK((roof < 0 || !masked.count(roof)));
				}
			}
		for (std::int64_t n : pixelCount) CHECK(n >= cfg.minMaskPixels);
	}
}

TEST_CASE("synth: the seed pins every bit of the scene") {
	SynthConfig cfg = smallConfig();
	cfg.buildingCount = 3;
	cfg.attachedFraction = 0.5;  // rounds down to one pair plus a single
	cfg.viewpointSpacing = 80.0;
	SynthScene a = generateScene(cfg);
	SynthScene b = generateScene(cfg);

	REQUIRE(a.mesh.vertexCount() == b.mesh.vertexCount());
	REQUIRE(a.mesh.triangleCount() == b.mesh.triangleCount());
	for (std::int32_t v = 0; v < a.mesh.vertexCount(); ++v)
		CHECK(a.mesh.vertex(v) == b.mesh.vertex(v));
	for (std::int32_t t = 0; t < a.mesh.triangleCount(); ++t)
		CHECK(a.mesh.triangle(t) == b.mesh.triangle(t));
	CHECK(a.gtBuildingIds == b.gtBuildingIds);
	CHECK(a.gtRoofIds == b.gtRoofIds);
	REQUIRE(a.cameras.size() == b.cameras.size());
	for (std::size_t i = 0; i < a.cameras.size(); ++i) {
		CHECK(a.cameras[i].rotation == b.cameras[i].rotation);
		CHECK(a.cameras[i].translation == b.cameras[i].translation);
	}
	REQUIRE(a.masks.size() == b.masks.size());
	for (std::size_t i = 0; i < a.masks.size(); ++i) {
		CHECK(a.masks[i].labels.data() == b.masks[i].labels.data());
		CHECK(a.masks[i].probabilities == b.masks[i].probabilities);
		CHECK(a.masks[i].sources == b.masks[i].sources);
	}

	cfg.seed = 10;
	SynthScene c = generateScene(cfg);
	bool differs = c.mesh.vertexCount() != a.mesh.vertexCount();
	for (std::int32_t v = 0; !differs && v < std::min(a.mesh.vertexCount(), c.mesh.vertexCount());
	     ++v)
		differs = a.mesh.vertex(v) != c.mesh.vertex(v);
	CHECK(differs);
}

TEST_CASE("synth: zero corruption leaves the masks untouched") {
	SynthScene scene = generateScene(smallConfig());
	std::vector<ViewMasks> before = scene.masks;
	corruptMasks(scene, CorruptionSpec{}, 123);
	REQUIRE(scene.masks.size() == before.size());
	for (std::size_t i = 0; i < before.size(); ++i) {
		CHECK(scene.masks[i].labels.data() == before[i].labels.data());
		CHECK(scene.masks[i].probabilities == before[i].probabilities);
		CHECK(scene.masks[i].sources == before[i].sources);
	}

	CorruptionSpec bad;
	bad.splitProbability = 1.5;
	CHECK_THROWS_AS(corruptMasks(scene, bad, 1), std::invalid_argument);
}

TEST_CASE("synth: certain split doubles every view's masks") {
	SynthScene scene = generateScene(smallConfig());
	std::vector<ViewMasks> before = scene.masks;
	CorruptionSpec spec;
	spec.splitProbability = 1.0;
	corruptMasks(scene, spec, 7);

	for (std::size_t vi = 0; vi < before.size(); ++vi) {
		const ViewMasks& was = before[vi];
		const ViewMasks& now = scene.masks[vi];
		const std::size_t n0 = was.probabilities.size();
		REQUIRE(now.probabilities.size() == 2 * n0);

		auto wasPx = maskPixels(was);
		auto nowPx = maskPixels(now);
		for (std::size_t k = 0; k < n0; ++k) {
			// Parent keeps its slot, the second half is appended in order.
			CHECK(now.sources[k] == was.sources[k]);
			CHECK(now.sources[n0 + k] == was.sources[k]);
			CHECK(now.probabilities[k] == was.probabilities[k]);
			CHECK(now.probabilities[n0 + k] == was.probabilities[k]);
			CHECK(!nowPx[k].empty());
			CHECK(!nowPx[n0 + k].empty());
			std::vector<std::int32_t> merged = nowPx[k];
			merged.insert(merged.end(), nowPx[n0 + k].begin(), nowPx[n0 + k].end());
			std::sort(merged.begin(), merged.end());
			CHECK(merged == wasPx[k]);
		}
	}
}

TEST_CASE("synth: jitter rescores masks without touching pixels") {
	SynthScene scene = generateScene(smallConfig());
	std::vector<ViewMasks> before = scene.masks;
	CorruptionSpec spec;
	spec.jitterProbability = 1.0;
	corruptMasks(scene, spec, 5);

	for (std::size_t vi = 0; vi < before.size(); ++vi) {
		CHECK(scene.masks[vi].labels.data() == before[vi].labels.data());
		CHECK(scene.masks[vi].sources == before[vi].sources);
		REQUIRE(scene.masks[vi].probabilities.size() == before[vi].probabilities.size());
		for (double p : scene.masks[vi].probabilities) {
			CHECK(p >= 0.7);
			CHECK(p <= 1.0);
		}
	}
}

TEST_CASE("synth: certain merge collapses one adjacent pair per view") {
	SynthScene scene = generateScene(smallConfig());
	std::vector<ViewMasks> before = scene.masks;
	CorruptionSpec spec;
	spec.mergeProbability = 1.0;
	corruptMasks(scene, spec, 13);

	bool anyMerged = false;
	for (std::size_t vi = 0; vi < before.size(); ++vi) {
		const ViewMasks& was = before[vi];
		const ViewMasks& now = scene.masks[vi];
		const std::size_t n0 = was.probabilities.size();
		CHECK(now.probabilities.size() >= (n0 >= 1 ? n0 - 1 : 0));
		CHECK(now.probabilities.size() <= n0);

		// Pixels are only relabeled, and the merged mask keeps every source.
		std::int64_t labeledWas = 0, labeledNow = 0;
		for (std::int32_t v : was.labels.data()) labeledWas += v >= 0;
		for (std::int32_t v : now.labels.data()) labeledNow += v >= 0;
		CHECK(labeledWas == labeledNow);
		std::size_t sourcesWas = 0, sourcesNow = 0;
		for (const auto& s : was.sources) sourcesWas += s.size();
		for (const auto& s : now.sources) sourcesNow += s.size();
		CHECK(sourcesWas == sourcesNow);

		if (now.probabilities.size() == n0 - 1) {
			anyMerged = true;
			for (const auto& s : now.sources)
				if (s.size() == 2) {
					// Merged mask keeps the larger probability of the two.
					CHECK(now.probabilities[&s - now.sources.data()] == 1.0);
				}
		}
	}
	CHECK(anyMerged);  // attached pairs guarantee adjacent masks somewhere
}

TEST_CASE("synth: lifted GT masks reproduce the roof triangle sets") {
	SynthConfig cfg;
	cfg.seed = 11;
	cfg.buildingCount = 5;
	cfg.attachedFraction = 0.0;
	cfg.footprintMin = 8.0;
	cfg.footprintMax = 14.0;
	cfg.heightMin = 6.0;
	cfg.heightMax = 12.0;
	cfg.roofStyle = RoofStyle::Flat;
	cfg.groundExtent = 64.0;
	cfg.cameraAltitude = 60.0;
	cfg.viewpointSpacing = 8.0;
	cfg.focalLength = 1200.0;  // about 0.06 m per pixel on the roofs
	SynthScene scene = generateScene(cfg);

	std::vector<DepthMap> depths(scene.cameras.size());
	std::vector<MaskLabelImage> globalLabels(scene.cameras.size());
	std::vector<std::int32_t> maskRoof;
	for (std::size_t vi = 0; vi < scene.cameras.size(); ++vi) {
		depths[vi] = renderDepth(scene.mesh, scene.cameras[vi]);
		const ViewMasks& vm = scene.masks[vi];
		const int offset = static_cast<int>(maskRoof.size());
		for (const auto& src : vm.sources) maskRoof.push_back(src[0]);
		MaskLabelImage g(vm.labels.imageId(), vm.labels.width(), vm.labels.height());
		for (int y = 0; y < g.height(); ++y)
			for (int x = 0; x < g.width(); ++x)
				if (vm.labels.at(x, y) >= 0) g.at(x, y) = offset + vm.labels.at(x, y);
		globalLabels[vi] = std::move(g);
	}

	MaskTriangleSets lifted = liftMasks(scene.mesh, scene.cameras, depths, globalLabels,
	                                    static_cast<int>(maskRoof.size()));

	for (std::int32_t roof = 0; roof < cfg.buildingCount; ++roof) {
		std::vector<char> inGt(scene.mesh.triangleCount(), 0);
		double gtArea = 0.0;
		for (std::int32_t t = 0; t < scene.mesh.triangleCount(); ++t)
			if (scene.gtRoofIds[t] == roof) {
				inGt[t] = 1;
				gtArea += scene.mesh.area(t);
			}
		REQUIRE(gtArea > 0.0);

		std::vector<char> inLift(scene.mesh.triangleCount(), 0);
		for (std::size_t m = 0; m < lifted.sets.size(); ++m)
			if (maskRoof[m] == roof)
				for (std::int32_t t : lifted.sets[m].indices()) inLift[t] = 1;

		double symDiff = 0.0;
		for (std::int32_t t = 0; t < scene.mesh.triangleCount(); ++t)
			if (inGt[t] != inLift[t]) symDiff += scene.mesh.area(t);
		CHECK(symDiff < 0.02 * gtArea);
	}
}

TEST_CASE("synth: dataset round trips through the loaders") {
	SynthConfig cfg = smallConfig();
	cfg.buildingCount = 3;
	cfg.attachedFraction = 0.0;
	cfg.viewpointSpacing = 80.0;  // one viewpoint, five cameras
	SynthScene scene = generateScene(cfg);

	std::string dir = testsupport::scratch("synth_dataset");
	writeDataset(dir, scene, cfg);

	TriMesh mesh = loadMesh(dir + "/scene.ply");
	CHECK(mesh.triangleCount() == scene.mesh.triangleCount());
	CHECK(mesh.vertexCount() == scene.mesh.vertexCount());
	auto labels = loadPlyFaceLabels(dir + "/scene.ply");
	REQUIRE(labels.has_value());
	CHECK(*labels == scene.gtBuildingIds);

	std::vector<CameraView> cameras = loadCameras(dir + "/cameras.json");
	REQUIRE(cameras.size() == scene.cameras.size());
	for (std::size_t i = 0; i < cameras.size(); ++i) {
		CHECK(cameras[i].imageId == scene.cameras[i].imageId);
		CHECK(cameras[i].fx == scene.cameras[i].fx);
		CHECK(cameras[i].rotation == scene.cameras[i].rotation);
		CHECK(cameras[i].translation == scene.cameras[i].translation);
	}

	MaskCollection loaded = loadMasks(dir + "/masks", 0.0);
	REQUIRE(loaded.labelImages.size() == scene.masks.size());
	CHECK(loaded.discardedLowConfidence == 0);
	int offset = 0;
	for (std::size_t vi = 0; vi < scene.masks.size(); ++vi) {
		const ViewMasks& vm = scene.masks[vi];
		const MaskLabelImage& got = loaded.labelImages[vi];
		CHECK(got.imageId() == vm.labels.imageId());
		for (int y = 0; y < got.height(); ++y)
			for (int x = 0; x < got.width(); ++x) {
				std::int32_t want = vm.labels.at(x, y);
				CHECK(got.at(x, y) == (want < 0 ? -1 : offset + want));
			}
		offset += static_cast<int>(vm.probabilities.size());
	}
	REQUIRE(loaded.masks.size() == static_cast<std::size_t>(offset));
	for (const LocalMask& m : loaded.masks) CHECK(m.probability == 1.0);

	nlohmann::json gt;
	std::ifstream(dir + "/gt.json") >> gt;
	std::map<std::int32_t, std::vector<std::int32_t>> groups;
	for (std::size_t t = 0; t < scene.gtBuildingIds.size(); ++t)
		if (scene.gtBuildingIds[t] >= 0)
			groups[scene.gtBuildingIds[t]].push_back(static_cast<std::int32_t>(t));
	REQUIRE(gt.size() == groups.size());
	for (const auto& entry : gt) {
		std::int32_t id = entry.at("id").get<std::int32_t>();
		CHECK(entry.at("triangle_ids").get<std::vector<std::int32_t>>() == groups.at(id));
	}

	nlohmann::json conf;
	std::ifstream(dir + "/config.json") >> conf;
	CHECK(conf.at("seed").get<std::uint64_t>() == cfg.seed);
	CHECK(conf.at("building_count").get<int>() == cfg.buildingCount);
	CHECK(conf.at("roof_style").get<std::string>() == "mixed");
	CHECK(conf.at("focal_length").get<double>() == cfg.focalLength);
}

TEST_CASE("synth: balcony fixture labels and geometry") {
	SynthScene scene = balconyScene();
	REQUIRE(scene.mesh.triangleCount() > 0);
	CHECK(scene.cameras.empty());
	CHECK(scene.masks.empty());

	bool hasRoof = false, hasWall = false, hasApron = false;
	double minY = 0.0;
	for (std::int32_t t = 0; t < scene.mesh.triangleCount(); ++t) {
		std::int32_t b = scene.gtBuildingIds[t];
		std::int32_t r = scene.gtRoofIds[t];
		CHECK((b == 0 || b == -1));
		if (r >= 0) {
			CHECK(b == 0);
			CHECK(r == 0);
			hasRoof = true;
			for (std::int32_t v : scene.mesh.triangle(t)) CHECK(scene.mesh.vertex(v).z() == 10.0);
		} else if (b == 0) {
			hasWall = true;
			for (std::int32_t v : scene.mesh.triangle(t))
				minY = std::min(minY, scene.mesh.vertex(v).y());
		} else {
			hasApron = true;
			for (std::int32_t v : scene.mesh.triangle(t))
				CHECK(scene.mesh.vertex(v).z() < 1.0);
		}
	}
	CHECK(hasRoof);
	CHECK(hasWall);
	CHECK(hasApron);
	CHECK(minY < -3.2);  // the balcony pokes out past the wall plane
}

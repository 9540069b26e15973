#include "mvsseg/masks.hpp"

#include "mvsseg/png_io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace mvsseg;

namespace {

void writeLabelPng(const std::string& path, int w, int h,
                   const std::vector<std::uint16_t>& px) {
	writePngGray16(path, w, h, px);
}

void writeSidecar(const std::string& path, const std::string& json) {
	std::ofstream out(path);
	out << json;
}

}  // namespace

TEST_CASE("masks: directory loading filters by confidence") {
	const std::string dir = testsupport::scratch("masks_load");
	// 4x2 image: left half mask 1 (in-image 0), right half mask 2 (in-image 1).
	std::vector<std::uint16_t> px = {1, 1, 2, 2, 1, 1, 2, 2};
	writeLabelPng(dir + "/3.png", 4, 2, px);
	writeSidecar(dir + "/3.json", R"([{"id": 0, "prob": 0.9}, {"id": 1, "prob": 0.6}])");

	MaskCollection coll = loadMasks(dir, 0.7);
	REQUIRE(coll.masks.size() == 1);
	CHECK(coll.discardedLowConfidence == 1);
	const LocalMask& m = coll.masks[0];
	CHECK(m.globalIndex == 0);
	CHECK(m.imageId == 3);
	CHECK(m.inImageId == 0);
	CHECK(m.probability == 0.9);
	CHECK(m.pixelCount() == 4);

	REQUIRE(coll.labelImages.size() == 1);
	const MaskLabelImage& img = coll.labelImages[0];
	CHECK(img.imageId() == 3);
	CHECK(img.at(0, 0) == 0);
	CHECK(img.at(1, 1) == 0);
	CHECK(img.at(2, 0) == -1);  // discarded mask leaves background
	CHECK(img.at(3, 1) == -1);
}

TEST_CASE("masks: global indices follow image id then in-image id") {
	const std::string dir = testsupport::scratch("masks_order");
	writeLabelPng(dir + "/10.png", 2, 1, {1, 2});
	writeSidecar(dir + "/10.json", R"([{"id": 0, "prob": 1.0}, {"id": 1, "prob": 1.0}])");
	writeLabelPng(dir + "/2.png", 2, 1, {1, 0});
	writeSidecar(dir + "/2.json", R"([{"id": 0, "prob": 1.0}])");

	MaskCollection coll = loadMasks(dir, 0.5);
	REQUIRE(coll.masks.size() == 3);
	CHECK(coll.masks[0].imageId == 2);   // numeric image order, not lexical
	CHECK(coll.masks[0].globalIndex == 0);
	CHECK(coll.masks[1].imageId == 10);
	CHECK(coll.masks[1].inImageId == 0);
	CHECK(coll.masks[2].imageId == 10);
	CHECK(coll.masks[2].inImageId == 1);
}

TEST_CASE("masks: malformed inputs throw") {
	const std::string dir = testsupport::scratch("masks_bad");
	writeLabelPng(dir + "/0.png", 2, 1, {1, 0});
	CHECK_THROWS(loadMasks(dir, 0.5));  // sidecar missing

	writeSidecar(dir + "/0.json", R"([{"id": 0, "prob": 1.5}])");
	CHECK_THROWS(loadMasks(dir, 0.5));  // probability outside [0, 1]

	writeSidecar(dir + "/0.json", R"([{"id": 5, "prob": 0.9}])");
	CHECK_THROWS(loadMasks(dir, 0.5));  // label value without sidecar entry
}

TEST_CASE("masks: lifting assigns visible centroids to mask sets") {
	// Ground quad with a smaller elevated quad hiding its middle.
	std::vector<Vec3> vertices;
	std::vector<std::array<std::int32_t, 3>> triangles;
	testsupport::appendGrid(vertices, triangles, -20, -20, 20, 20, 0.0, 5, 5);  // tris 0..49
	testsupport::appendGrid(vertices, triangles, -4, -4, 4, 4, 6.0, 1, 1);      // tris 50, 51
	TriMesh mesh = TriMesh::build(std::move(vertices), std::move(triangles));

	CameraView v;
	v.imageId = 0;
	v.width = v.height = 128;
	v.fx = v.fy = 64.0;
	v.cx = v.cy = 64.0;
	v.rotation.row(0) = Eigen::RowVector3d(1, 0, 0);
	v.rotation.row(1) = Eigen::RowVector3d(0, -1, 0);
	v.rotation.row(2) = Eigen::RowVector3d(0, 0, -1);
	v.translation = -v.rotation * Vec3(0, 0, 26.0);

	DepthMap depth = renderDepth(mesh, v);
	MaskLabelImage labels(0, 128, 128);
	for (int y = 0; y < 128; ++y)
		for (int x = 0; x < 128; ++x) labels.at(x, y) = 0;  // one mask covers everything

	std::vector<CameraView> cams = {v};
	std::vector<DepthMap> depths = {std::move(depth)};
	std::vector<MaskLabelImage> grids = {std::move(labels)};
	MaskTriangleSets lifted = liftMasks(mesh, cams, depths, grids, 1);

	REQUIRE(lifted.sets.size() == 1);
	CHECK(lifted.sets[0].contains(50));  // elevated quad
	CHECK(lifted.sets[0].contains(51));
	CHECK(lifted.sets[0].contains(0));  // corner ground cell, unoccluded
	// Ground triangles whose centroid sits under the quad are occluded.
	bool centerOccluded = true;
	for (std::int32_t t = 0; t < 50; ++t) {
		const Vec3& c = mesh.centroid(t);
		if (std::abs(c.x()) < 4.0 && std::abs(c.y()) < 4.0)
			centerOccluded = centerOccluded && !lifted.sets[0].contains(t);
	}
	CHECK(centerOccluded);
	CHECK(lifted.inverseSize() == static_cast<std::int64_t>(lifted.sets[0].size()));

	CHECK_THROWS_AS(liftMasks(mesh, cams, depths, std::span<const MaskLabelImage>{}, 1),
	                std::invalid_argument);
}

TEST_CASE("masks: triangle set file round trip") {
	const std::string dir = testsupport::scratch("masks_bin");
	TriMesh mesh = testsupport::disjointTriangles({1, 1, 1, 1, 1});
	MaskTriangleSets sets;
	sets.sets.push_back(TriangleSet::fromIndices(mesh, {0, 2, 4}));
	sets.sets.push_back(TriangleSet::fromIndices(mesh, {}));
	sets.sets.push_back(TriangleSet::fromIndices(mesh, {1}));

	writeMaskSets(dir + "/sets.bin", sets);
	auto back = readMaskSets(dir + "/sets.bin");
	REQUIRE(back.size() == 3);
	CHECK(back[0] == std::vector<std::int32_t>{0, 2, 4});
	CHECK(back[1].empty());
	CHECK(back[2] == std::vector<std::int32_t>{1});

	CHECK_THROWS(readMaskSets(dir + "/missing.bin"));
}

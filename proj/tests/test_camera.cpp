#include "mvsseg/camera.hpp"

#include "mvsseg/png_io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mvsseg;

namespace {

/// Camera at `center` looking straight down, x axis kept as image right.
CameraView nadirView(const Vec3& center, int size, double focal) {
	CameraView v;
	v.width = v.height = size;
	v.fx = v.fy = focal;
	v.cx = v.cy = size / 2.0;
	v.rotation.row(0) = Eigen::RowVector3d(1, 0, 0);
	v.rotation.row(1) = Eigen::RowVector3d(0, -1, 0);
	v.rotation.row(2) = Eigen::RowVector3d(0, 0, -1);
	v.translation = -v.rotation * center;
	return v;
}

TriMesh stackedQuads() {
	std::vector<Vec3> vertices;
	std::vector<std::array<std::int32_t, 3>> triangles;
	testsupport::appendGrid(vertices, triangles, -20, -20, 20, 20, 0.0, 1, 1);  // tris 0, 1
	testsupport::appendGrid(vertices, triangles, -5, -5, 5, 5, 5.0, 1, 1);      // tris 2, 3
	return TriMesh::build(std::move(vertices), std::move(triangles));
}

}  // namespace

TEST_CASE("camera: projection and pixel ray round trip") {
	CameraView v = nadirView({1.0, 2.0, 30.0}, 512, 600.0);
	std::mt19937_64 rng(7);
	std::uniform_real_distribution<double> span(-10.0, 10.0);
	for (int k = 0; k < 200; ++k) {
		Vec3 p(span(rng), span(rng), span(rng) * 0.3);
		PixelProjection proj = v.project(p);
		REQUIRE(!proj.behindCamera);
		Vec3 back = v.pixelRayPoint(proj.u, proj.v, proj.depth);
		CHECK((back - p).norm() < 1e-9);
	}
	Vec3 above(0, 0, 100);  // behind a downward-looking camera
	CHECK(v.project(above).behindCamera);
}

TEST_CASE("camera: depth render hits the analytic plane depth") {
	TriMesh plane = TriMesh::build({{-30, -30, 0}, {30, -30, 0}, {30, 30, 0}, {-30, 30, 0}},
	                               {{0, 1, 2}, {0, 2, 3}});
	CameraView v = nadirView({0, 0, 12.0}, 64, 32.0);
	DepthMap depth = renderDepth(plane, v);
	// A plane orthogonal to the optical axis has constant camera depth.
	for (int y = 0; y < 64; y += 7)
		for (int x = 0; x < 64; x += 7)
			CHECK(depth.at(x, y) == doctest::Approx(12.0).epsilon(1e-6));
}

TEST_CASE("camera: nearer surface wins and ids follow") {
	TriMesh mesh = stackedQuads();
	CameraView v = nadirView({0, 0, 20.0}, 128, 64.0);
	auto [depth, ids] = renderDepthWithIds(mesh, v);

	int cx = 64, cy = 64;  // over the top quad
	CHECK(depth.at(cx, cy) == doctest::Approx(15.0).epsilon(1e-6));
	CHECK((ids[static_cast<std::size_t>(cy) * 128 + cx] == 2 ||
	       ids[static_cast<std::size_t>(cy) * 128 + cx] == 3));

	// (18, 0) projects well outside the top quad but inside the ground.
	PixelProjection p = v.project({18.0, 0.0, 0.0});
	int px = static_cast<int>(std::floor(p.u)), py = static_cast<int>(std::floor(p.v));
	CHECK(depth.at(px, py) == doctest::Approx(20.0).epsilon(1e-6));
	int id = ids[static_cast<std::size_t>(py) * 128 + px];
	CHECK((id == 0 || id == 1));
}

TEST_CASE("camera: visibility respects occlusion and the frame") {
	TriMesh mesh = stackedQuads();
	CameraView v = nadirView({0, 0, 20.0}, 128, 64.0);
	DepthMap depth = renderDepth(mesh, v);

	CHECK(visible(v, depth, {0.0, 0.0, 5.0}));    // on the top quad
	CHECK(!visible(v, depth, {0.0, 0.0, 0.0}));   // hidden under it
	CHECK(visible(v, depth, {15.0, 0.0, 0.0}));   // open ground
	CHECK(!visible(v, depth, {100.0, 0.0, 0.0})); // projects out of frame
	CHECK(!visible(v, depth, {0.0, 0.0, 50.0}));  // behind the camera
}

TEST_CASE("camera: height map normalizes per image") {
	TriMesh mesh = stackedQuads();
	CameraView v = nadirView({0, 0, 40.0}, 64, 16.0);
	HeightMap h = renderHeightmap(mesh, v);
	CHECK(h.rawMin() == doctest::Approx(0.0));
	CHECK(h.rawMax() == doctest::Approx(5.0));
	CHECK(h.at(32, 32) == doctest::Approx(1.0).epsilon(1e-5));  // top quad
	PixelProjection p = v.project({15.0, 0.0, 0.0});
	CHECK(h.at(static_cast<int>(p.u), static_cast<int>(p.v)) ==
	      doctest::Approx(0.0).epsilon(1e-5));
	CHECK(h.at(0, 0) == -1.0f);  // nothing projects to the frame corner
}

TEST_CASE("camera: JSON round trip and validation") {
	const std::string dir = testsupport::scratch("camera_json");
	CameraView a = nadirView({3, -2, 25}, 640, 500.0);
	a.imageId = 7;
	CameraView b = nadirView({0, 0, 30}, 512, 480.0);
	b.imageId = 9;
	std::vector<CameraView> views = {a, b};
	saveCameras(dir + "/cameras.json", views);

	auto back = loadCameras(dir + "/cameras.json");
	REQUIRE(back.size() == 2);
	CHECK(back[0].imageId == 7);
	CHECK(back[0].width == 640);
	CHECK(back[0].fx == 500.0);
	CHECK((back[0].rotation - a.rotation).cwiseAbs().maxCoeff() == 0.0);
	CHECK((back[1].translation - b.translation).norm() == 0.0);

	views[0].rotation(0, 0) = 2.0;  // breaks orthonormality
	saveCameras(dir + "/bad.json", views);
	CHECK_THROWS_AS(loadCameras(dir + "/bad.json"), std::runtime_error);
}

TEST_CASE("camera: depth and height dumps round trip bitwise") {
	const std::string dir = testsupport::scratch("camera_dumps");
	TriMesh mesh = stackedQuads();
	CameraView v = nadirView({0, 0, 20.0}, 96, 48.0);

	DepthMap depth = renderDepth(mesh, v);
	writeDepthMapFile(dir + "/a.dmap", depth);
	DepthMap depth2 = readDepthMapFile(dir + "/a.dmap", depth.imageId());
	CHECK(depth2.data() == depth.data());

	HeightMap height = renderHeightmap(mesh, v);
	writeHeightMapFile(dir + "/a.hmap", height);
	HeightMap height2 = readHeightMapFile(dir + "/a.hmap");
	CHECK(height2.data() == height.data());
}

TEST_CASE("camera: rgb plus height export") {
	const std::string dir = testsupport::scratch("camera_rgbh");
	TriMesh mesh = stackedQuads();
	CameraView v = nadirView({0, 0, 20.0}, 32, 12.0);  // wide enough to see past the ground quad
	HeightMap height = renderHeightmap(mesh, v);

	std::vector<std::uint16_t> gray(32 * 32, 1234);
	writePngGray16(dir + "/rgb.png", 32, 32, gray);
	writeRgbh(dir + "/rgb.png", height, dir + "/rgbh.png");

	ImageU16 out = readPng(dir + "/rgbh.png");
	REQUIRE(out.channels == 4);
	REQUIRE(out.width == 32);
	bool sawBackground = false, sawCovered = false;
	for (int y = 0; y < 32; ++y)
		for (int x = 0; x < 32; ++x) {
			CHECK(out.sample(x, y, 0) == 1234);
			if (height.at(x, y) < 0.0f) {
				CHECK(out.sample(x, y, 3) == 0);
				sawBackground = true;
			} else {
				sawCovered = true;
			}
		}
	CHECK(sawBackground);
	CHECK(sawCovered);
}

#pragma once

#include "mvsseg/mesh.hpp"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testsupport {

/// Fresh per-test scratch directory under the build tree.
inline std::string scratch(const std::string& name) {
	namespace fs = std::filesystem;
	fs::path dir = fs::path(MVSSEG_TEST_SCRATCH) / name;
	fs::remove_all(dir);
	fs::create_directories(dir);
	return dir.string();
}

/// Runs the installed CLI binary, returns its exit code. Output is dumped to
/// a log file inside the scratch tree to keep test output readable.
inline int runCli(const std::string& args, const std::string& logName = "cli.log") {
	namespace fs = std::filesystem;
	fs::create_directories(MVSSEG_TEST_SCRATCH);
	const std::string log = (fs::path(MVSSEG_TEST_SCRATCH) / logName).string();
	const std::string cmd = std::string(MVSSEG_CLI_PATH) + " " + args + " >" + log + " 2>&1";
	int status = std::system(cmd.c_str());
	if (status < 0) return -1;
	return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string readFile(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Disjoint right triangles with the requested areas (legs sqrt(2*area)),
/// spaced far apart in x, all at z = 0.
inline mvsseg::TriMesh disjointTriangles(const std::vector<double>& areas) {
	std::vector<mvsseg::Vec3> vertices;
	std::vector<std::array<std::int32_t, 3>> triangles;
	double x0 = 0.0;
	for (double a : areas) {
		const double leg = std::sqrt(2.0 * a);
		const std::int32_t base = static_cast<std::int32_t>(vertices.size());
		vertices.push_back({x0, 0.0, 0.0});
		vertices.push_back({x0 + leg, 0.0, 0.0});
		vertices.push_back({x0, leg, 0.0});
		triangles.push_back({base, base + 1, base + 2});
		x0 += leg + 100.0;
	}
	return mvsseg::TriMesh::build(std::move(vertices), std::move(triangles));
}

/// Axis-aligned horizontal rectangle split into a regular triangle grid at
/// height z. nx, ny are cell counts.
inline void appendGrid(std::vector<mvsseg::Vec3>& vertices,
                       std::vector<std::array<std::int32_t, 3>>& triangles, double x0,
                       double y0, double x1, double y1, double z, int nx, int ny) {
	const std::int32_t base = static_cast<std::int32_t>(vertices.size());
	for (int j = 0; j <= ny; ++j)
		for (int i = 0; i <= nx; ++i)
			vertices.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny, z});
	auto at = [&](int i, int j) { return base + j * (nx + 1) + i; };
	for (int j = 0; j < ny; ++j)
		for (int i = 0; i < nx; ++i) {
			triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
			triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
		}
}

}  // namespace testsupport

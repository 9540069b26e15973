#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvsseg {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Immutable indexed triangle mesh in meters, Z-up, with cached per-triangle
/// area, unit normal, centroid, and edge adjacency. Degenerate triangles
/// (area < 1e-12 m^2) are dropped at build time and counted.
class TriMesh {
public:
	static constexpr double kDegenerateArea = 1e-12;

	TriMesh() = default;

	/// Throws std::invalid_argument on out-of-range vertex references or if
	/// no non-degenerate triangle remains.
	static TriMesh build(std::vector<Vec3> vertices,
	                     std::vector<std::array<std::int32_t, 3>> triangles);

	std::int32_t vertexCount() const { return static_cast<std::int32_t>(vertices_.size()); }
	std::int32_t triangleCount() const { return static_cast<std::int32_t>(triangles_.size()); }

	const Vec3& vertex(std::int32_t v) const { return vertices_[v]; }
	const std::array<std::int32_t, 3>& triangle(std::int32_t t) const { return triangles_[t]; }
	double area(std::int32_t t) const { return areas_[t]; }
	const Vec3& normal(std::int32_t t) const { return normals_[t]; }
	const Vec3& centroid(std::int32_t t) const { return centroids_[t]; }

	/// Triangles sharing an edge with t, ascending, each listed once.
	std::span<const std::int32_t> adjacent(std::int32_t t) const {
		return {adjacency_.data() + adjacencyOffsets_[t],
		        adjacency_.data() + adjacencyOffsets_[t + 1]};
	}

	std::int64_t droppedDegenerateCount() const { return droppedDegenerate_; }
	double totalArea() const { return totalArea_; }

private:
	std::vector<Vec3> vertices_;
	std::vector<std::array<std::int32_t, 3>> triangles_;
	std::vector<double> areas_;
	std::vector<Vec3> normals_;
	std::vector<Vec3> centroids_;
	std::vector<std::size_t> adjacencyOffsets_;
	std::vector<std::int32_t> adjacency_;
	std::int64_t droppedDegenerate_ = 0;
	double totalArea_ = 0.0;
};

/// Sorted set of triangle indices with the compensated-sum area cached at
/// construction (accumulated in ascending index order).
class TriangleSet {
public:
	TriangleSet() = default;
	static TriangleSet fromIndices(const TriMesh& mesh, std::vector<std::int32_t> indices);

	const std::vector<std::int32_t>& indices() const { return indices_; }
	std::size_t size() const { return indices_.size(); }
	bool empty() const { return indices_.empty(); }
	double area() const { return area_; }
	bool contains(std::int32_t t) const;

private:
	std::vector<std::int32_t> indices_;
	double area_ = 0.0;
};

/// Compensated sum of triangle areas in ascending index order.
double setArea(const TriMesh& mesh, std::span<const std::int32_t> triangles);

/// Connected components of the subset under shared-edge adjacency, sorted by
/// descending area (ties by smallest contained triangle index).
std::vector<TriangleSet> connectedComponents(const TriMesh& mesh, const TriangleSet& subset);

/// Reads a mesh from .ply (ascii or binary little-endian) or .obj. Quads are
/// split fan-wise; faces with more than four corners are rejected.
TriMesh loadMesh(const std::string& path);

/// Binary little-endian PLY with double vertex coordinates and a per-face
/// int32 building_id property (-1 = background). Empty labels write -1.
void saveLabeledPly(const std::string& path, const TriMesh& mesh,
                    std::span<const std::int32_t> faceLabels = {});

/// Per-face building_id column of a PLY, if present. Indices follow the same
/// fan-splitting and degenerate-dropping as loadMesh, so they align with it.
std::optional<std::vector<std::int32_t>> loadPlyFaceLabels(const std::string& path);

}  // namespace mvsseg

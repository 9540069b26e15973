#pragma once

#include "mvsseg/mesh.hpp"
#include "mvsseg/roof_labeling.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvsseg {

/// Box with horizontal top/bottom faces and PCA-oriented vertical sides,
/// fitted around a roof. All roof vertices lie inside the unexpanded box.
struct Hobb {
	Vec2 center = Vec2::Zero();
	Vec2 axisA = Vec2::UnitX();  // principal direction, unit length
	Vec2 axisB = Vec2::UnitY();
	Vec2 halfExtents = Vec2::Zero();  // along axisA, axisB
	double zMin = 0.0;
	double zMax = 0.0;

	bool containsXy(const Vec2& p, double offset = 0.0) const {
		const Vec2 q = p - center;
		return std::abs(q.dot(axisA)) <= halfExtents.x() + offset &&
		       std::abs(q.dot(axisB)) <= halfExtents.y() + offset;
	}

	/// Half the XY diagonal of the box expanded by offset on all four sides;
	/// bounds every in-box distance to the center region.
	double expandedHalfDiagonal(double offset) const {
		return std::hypot(halfExtents.x() + offset, halfExtents.y() + offset);
	}
};

/// PCA box over the roof's distinct vertex positions (XY, unweighted).
/// Throws std::invalid_argument for fewer than 3 distinct vertices or a
/// colinear vertex set.
Hobb computeHobb(const TriMesh& mesh, const TriangleSet& roof);

/// Triangles whose centroid lies inside the XY-expanded box between the
/// local ground (lowest vertex Z inside the expanded footprint) and the roof
/// top. Triangles claimed by a different building (claims[t] >= 0 and
/// != roofId) are excluded; claims may be empty.
TriangleSet candidateSet(const TriMesh& mesh, const Hobb& hobb, double offset,
                         std::span<const std::int32_t> claims, std::int32_t roofId);

/// Simplified closed outline of a roof patch, projected to XY.
struct RoofProfile {
	std::vector<Vec2> polygon;  // counter-clockwise, >= 3 vertices, not closed
	bool convexHullFallback = false;
};

/// Boundary loop of the roof's largest connected component with nearly
/// collinear vertices merged (perpendicular deviation < mergeTol). A patch
/// without a clean closed loop falls back to the convex hull of the roof
/// vertices, flagged. Throws std::invalid_argument if even the hull is
/// degenerate.
RoofProfile roofProfile(const TriMesh& mesh, const TriangleSet& roof, double mergeTol = 0.2);

/// Signed point-in-polygon test used for the distance sign (even-odd rule).
bool insidePolygon(std::span<const Vec2> polygon, const Vec2& p);

/// Which parts of the foreground penalty are active.
enum class DataTermMode { Full, NoOrientation, NoDistance, Uniform };

struct DataTerm {
	double d = 0.0;      // signed normalized distance to the profile, [-1, 1]
	double theta = 1.0;  // alignment of the XY-projected normal, [0, 1]
};

/// Per-triangle distance and orientation terms against the roof profile.
/// d: XY distance from the centroid to the nearest profile segment,
/// normalized by half the expanded box diagonal, clamped, negative inside
/// the polygon. theta: |cos| between the XY-projected triangle normal and
/// that segment's direction; horizontal triangles (XY normal below 1e-6)
/// get theta = 1.
std::vector<DataTerm> dataTerms(const TriMesh& mesh, std::span<const std::int32_t> triangles,
                                const RoofProfile& profile, const Hobb& hobb, double offset);

/// Foreground penalty for one triangle under the given mode; the background
/// penalty is always 1 for free triangles.
double foregroundPenalty(const DataTerm& term, DataTermMode mode);

/// Binary labeling problem over a candidate set: locked seeds, per-triangle
/// label penalties and pairwise label-change penalties on interior edges.
struct MrfProblem {
	static constexpr double kSeedLock = 1e9;

	struct Edge {
		std::int32_t a = 0, b = 0;  // indices into triangles
		double weight = 0.0;
	};

	std::vector<std::int32_t> triangles;  // ascending mesh triangle ids
	std::vector<std::uint8_t> seedFg, seedBg;
	std::vector<double> dataFg, dataBg;  // free triangles only, seeds 0
	std::vector<Edge> edges;
};

/// Assembles the problem: seeds (foreground = roof triangles, background =
/// candidates adjacent to a triangle outside the set, foreground wins
/// overlaps), data terms for the free rest, smoothness |n_i . n_j| on every
/// interior edge.
MrfProblem buildMrfProblem(const TriMesh& mesh, const TriangleSet& candidates,
                           const TriangleSet& roof, const RoofProfile& profile,
                           const Hobb& hobb, double offset, DataTermMode mode);

/// Exact global minimizer via min cut. Returns one label per problem
/// triangle (1 foreground); minCutValue receives the cut value if non-null.
std::vector<std::uint8_t> solveMrf(const MrfProblem& problem, double* minCutValue = nullptr);

/// Energy of a labeling, recomputed independently of the solver: per-node
/// penalties (locked seeds charge kSeedLock when flipped) plus pairwise
/// weights where labels differ. Term order is fixed, so equal labelings give
/// bitwise-equal energies.
double mrfEnergy(const MrfProblem& problem, std::span<const std::uint8_t> labels);

struct BuildingInstance {
	std::int32_t buildingId = -1;  // equals the source roof id
	std::int32_t roofId = -1;
	TriangleSet triangles;
	bool profileFallback = false;  // convex-hull profile or skipped growth
};

struct BuildingSegmentation {
	std::vector<BuildingInstance> buildings;    // ascending building id
	std::vector<std::int32_t> triangleLabels;  // per-triangle building id, -1 none
};

struct BuildingGrowthConfig {
	double hobbOffset = 4.0;
	double profileTol = 0.2;
	DataTermMode mode = DataTermMode::Full;
};

/// Grows every roof into a building, largest roof first. Roof triangles are
/// claimed by their own instance up front, so no building can absorb another
/// roof's seed; grown triangles are excluded from later candidates. A roof
/// too degenerate to grow (box or profile failure) keeps its own triangles
/// and is flagged.
BuildingSegmentation segmentBuildings(const TriMesh& mesh, std::span<const RoofInstance> roofs,
                                      const BuildingGrowthConfig& cfg = {});

}  // namespace mvsseg

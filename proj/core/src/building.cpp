#include "mvsseg/building.hpp"

#include "mvsseg/maxflow.hpp"
#include "mvsseg/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace mvsseg {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signedArea(std::span<const Vec2> polygon) {
	double area = 0.0;
	for (std::size_t i = 0, n = polygon.size(); i < n; ++i)
		area += cross2(polygon[i], polygon[(i + 1) % n]);
	return 0.5 * area;
}

double pointSegmentDistance2(const Vec2& p, const Vec2& a, const Vec2& b) {
	const Vec2 ab = b - a;
	const double len2 = ab.squaredNorm();
	if (len2 <= 0.0) return (p - a).squaredNorm();
	const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
	return (p - (a + t * ab)).squaredNorm();
}

/// Distinct vertex positions used by the roof triangles.
std::vector<Vec3> distinctRoofVertices(const TriMesh& mesh, const TriangleSet& roof) {
	std::vector<std::int32_t> ids;
	ids.reserve(roof.size() * 3);
	for (std::int32_t t : roof.indices()) {
		const auto& tri = mesh.triangle(t);
		ids.insert(ids.end(), {tri[0], tri[1], tri[2]});
	}
	std::sort(ids.begin(), ids.end());
	ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

	std::vector<Vec3> points;
	points.reserve(ids.size());
	for (std::int32_t v : ids) points.push_back(mesh.vertex(v));
	std::sort(points.begin(), points.end(), [](const Vec3& a, const Vec3& b) {
		if (a.x() != b.x()) return a.x() < b.x();
		if (a.y() != b.y()) return a.y() < b.y();
		return a.z() < b.z();
	});
	points.erase(std::unique(points.begin(), points.end(),
	                         [](const Vec3& a, const Vec3& b) { return a == b; }),
	             points.end());
	return points;
}

/// Andrew monotone chain; returns a counter-clockwise hull without
/// collinear points.
std::vector<Vec2> convexHull(std::vector<Vec2> points) {
	std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
		if (a.x() != b.x()) return a.x() < b.x();
		return a.y() < b.y();
	});
	points.erase(std::unique(points.begin(), points.end(),
	                         [](const Vec2& a, const Vec2& b) { return a == b; }),
	             points.end());
	const std::size_t n = points.size();
	if (n < 3) return points;

	std::vector<Vec2> hull(2 * n);
	std::size_t k = 0;
	for (std::size_t i = 0; i < n; ++i) {
		while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], points[i] - hull[k - 2]) <= 0.0) --k;
		hull[k++] = points[i];
	}
	for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
		while (k >= lower && cross2(hull[k - 1] - hull[k - 2], points[i] - hull[k - 2]) <= 0.0)
			--k;
		hull[k++] = points[i];
	}
	hull.resize(k - 1);  // last point repeats the first
	return hull;
}

/// Removes vertices whose perpendicular deviation from the segment joining
/// their neighbors is below tol, until a full pass removes nothing.
void mergeCollinear(std::vector<Vec2>& polygon, double tol) {
	bool changed = true;
	while (changed && polygon.size() > 3) {
		changed = false;
		for (std::size_t i = 0; i < polygon.size() && polygon.size() > 3;) {
			const std::size_t n = polygon.size();
			const Vec2& a = polygon[(i + n - 1) % n];
			const Vec2& b = polygon[i];
			const Vec2& c = polygon[(i + 1) % n];
			const double len = (c - a).norm();
			const double perp = len < 1e-12 ? 0.0 : std::abs(cross2(c - a, b - a)) / len;
			if (perp < tol) {
				polygon.erase(polygon.begin() + static_cast<std::ptrdiff_t>(i));
				changed = true;
			} else {
				++i;
			}
		}
	}
}

}  // namespace

Hobb computeHobb(const TriMesh& mesh, const TriangleSet& roof) {
	if (roof.empty()) throw std::invalid_argument("hobb: empty roof");
	const std::vector<Vec3> points = distinctRoofVertices(mesh, roof);
	if (points.size() < 3) throw std::invalid_argument("hobb: fewer than 3 distinct vertices");

	Vec2 mean = Vec2::Zero();
	for (const Vec3& p : points) mean += p.head<2>();
	mean /= static_cast<double>(points.size());

	Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
	for (const Vec3& p : points) {
		const Vec2 q = p.head<2>() - mean;
		cov += q * q.transpose();
	}
	cov /= static_cast<double>(points.size());

	Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
	const Vec2 axisA = solver.eigenvectors().col(1).normalized();  // largest eigenvalue
	const Vec2 axisB(-axisA.y(), axisA.x());

	double minA = std::numeric_limits<double>::infinity(), maxA = -minA;
	double minB = minA, maxB = -minA;
	double minZ = minA, maxZ = -minA;
	for (const Vec3& p : points) {
		const Vec2 q = p.head<2>() - mean;
		const double sa = q.dot(axisA), sb = q.dot(axisB);
		minA = std::min(minA, sa);
		maxA = std::max(maxA, sa);
		minB = std::min(minB, sb);
		maxB = std::max(maxB, sb);
		minZ = std::min(minZ, p.z());
		maxZ = std::max(maxZ, p.z());
	}

	Hobb hobb;
	hobb.axisA = axisA;
	hobb.axisB = axisB;
	hobb.center = mean + axisA * (0.5 * (minA + maxA)) + axisB * (0.5 * (minB + maxB));
	hobb.halfExtents = Vec2(0.5 * (maxA - minA), 0.5 * (maxB - minB));
	hobb.zMin = minZ;
	hobb.zMax = maxZ;
	if (hobb.halfExtents.minCoeff() < 1e-9)
		throw std::invalid_argument("hobb: colinear roof vertices");
	return hobb;
}

TriangleSet candidateSet(const TriMesh& mesh, const Hobb& hobb, double offset,
                         std::span<const std::int32_t> claims, std::int32_t roofId) {
	constexpr double kZSlack = 1e-9;

	double zLow = std::numeric_limits<double>::infinity();
	for (std::int32_t v = 0; v < mesh.vertexCount(); ++v) {
		const Vec3& p = mesh.vertex(v);
		if (hobb.containsXy(p.head<2>(), offset)) zLow = std::min(zLow, p.z());
	}
	if (!std::isfinite(zLow)) zLow = hobb.zMin;

	std::vector<std::int32_t> selected;
	for (std::int32_t t = 0; t < mesh.triangleCount(); ++t) {
		if (!claims.empty() && claims[t] >= 0 && claims[t] != roofId) continue;
		const Vec3& c = mesh.centroid(t);
		if (!hobb.containsXy(c.head<2>(), offset)) continue;
		if (c.z() < zLow - kZSlack || c.z() > hobb.zMax + kZSlack) continue;
		selected.push_back(t);
	}
	return TriangleSet::fromIndices(mesh, std::move(selected));
}

RoofProfile roofProfile(const TriMesh& mesh, const TriangleSet& roof, double mergeTol) {
	if (roof.empty()) throw std::invalid_argument("profile: empty roof");

	const auto fallback = [&]() -> RoofProfile {
		std::vector<Vec2> xy;
		for (const Vec3& p : distinctRoofVertices(mesh, roof)) xy.push_back(p.head<2>());
		std::vector<Vec2> hull = convexHull(std::move(xy));
		if (hull.size() < 3 || signedArea(hull) <= 1e-12)
			throw std::invalid_argument("profile: degenerate roof outline");
		return {std::move(hull), true};
	};

	const std::vector<TriangleSet> components = connectedComponents(mesh, roof);
	const TriangleSet& largest = components.front();

	// Directed boundary edges: edges used by exactly one component triangle,
	// oriented by that triangle's winding.
	struct EdgeUse {
		std::int32_t from, to;
		int count;
	};
	std::unordered_map<std::uint64_t, EdgeUse> uses;
	uses.reserve(largest.size() * 3);
	for (std::int32_t t : largest.indices()) {
		const auto& tri = mesh.triangle(t);
		for (int e = 0; e < 3; ++e) {
			const std::int32_t a = tri[e], b = tri[(e + 1) % 3];
			const std::uint64_t key =
			    (static_cast<std::uint64_t>(static_cast<std::uint32_t>(std::min(a, b))) << 32) |
			    static_cast<std::uint32_t>(std::max(a, b));
			auto [it, fresh] = uses.try_emplace(key, EdgeUse{a, b, 0});
			++it->second.count;
		}
	}

	std::vector<std::pair<std::int32_t, std::int32_t>> boundary;
	for (const auto& [key, use] : uses)
		if (use.count == 1) boundary.push_back({use.from, use.to});
	std::sort(boundary.begin(), boundary.end());
	if (boundary.empty()) return fallback();

	std::unordered_map<std::int32_t, std::int32_t> next;
	next.reserve(boundary.size());
	for (const auto& [a, b] : boundary)
		if (!next.emplace(a, b).second) return fallback();  // non-manifold fan-out

	// Chain the edges into loops; keep the one with the largest XY area.
	std::vector<Vec2> best;
	double bestArea = -1.0;
	std::unordered_map<std::int32_t, bool> visited;
	for (const auto& [start, firstTo] : boundary) {
		if (visited[start]) continue;
		std::vector<Vec2> loop;
		std::int32_t v = start;
		bool closed = false;
		for (std::size_t guard = 0; guard <= boundary.size(); ++guard) {
			visited[v] = true;
			loop.push_back(mesh.vertex(v).head<2>());
			const auto it = next.find(v);
			if (it == next.end()) break;  // dead end
			v = it->second;
			if (v == start) {
				closed = true;
				break;
			}
			if (visited[v]) break;  // merged into an earlier loop: broken topology
		}
		if (!closed) return fallback();
		const double area = std::abs(signedArea(loop));
		if (area > bestArea) {
			bestArea = area;
			best = std::move(loop);
		}
	}
	if (best.empty()) return fallback();

	// Drop coincident consecutive vertices (vertical seams project together).
	std::vector<Vec2> polygon;
	for (const Vec2& p : best)
		if (polygon.empty() || (p - polygon.back()).norm() > 1e-12) polygon.push_back(p);
	while (polygon.size() > 1 && (polygon.front() - polygon.back()).norm() <= 1e-12)
		polygon.pop_back();
	if (polygon.size() < 3) return fallback();
	if (signedArea(polygon) < 0.0) std::reverse(polygon.begin(), polygon.end());

	mergeCollinear(polygon, mergeTol);
	if (polygon.size() < 3 || signedArea(polygon) <= 1e-12) return fallback();
	return {std::move(polygon), false};
}

bool insidePolygon(std::span<const Vec2> polygon, const Vec2& p) {
	bool inside = false;
	for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
		const Vec2& a = polygon[i];
		const Vec2& b = polygon[j];
		if ((a.y() > p.y()) != (b.y() > p.y())) {
			const double x = b.x() + (p.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
			if (p.x() < x) inside = !inside;
		}
	}
	return inside;
}

std::vector<DataTerm> dataTerms(const TriMesh& mesh, std::span<const std::int32_t> triangles,
                                const RoofProfile& profile, const Hobb& hobb, double offset) {
	const auto& poly = profile.polygon;
	if (poly.size() < 3) throw std::invalid_argument("data terms: invalid profile");
	const double halfDiag = hobb.expandedHalfDiagonal(offset);

	std::vector<DataTerm> out(triangles.size());
	parallelFor(static_cast<std::int64_t>(triangles.size()), [&](std::int64_t i) {
		const std::int32_t t = triangles[i];
		const Vec2 c = mesh.centroid(t).head<2>();

		double bestD2 = std::numeric_limits<double>::infinity();
		std::size_t bestSeg = 0;
		for (std::size_t k = 0; k < poly.size(); ++k) {
			const double d2 = pointSegmentDistance2(c, poly[k], poly[(k + 1) % poly.size()]);
			if (d2 < bestD2) {
				bestD2 = d2;
				bestSeg = k;
			}
		}

		DataTerm term;
		term.d = std::clamp(std::sqrt(bestD2) / halfDiag, 0.0, 1.0);
		if (insidePolygon(poly, c)) term.d = -term.d;

		const Vec3& n = mesh.normal(t);
		const Vec2 nxy(n.x(), n.y());
		const double nlen = nxy.norm();
		if (nlen < 1e-6) {
			term.theta = 1.0;
		} else {
			const Vec2 seg = poly[(bestSeg + 1) % poly.size()] - poly[bestSeg];
			const double slen = seg.norm();
			term.theta = slen < 1e-12
			                 ? 1.0
			                 : std::clamp(std::abs(nxy.dot(seg) / (nlen * slen)), 0.0, 1.0);
		}
		out[i] = term;
	});
	return out;
}

double foregroundPenalty(const DataTerm& term, DataTermMode mode) {
	switch (mode) {
		case DataTermMode::Full: return (1.0 + term.d) + term.theta * (1.0 + term.d);
		case DataTermMode::NoOrientation: return 1.0 + term.d;
		case DataTermMode::NoDistance: return 1.0 + term.theta;
		case DataTermMode::Uniform: return 1.0;
	}
	return 1.0;
}

MrfProblem buildMrfProblem(const TriMesh& mesh, const TriangleSet& candidates,
                           const TriangleSet& roof, const RoofProfile& profile,
                           const Hobb& hobb, double offset, DataTermMode mode) {
	const auto& tris = candidates.indices();
	const std::size_t n = tris.size();

	MrfProblem p;
	p.triangles = tris;
	p.seedFg.assign(n, 0);
	p.seedBg.assign(n, 0);
	p.dataFg.assign(n, 0.0);
	p.dataBg.assign(n, 0.0);

	for (std::size_t i = 0; i < n; ++i) {
		const std::int32_t t = tris[i];
		if (roof.contains(t)) {
			p.seedFg[i] = 1;
			continue;
		}
		for (std::int32_t u : mesh.adjacent(t)) {
			if (!candidates.contains(u)) {
				p.seedBg[i] = 1;
				break;
			}
		}
	}

	const std::vector<DataTerm> terms = dataTerms(mesh, tris, profile, hobb, offset);
	for (std::size_t i = 0; i < n; ++i) {
		if (p.seedFg[i] || p.seedBg[i]) continue;
		p.dataFg[i] = foregroundPenalty(terms[i], mode);
		p.dataBg[i] = 1.0;
	}

	for (std::size_t i = 0; i < n; ++i) {
		const std::int32_t t = tris[i];
		for (std::int32_t u : mesh.adjacent(t)) {
			if (u <= t) continue;
			const auto it = std::lower_bound(tris.begin(), tris.end(), u);
			if (it == tris.end() || *it != u) continue;
			const double w =
			    std::clamp(std::abs(mesh.normal(t).dot(mesh.normal(u))), 0.0, 1.0);
			if (w > 0.0)
				p.edges.push_back({static_cast<std::int32_t>(i),
				                   static_cast<std::int32_t>(it - tris.begin()), w});
		}
	}
	return p;
}

std::vector<std::uint8_t> solveMrf(const MrfProblem& problem, double* minCutValue) {
	const std::int32_t n = static_cast<std::int32_t>(problem.triangles.size());
	MaxFlow flow(n);
	// Cutting the source arc pays the background cost (the node falls on the
	// sink side, label 0); cutting the sink arc pays the foreground cost.
	for (std::int32_t i = 0; i < n; ++i) {
		if (problem.seedFg[i])
			flow.addTerminal(i, MrfProblem::kSeedLock, 0.0);
		else if (problem.seedBg[i])
			flow.addTerminal(i, 0.0, MrfProblem::kSeedLock);
		else
			flow.addTerminal(i, problem.dataBg[i], problem.dataFg[i]);
	}
	for (const MrfProblem::Edge& e : problem.edges) flow.addEdge(e.a, e.b, e.weight, e.weight);

	const double cut = flow.solve();
	if (minCutValue) *minCutValue = cut;

	std::vector<std::uint8_t> labels(n, 0);
	for (std::int32_t i = 0; i < n; ++i) labels[i] = flow.sourceSide(i) ? 1 : 0;
	return labels;
}

double mrfEnergy(const MrfProblem& problem, std::span<const std::uint8_t> labels) {
	if (labels.size() != problem.triangles.size())
		throw std::invalid_argument("energy: label count mismatch");
	double energy = 0.0;
	for (std::size_t i = 0; i < labels.size(); ++i) {
		if (problem.seedFg[i]) {
			if (!labels[i]) energy += MrfProblem::kSeedLock;
		} else if (problem.seedBg[i]) {
			if (labels[i]) energy += MrfProblem::kSeedLock;
		} else {
			energy += labels[i] ? problem.dataFg[i] : problem.dataBg[i];
		}
	}
	for (const MrfProblem::Edge& e : problem.edges)
		if (labels[e.a] != labels[e.b]) energy += e.weight;
	return energy;
}

BuildingSegmentation segmentBuildings(const TriMesh& mesh, std::span<const RoofInstance> roofs,
                                      const BuildingGrowthConfig& cfg) {
	std::vector<std::int32_t> claims(mesh.triangleCount(), -1);
	for (const RoofInstance& r : roofs)
		for (std::int32_t t : r.triangles.indices()) claims[t] = r.roofId;

	std::vector<std::size_t> order(roofs.size());
	for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
	std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		if (roofs[a].triangles.area() != roofs[b].triangles.area())
			return roofs[a].triangles.area() > roofs[b].triangles.area();
		return roofs[a].roofId < roofs[b].roofId;
	});

	BuildingSegmentation result;
	for (std::size_t idx : order) {
		const RoofInstance& roof = roofs[idx];
		BuildingInstance b;
		b.buildingId = b.roofId = roof.roofId;
		try {
			const Hobb hobb = computeHobb(mesh, roof.triangles);
			const RoofProfile profile = roofProfile(mesh, roof.triangles, cfg.profileTol);
			const TriangleSet candidates =
			    candidateSet(mesh, hobb, cfg.hobbOffset, claims, roof.roofId);
			const MrfProblem problem = buildMrfProblem(mesh, candidates, roof.triangles,
			                                           profile, hobb, cfg.hobbOffset, cfg.mode);
			const std::vector<std::uint8_t> labels = solveMrf(problem);
			std::vector<std::int32_t> fg;
			for (std::size_t i = 0; i < labels.size(); ++i)
				if (labels[i]) fg.push_back(problem.triangles[i]);
			b.triangles = TriangleSet::fromIndices(mesh, std::move(fg));
			b.profileFallback = profile.convexHullFallback;
		} catch (const std::invalid_argument&) {
			// Degenerate roof: keep the seed triangles, skip growth.
			b.triangles = roof.triangles;
			b.profileFallback = true;
		}
		for (std::int32_t t : b.triangles.indices()) claims[t] = roof.roofId;
		result.buildings.push_back(std::move(b));
	}

	std::sort(result.buildings.begin(), result.buildings.end(),
	          [](const BuildingInstance& a, const BuildingInstance& b) {
		          return a.buildingId < b.buildingId;
	          });
	result.triangleLabels = std::move(claims);
	return result;
}

}  // namespace mvsseg

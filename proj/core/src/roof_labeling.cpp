#include "mvsseg/roof_labeling.hpp"

#include "mvsseg/parallel.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mvsseg {

std::vector<std::int32_t> voteVertexRoofIds(const TriMesh& mesh,
                                            std::span<const CameraView> cameras,
                                            std::span<const DepthMap> depths,
                                            std::span<const MaskLabelImage> labels,
                                            std::span<const std::int32_t> maskToGlobal,
                                            RoofVoteStats* stats) {
	if (cameras.size() != depths.size() || cameras.size() != labels.size())
		throw std::invalid_argument("vote: cameras, depths and labels must align");

	std::vector<std::int32_t> out(mesh.vertexCount(), -1);
	std::atomic<std::int64_t> backgroundTies{0};
	parallelFor(mesh.vertexCount(), [&](std::int64_t v) {
		std::map<std::int32_t, int> votes;  // -1 = background
		const Vec3& p = mesh.vertex(static_cast<std::int32_t>(v));
		for (std::size_t c = 0; c < cameras.size(); ++c) {
			if (labels[c].empty()) continue;
			if (!visible(cameras[c], depths[c], p)) continue;
			const PixelProjection proj = cameras[c].project(p);
			const int x = static_cast<int>(std::floor(proj.u));
			const int y = static_cast<int>(std::floor(proj.v));
			const std::int32_t local = labels[c].at(x, y);
			if (local >= 0) {
				if (static_cast<std::size_t>(local) >= maskToGlobal.size())
					throw std::out_of_range("vote: label image references unknown mask");
				++votes[maskToGlobal[local]];
			} else {
				++votes[-1];
			}
		}
		if (votes.empty()) return;

		int maskCount = 0;
		std::int32_t bestMask = -1;  // smallest id wins ties, map order gives it
		for (const auto& [id, count] : votes) {
			if (id < 0) continue;
			if (count > maskCount) {
				maskCount = count;
				bestMask = id;
			}
		}
		const auto bg = votes.find(-1);
		const int bgCount = bg == votes.end() ? 0 : bg->second;
		if (maskCount == 0 || bgCount > maskCount) return;  // stays background
		if (bgCount == maskCount) backgroundTies.fetch_add(1, std::memory_order_relaxed);
		out[v] = bestMask;
	});
	if (stats) stats->backgroundTies = backgroundTies.load();
	return out;
}

std::vector<std::int32_t> voteTriangleRoofIds(const TriMesh& mesh,
                                              std::span<const std::int32_t> vertexIds) {
	if (vertexIds.size() != static_cast<std::size_t>(mesh.vertexCount()))
		throw std::invalid_argument("vote: vertex id count mismatch");

	std::vector<std::int32_t> out(mesh.triangleCount(), -1);
	parallelFor(mesh.triangleCount(), [&](std::int64_t t) {
		const auto& tri = mesh.triangle(static_cast<std::int32_t>(t));
		const std::int32_t a = vertexIds[tri[0]];
		const std::int32_t b = vertexIds[tri[1]];
		const std::int32_t c = vertexIds[tri[2]];
		std::int32_t rid;
		if (a == b || a == c) {
			rid = a;
		} else if (b == c) {
			rid = b;
		} else {
			// All distinct: at most one is background, take the smallest id.
			rid = std::numeric_limits<std::int32_t>::max();
			for (std::int32_t x : {a, b, c})
				if (x >= 0) rid = std::min(rid, x);
		}
		out[t] = rid;
	});
	return out;
}

std::vector<RoofInstance> roofInstances(const TriMesh& mesh,
                                        std::span<const std::int32_t> triangleIds) {
	if (triangleIds.size() != static_cast<std::size_t>(mesh.triangleCount()))
		throw std::invalid_argument("roofs: triangle id count mismatch");

	std::map<std::int32_t, std::vector<std::int32_t>> groups;
	for (std::int32_t t = 0; t < mesh.triangleCount(); ++t)
		if (triangleIds[t] >= 0) groups[triangleIds[t]].push_back(t);

	std::vector<RoofInstance> out;
	out.reserve(groups.size());
	for (auto& [id, tris] : groups)
		out.push_back({id, TriangleSet::fromIndices(mesh, std::move(tris))});
	return out;
}

}  // namespace mvsseg

#pragma once

#include "mvsseg/camera.hpp"
#include "mvsseg/masks.hpp"
#include "mvsseg/mesh.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvsseg {

struct RoofVoteStats {
	/// Vertices where a background/mask vote tie resolved to the mask.
	std::int64_t backgroundTies = 0;
};

/// Majority vote of a vertex's roof id over all views where it is visible.
/// Each vote is the global-mask id at the projected pixel (-1 background);
/// ties among masks go to the smaller id, a background/mask tie goes to the
/// mask, and a vertex visible nowhere stays background. Empty label images
/// contribute no votes.
std::vector<std::int32_t> voteVertexRoofIds(const TriMesh& mesh,
                                            std::span<const CameraView> cameras,
                                            std::span<const DepthMap> depths,
                                            std::span<const MaskLabelImage> labels,
                                            std::span<const std::int32_t> maskToGlobal,
                                            RoofVoteStats* stats = nullptr);

/// Majority of the triangle's three vertex ids; an all-distinct triple takes
/// the smallest non-background id, all-background stays background.
std::vector<std::int32_t> voteTriangleRoofIds(const TriMesh& mesh,
                                              std::span<const std::int32_t> vertexIds);

struct RoofInstance {
	std::int32_t roofId = -1;  // global-mask id
	TriangleSet triangles;
};

/// Groups triangles by roof id, drops background, sorted by roof id. Ids
/// nothing voted for do not appear.
std::vector<RoofInstance> roofInstances(const TriMesh& mesh,
                                        std::span<const std::int32_t> triangleIds);

}  // namespace mvsseg

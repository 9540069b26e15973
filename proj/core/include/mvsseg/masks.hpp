#pragma once

#include "mvsseg/camera.hpp"
#include "mvsseg/mesh.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mvsseg {

/// Horizontal pixel run, [begin, end) on one row.
struct RleRun {
	int row = 0;
	int begin = 0;
	int end = 0;
};

/// One 2D instance mask in one image. globalIndex is unique across all views,
/// assigned in (image_id, in-image id) order after confidence filtering.
struct LocalMask {
	int globalIndex = -1;
	int imageId = 0;
	int inImageId = 0;
	double probability = 0.0;
	std::vector<RleRun> region;

	std::int64_t pixelCount() const {
		std::int64_t n = 0;
		for (const RleRun& r : region) n += r.end - r.begin;
		return n;
	}
};

/// Per-image grid of local-mask global indices; -1 = background.
class MaskLabelImage {
public:
	MaskLabelImage() = default;
	MaskLabelImage(int imageId, int width, int height)
	    : imageId_(imageId), width_(width), height_(height),
	      labels_(static_cast<std::size_t>(width) * height, -1) {}

	int imageId() const { return imageId_; }
	int width() const { return width_; }
	int height() const { return height_; }
	bool empty() const { return labels_.empty(); }
	std::int32_t at(int x, int y) const {
		return labels_[static_cast<std::size_t>(y) * width_ + x];
	}
	std::int32_t& at(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
	const std::vector<std::int32_t>& data() const { return labels_; }

private:
	int imageId_ = 0;
	int width_ = 0;
	int height_ = 0;
	std::vector<std::int32_t> labels_;
};

/// Result of reading a mask directory.
struct MaskCollection {
	std::vector<LocalMask> masks;             // ascending globalIndex
	std::vector<MaskLabelImage> labelImages;  // ascending image id, one per png
	std::int64_t discardedLowConfidence = 0;
};

/// Reads masks/<image_id>.png (16-bit labels; 0 = background, k = in-image
/// mask k-1) with sidecar masks/<image_id>.json ([{"id": k, "prob": p}]).
/// Masks with probability < minProb are discarded; label images reference the
/// surviving masks by global index. Throws on missing sidecars, probabilities
/// outside [0, 1], or label values without a sidecar entry.
MaskCollection loadMasks(const std::string& dir, double minProb = 0.7);

/// Per-mask triangle sets plus the inverse triangle -> masks map.
struct MaskTriangleSets {
	std::vector<TriangleSet> sets;  // S_i, indexed by mask globalIndex
	std::vector<std::vector<std::pair<int, std::int32_t>>>
	    triangleMasks;  // per triangle: (image id, mask global index)

	std::int64_t inverseSize() const {
		std::int64_t n = 0;
		for (const auto& l : triangleMasks) n += static_cast<std::int64_t>(l.size());
		return n;
	}
};

/// Projects each triangle centroid into every view; a visible centroid whose
/// containing pixel carries mask i adds the triangle to S_i. cameras, depths
/// and labels are aligned; label images may be empty placeholders.
MaskTriangleSets liftMasks(const TriMesh& mesh, std::span<const CameraView> cameras,
                           std::span<const DepthMap> depths,
                           std::span<const MaskLabelImage> labels, int maskCount);

/// masksets.bin: u32 mask count, then per mask u32 length + u32 triangle ids.
void writeMaskSets(const std::string& path, const MaskTriangleSets& sets);
std::vector<std::vector<std::int32_t>> readMaskSets(const std::string& path);

}  // namespace mvsseg

#pragma once

#include "mvsseg/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mvsseg {

/// Result of projecting a world point. u/v are continuous pixel coordinates
/// (origin at the top-left corner, pixel centers at integer + 0.5), depth is
/// the camera-frame z. behindCamera marks z <= kNearPlane.
struct PixelProjection {
	double u = 0.0;
	double v = 0.0;
	double depth = 0.0;
	bool behindCamera = false;
};

/// Calibrated pinhole view. rotation maps world to camera coordinates, the
/// camera looks down +z, translation is expressed in the camera frame.
struct CameraView {
	static constexpr double kNearPlane = 1e-6;

	int imageId = 0;
	int width = 0;
	int height = 0;
	double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
	Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
	Vec3 translation = Vec3::Zero();

	Vec3 worldToCamera(const Vec3& p) const { return rotation * p + translation; }
	Vec3 cameraToWorld(const Vec3& c) const { return rotation.transpose() * (c - translation); }

	PixelProjection project(const Vec3& p) const {
		Vec3 c = worldToCamera(p);
		PixelProjection out;
		out.depth = c.z();
		if (c.z() <= kNearPlane) {
			out.behindCamera = true;
			return out;
		}
		out.u = fx * c.x() / c.z() + cx;
		out.v = fy * c.y() / c.z() + cy;
		return out;
	}

	/// World-space point at camera depth z along the ray through pixel center
	/// (x + 0.5, y + 0.5).
	Vec3 pixelRayPoint(double u, double v, double z) const {
		Vec3 cam((u - cx) / fx * z, (v - cy) / fy * z, z);
		return cameraToWorld(cam);
	}

	bool rotationOrthonormal(double tol = 1e-6) const {
		Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
		return err.cwiseAbs().maxCoeff() <= tol;
	}
};

/// Per-pixel camera-frame z of the nearest surface; +inf where nothing
/// projects.
class DepthMap {
public:
	DepthMap() = default;
	DepthMap(int imageId, int width, int height)
	    : imageId_(imageId), width_(width), height_(height),
	      depth_(static_cast<std::size_t>(width) * height,
	             std::numeric_limits<float>::infinity()) {}

	int imageId() const { return imageId_; }
	int width() const { return width_; }
	int height() const { return height_; }
	float at(int x, int y) const { return depth_[static_cast<std::size_t>(y) * width_ + x]; }
	float& at(int x, int y) { return depth_[static_cast<std::size_t>(y) * width_ + x]; }
	const std::vector<float>& data() const { return depth_; }
	std::vector<float>& data() { return depth_; }

private:
	int imageId_ = 0;
	int width_ = 0;
	int height_ = 0;
	std::vector<float> depth_;
};

/// Min-max normalized world height of the nearest surface per pixel, in
/// [0, 1]; -1 marks background. Normalization is per image; a degenerate
/// range (max - min < 1e-6) maps covered pixels to 0.
class HeightMap {
public:
	HeightMap() = default;
	HeightMap(int imageId, int width, int height)
	    : imageId_(imageId), width_(width), height_(height),
	      value_(static_cast<std::size_t>(width) * height, -1.0f) {}

	int imageId() const { return imageId_; }
	int width() const { return width_; }
	int height() const { return height_; }
	float at(int x, int y) const { return value_[static_cast<std::size_t>(y) * width_ + x]; }
	float& at(int x, int y) { return value_[static_cast<std::size_t>(y) * width_ + x]; }
	const std::vector<float>& data() const { return value_; }
	std::vector<float>& data() { return value_; }
	double rawMin() const { return rawMin_; }
	double rawMax() const { return rawMax_; }
	void setRawRange(double lo, double hi) { rawMin_ = lo; rawMax_ = hi; }

private:
	int imageId_ = 0;
	int width_ = 0;
	int height_ = 0;
	std::vector<float> value_;
	double rawMin_ = 0.0;
	double rawMax_ = 0.0;
};

/// Perspective-correct z-buffer rasterization at pixel centers. Back faces
/// are kept; depth ties resolve to the lower triangle index. A single call is
/// single-threaded.
DepthMap renderDepth(const TriMesh& mesh, const CameraView& view);

/// renderDepth plus the per-pixel nearest triangle index (-1 where empty).
std::pair<DepthMap, std::vector<std::int32_t>> renderDepthWithIds(const TriMesh& mesh,
                                                                  const CameraView& view);

HeightMap renderHeightmap(const TriMesh& mesh, const CameraView& view);

/// Occlusion test against a rendered depth map: in-frame, in front of the
/// camera, and no nearer surface at the containing pixel (relative bias 3e-3
/// plus 1e-3 m absolute; the relative part admits the depth slope across a
/// pixel on surfaces seen at a steep angle).
bool visible(const CameraView& view, const DepthMap& depth, const Vec3& point);

/// cameras.json: top-level array of {image_id, width, height, fx, fy, cx,
/// cy, R (row-major 9), t (3)}. Loading validates rotation orthonormality.
std::vector<CameraView> loadCameras(const std::string& path);
void saveCameras(const std::string& path, std::span<const CameraView> views);

/// Debug dumps: 16-byte header (magic "DMAP"/"HMAP", u32 width, u32 height,
/// u32 reserved) followed by the row-major float32 grid.
void writeDepthMapFile(const std::string& path, const DepthMap& map);
DepthMap readDepthMapFile(const std::string& path, int imageId = 0);
void writeHeightMapFile(const std::string& path, const HeightMap& map);
HeightMap readHeightMapFile(const std::string& path, int imageId = 0);

/// Writes a 16-bit RGBA PNG whose alpha channel is the height map (height 0..1
/// scaled to 0..65535, background 0) and whose RGB comes from an existing
/// color image of identical size.
void writeRgbh(const std::string& rgbPngPath, const HeightMap& height,
               const std::string& outPngPath);

}  // namespace mvsseg

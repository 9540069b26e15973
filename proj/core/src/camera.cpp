#include "mvsseg/camera.hpp"

#include "mvsseg/png_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mvsseg {

namespace {

constexpr double kDepthBiasRel = 3e-3;
constexpr double kDepthBiasAbs = 1e-3;  // meters

struct ClipVertex {
	Vec3 cam;
	double worldZ;
};

// Clips a camera-space triangle against z >= near. Returns up to 4 vertices.
int clipNear(const ClipVertex in[3], double near, ClipVertex out[4]) {
	int n = 0;
	for (int i = 0; i < 3; ++i) {
		const ClipVertex& a = in[i];
		const ClipVertex& b = in[(i + 1) % 3];
		bool aIn = a.cam.z() >= near;
		bool bIn = b.cam.z() >= near;
		if (aIn) out[n++] = a;
		if (aIn != bIn) {
			double t = (near - a.cam.z()) / (b.cam.z() - a.cam.z());
			out[n].cam = a.cam + t * (b.cam - a.cam);
			out[n].worldZ = a.worldZ + t * (b.worldZ - a.worldZ);
			++n;
		}
	}
	return n;
}

struct RasterTargets {
	DepthMap* depth = nullptr;
	std::int32_t* triangleId = nullptr;  // optional
	float* worldZ = nullptr;             // optional
};

void rasterize(const TriMesh& mesh, const CameraView& view, RasterTargets targets) {
	if (view.width <= 0 || view.height <= 0)
		throw std::invalid_argument("render: camera with empty image plane");
	DepthMap& depth = *targets.depth;

	const double near = CameraView::kNearPlane;
	for (std::int32_t t = 0; t < mesh.triangleCount(); ++t) {
		const auto& tri = mesh.triangle(t);
		ClipVertex cv[3];
		bool allBehind = true;
		for (int k = 0; k < 3; ++k) {
			const Vec3& w = mesh.vertex(tri[k]);
			cv[k].cam = view.worldToCamera(w);
			cv[k].worldZ = w.z();
			if (cv[k].cam.z() >= near) allBehind = false;
		}
		if (allBehind) continue;

		ClipVertex poly[4];
		int n = clipNear(cv, near, poly);
		if (n < 3) continue;

		double su[4], sv[4], sz[4], wz[4];
		for (int k = 0; k < n; ++k) {
			double z = poly[k].cam.z();
			su[k] = view.fx * poly[k].cam.x() / z + view.cx;
			sv[k] = view.fy * poly[k].cam.y() / z + view.cy;
			sz[k] = z;
			wz[k] = poly[k].worldZ;
		}

		for (int f = 2; f < n; ++f) {
			const int i0 = 0, i1 = f - 1, i2 = f;
			double denom = (su[i1] - su[i0]) * (sv[i2] - sv[i0]) -
			               (sv[i1] - sv[i0]) * (su[i2] - su[i0]);
			if (std::abs(denom) < 1e-12) continue;  // degenerate in screen space

			double minU = std::min({su[i0], su[i1], su[i2]});
			double maxU = std::max({su[i0], su[i1], su[i2]});
			double minV = std::min({sv[i0], sv[i1], sv[i2]});
			double maxV = std::max({sv[i0], sv[i1], sv[i2]});
			int x0 = std::max(0, static_cast<int>(std::ceil(minU - 0.5)));
			int x1 = std::min(view.width - 1, static_cast<int>(std::floor(maxU - 0.5)));
			int y0 = std::max(0, static_cast<int>(std::ceil(minV - 0.5)));
			int y1 = std::min(view.height - 1, static_cast<int>(std::floor(maxV - 0.5)));
			if (x0 > x1 || y0 > y1) continue;

			double invZ0 = 1.0 / sz[i0], invZ1 = 1.0 / sz[i1], invZ2 = 1.0 / sz[i2];
			double a0 = wz[i0] * invZ0, a1 = wz[i1] * invZ1, a2 = wz[i2] * invZ2;

			for (int y = y0; y <= y1; ++y) {
				double py = y + 0.5;
				for (int x = x0; x <= x1; ++x) {
					double px = x + 0.5;
					double e0 = (su[i2] - su[i1]) * (py - sv[i1]) - (sv[i2] - sv[i1]) * (px - su[i1]);
					double e1 = (su[i0] - su[i2]) * (py - sv[i2]) - (sv[i0] - sv[i2]) * (px - su[i2]);
					double e2 = (su[i1] - su[i0]) * (py - sv[i0]) - (sv[i1] - sv[i0]) * (px - su[i0]);
					// Inclusive on edges, winding-agnostic: no back-face culling.
					bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
					if (!inside) continue;
					double l0 = e0 / denom, l1 = e1 / denom, l2 = e2 / denom;
					double invZ = l0 * invZ0 + l1 * invZ1 + l2 * invZ2;
					if (invZ <= 0) continue;
					float d = static_cast<float>(1.0 / invZ);
					float& slot = depth.at(x, y);
					// Strict < with ascending triangle order keeps the lower
					// index on exact depth ties.
					if (d < slot) {
						slot = d;
						std::size_t idx = static_cast<std::size_t>(y) * view.width + x;
						if (targets.triangleId) targets.triangleId[idx] = t;
						if (targets.worldZ)
							targets.worldZ[idx] =
							    static_cast<float>((l0 * a0 + l1 * a1 + l2 * a2) / invZ);
					}
				}
			}
		}
	}
}

}  // namespace

DepthMap renderDepth(const TriMesh& mesh, const CameraView& view) {
	DepthMap depth(view.imageId, view.width, view.height);
	RasterTargets targets;
	targets.depth = &depth;
	rasterize(mesh, view, targets);
	return depth;
}

std::pair<DepthMap, std::vector<std::int32_t>> renderDepthWithIds(const TriMesh& mesh,
                                                                  const CameraView& view) {
	DepthMap depth(view.imageId, view.width, view.height);
	std::vector<std::int32_t> ids(static_cast<std::size_t>(view.width) * view.height, -1);
	RasterTargets targets;
	targets.depth = &depth;
	targets.triangleId = ids.data();
	rasterize(mesh, view, targets);
	return {std::move(depth), std::move(ids)};
}

HeightMap renderHeightmap(const TriMesh& mesh, const CameraView& view) {
	DepthMap depth(view.imageId, view.width, view.height);
	std::vector<std::int32_t> ids(static_cast<std::size_t>(view.width) * view.height, -1);
	std::vector<float> worldZ(ids.size(), 0.0f);
	RasterTargets targets;
	targets.depth = &depth;
	targets.triangleId = ids.data();
	targets.worldZ = worldZ.data();
	rasterize(mesh, view, targets);

	HeightMap out(view.imageId, view.width, view.height);
	double lo = std::numeric_limits<double>::infinity();
	double hi = -std::numeric_limits<double>::infinity();
	for (std::size_t i = 0; i < ids.size(); ++i) {
		if (ids[i] < 0) continue;
		lo = std::min(lo, static_cast<double>(worldZ[i]));
		hi = std::max(hi, static_cast<double>(worldZ[i]));
	}
	if (!(lo <= hi)) {  // nothing covered
		out.setRawRange(0.0, 0.0);
		return out;
	}
	out.setRawRange(lo, hi);
	double range = hi - lo;
	for (std::size_t i = 0; i < ids.size(); ++i) {
		if (ids[i] < 0) continue;
		out.data()[i] = range < 1e-6
		                    ? 0.0f
		                    : static_cast<float>((worldZ[i] - lo) / range);
	}
	return out;
}

bool visible(const CameraView& view, const DepthMap& depth, const Vec3& point) {
	PixelProjection p = view.project(point);
	if (p.behindCamera) return false;
	int px = static_cast<int>(std::floor(p.u));
	int py = static_cast<int>(std::floor(p.v));
	if (px < 0 || py < 0 || px >= depth.width() || py >= depth.height()) return false;
	double stored = depth.at(px, py);
	return p.depth <= stored * (1.0 + kDepthBiasRel) + kDepthBiasAbs;
}

// ---------------------------------------------------------------------------
// Camera JSON and map dumps

std::vector<CameraView> loadCameras(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw std::runtime_error("cameras: cannot open " + path);
	nlohmann::json doc;
	try {
		doc = nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception& e) {
		throw std::runtime_error("cameras: " + path + ": " + e.what());
	}
	if (!doc.is_array()) throw std::runtime_error("cameras: top-level JSON array expected");

	std::vector<CameraView> views;
	views.reserve(doc.size());
	for (const auto& entry : doc) {
		CameraView v;
		try {
			v.imageId = entry.at("image_id").get<int>();
			v.width = entry.at("width").get<int>();
			v.height = entry.at("height").get<int>();
			v.fx = entry.at("fx").get<double>();
			v.fy = entry.at("fy").get<double>();
			v.cx = entry.at("cx").get<double>();
			v.cy = entry.at("cy").get<double>();
			const auto& r = entry.at("R");
			const auto& t = entry.at("t");
			if (r.size() != 9 || t.size() != 3)
				throw std::runtime_error("R must have 9 entries and t 3");
			for (int i = 0; i < 3; ++i)
				for (int j = 0; j < 3; ++j) v.rotation(i, j) = r[3 * i + j].get<double>();
			for (int i = 0; i < 3; ++i) v.translation[i] = t[i].get<double>();
		} catch (const nlohmann::json::exception& e) {
			throw std::runtime_error("cameras: malformed entry in " + path + ": " + e.what());
		}
		if (v.width <= 0 || v.height <= 0)
			throw std::runtime_error("cameras: non-positive image size");
		if (!v.rotationOrthonormal())
			throw std::runtime_error("cameras: rotation of image " + std::to_string(v.imageId) +
			                         " is not orthonormal");
		views.push_back(v);
	}
	return views;
}

void saveCameras(const std::string& path, std::span<const CameraView> views) {
	nlohmann::json doc = nlohmann::json::array();
	for (const CameraView& v : views) {
		nlohmann::json r = nlohmann::json::array();
		for (int i = 0; i < 3; ++i)
			for (int j = 0; j < 3; ++j) r.push_back(v.rotation(i, j));
		doc.push_back({{"image_id", v.imageId},
		               {"width", v.width},
		               {"height", v.height},
		               {"fx", v.fx},
		               {"fy", v.fy},
		               {"cx", v.cx},
		               {"cy", v.cy},
		               {"R", r},
		               {"t", {v.translation.x(), v.translation.y(), v.translation.z()}}});
	}
	std::ofstream out(path);
	if (!out) throw std::runtime_error("cameras: cannot open " + path + " for writing");
	out << doc.dump(1) << "\n";
}

namespace {

void writeGridFile(const std::string& path, const char magic[4], int width, int height,
                   const std::vector<float>& grid) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw std::runtime_error("grid dump: cannot open " + path + " for writing");
	std::uint32_t header[3] = {static_cast<std::uint32_t>(width),
	                           static_cast<std::uint32_t>(height), 0u};
	out.write(magic, 4);
	out.write(reinterpret_cast<const char*>(header), sizeof(header));
	out.write(reinterpret_cast<const char*>(grid.data()),
	          static_cast<std::streamsize>(grid.size() * sizeof(float)));
	if (!out) throw std::runtime_error("grid dump: write failed for " + path);
}

std::vector<float> readGridFile(const std::string& path, const char magic[4], int& width,
                                int& height) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw std::runtime_error("grid dump: cannot open " + path);
	char m[4];
	std::uint32_t header[3];
	in.read(m, 4);
	in.read(reinterpret_cast<char*>(header), sizeof(header));
	if (!in || std::memcmp(m, magic, 4) != 0)
		throw std::runtime_error("grid dump: bad magic in " + path);
	width = static_cast<int>(header[0]);
	height = static_cast<int>(header[1]);
	std::vector<float> grid(static_cast<std::size_t>(width) * height);
	in.read(reinterpret_cast<char*>(grid.data()),
	        static_cast<std::streamsize>(grid.size() * sizeof(float)));
	if (!in) throw std::runtime_error("grid dump: truncated file " + path);
	return grid;
}

}  // namespace

void writeDepthMapFile(const std::string& path, const DepthMap& map) {
	writeGridFile(path, "DMAP", map.width(), map.height(), map.data());
}

DepthMap readDepthMapFile(const std::string& path, int imageId) {
	int w = 0, h = 0;
	std::vector<float> grid = readGridFile(path, "DMAP", w, h);
	DepthMap map(imageId, w, h);
	map.data() = std::move(grid);
	return map;
}

void writeHeightMapFile(const std::string& path, const HeightMap& map) {
	writeGridFile(path, "HMAP", map.width(), map.height(), map.data());
}

HeightMap readHeightMapFile(const std::string& path, int imageId) {
	int w = 0, h = 0;
	std::vector<float> grid = readGridFile(path, "HMAP", w, h);
	HeightMap map(imageId, w, h);
	map.data() = std::move(grid);
	return map;
}

void writeRgbh(const std::string& rgbPngPath, const HeightMap& height,
               const std::string& outPngPath) {
	ImageU16 rgb = readPng(rgbPngPath);
	if (rgb.width != height.width() || rgb.height != height.height())
		throw std::runtime_error("rgbh: color image size does not match height map");

	const std::size_t n = static_cast<std::size_t>(rgb.width) * rgb.height;
	std::vector<std::uint16_t> out(n * 4);
	const int scale = rgb.bitDepth == 8 ? 257 : 1;
	for (std::size_t i = 0; i < n; ++i) {
		std::uint16_t r, g, b;
		if (rgb.channels >= 3) {
			r = rgb.samples[i * rgb.channels + 0];
			g = rgb.samples[i * rgb.channels + 1];
			b = rgb.samples[i * rgb.channels + 2];
		} else {
			r = g = b = rgb.samples[i * rgb.channels];
		}
		float h = height.data()[i];
		out[i * 4 + 0] = static_cast<std::uint16_t>(r * scale);
		out[i * 4 + 1] = static_cast<std::uint16_t>(g * scale);
		out[i * 4 + 2] = static_cast<std::uint16_t>(b * scale);
		out[i * 4 + 3] = h < 0.0f ? 0
		                          : static_cast<std::uint16_t>(
		                                std::lround(std::min(1.0f, h) * 65535.0f));
	}
	writePngRgba16(outPngPath, rgb.width, rgb.height, out);
}

}  // namespace mvsseg

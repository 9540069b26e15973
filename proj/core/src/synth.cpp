#include "mvsseg/synth.hpp"

#include "mvsseg/parallel.hpp"
#include "mvsseg/png_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mvsseg {

namespace {

constexpr double kEave = 0.8;      // eave overhang inset and drop (m)
constexpr double kGrid = 1.0;      // quad subdivision pitch (m)
constexpr double kGroundCell = 2.0;
constexpr double kClearance = 3.0;  // minimum gap between placement circles

std::uint64_t splitmix64(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ull;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
	return x ^ (x >> 31);
}

double unitReal(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

double uniformIn(std::mt19937_64& g, double lo, double hi) {
	return lo + (hi - lo) * unitReal(g);
}

// Endpoint-exact lerp: t = 0 returns exactly a, t = 1 exactly b. Shared
// edges between separately emitted patches rely on this for bitwise-equal
// vertex positions, which the quantizing deduplicator then merges.
Vec3 lerp3(const Vec3& a, const Vec3& b, double t) { return a * (1.0 - t) + b * t; }

Vec3 at3(const Vec2& p, double z) { return Vec3(p.x(), p.y(), z); }

int subdiv(double len, double pitch = kGrid) {
	return std::max(1, static_cast<int>(std::ceil(len / pitch - 1e-9)));
}

struct VertexKeyHash {
	std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
		std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k[0]));
		h = splitmix64(h ^ static_cast<std::uint64_t>(k[1]));
		h = splitmix64(h ^ static_cast<std::uint64_t>(k[2]));
		return static_cast<std::size_t>(h);
	}
};

/// Accumulates triangles with 0.1 mm vertex deduplication and per-triangle
/// GT labels. Degenerate triangles are skipped at emission so the indices
/// stay aligned with TriMesh::build.
class SceneBuilder {
public:
	std::int32_t vertexAt(const Vec3& p) {
		std::array<std::int64_t, 3> key{std::llround(p.x() * 1e4), std::llround(p.y() * 1e4),
		                                std::llround(p.z() * 1e4)};
		auto [it, inserted] = lookup_.try_emplace(key, static_cast<std::int32_t>(vertices_.size()));
		if (inserted) vertices_.push_back(p);
		return it->second;
	}

	void tri(const Vec3& a, const Vec3& b, const Vec3& c, std::int32_t buildingId,
	         std::int32_t roofId) {
		if (0.5 * (b - a).cross(c - a).norm() < 1e-10) return;
		triangles_.push_back({vertexAt(a), vertexAt(b), vertexAt(c)});
		buildingIds_.push_back(buildingId);
		roofIds_.push_back(roofId);
	}

	void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, std::int32_t buildingId,
	          std::int32_t roofId) {
		tri(a, b, c, buildingId, roofId);
		tri(a, c, d, buildingId, roofId);
	}

	/// Bilinear patch, bottom edge A->B and top edge D->C, nu x nv cells.
	void grid(const Vec3& A, const Vec3& B, const Vec3& C, const Vec3& D, int nu, int nv,
	          std::int32_t buildingId, std::int32_t roofId) {
		auto point = [&](int i, int j) {
			double s = static_cast<double>(i) / nu;
			double t = static_cast<double>(j) / nv;
			return lerp3(lerp3(A, B, s), lerp3(D, C, s), t);
		};
		for (int j = 0; j < nv; ++j)
			for (int i = 0; i < nu; ++i)
				quad(point(i, j), point(i + 1, j), point(i + 1, j + 1), point(i, j + 1), buildingId,
				     roofId);
	}

	void strip(const std::vector<Vec3>& inner, const std::vector<Vec3>& outer,
	           std::int32_t buildingId, std::int32_t roofId) {
		std::size_t n = inner.size();
		for (std::size_t k = 0; k < n; ++k) {
			std::size_t next = (k + 1) % n;
			quad(inner[k], inner[next], outer[next], outer[k], buildingId, roofId);
		}
	}

	std::size_t triangleCount() const { return triangles_.size(); }

	void finish(SynthScene& scene) {
		scene.mesh = TriMesh::build(std::move(vertices_), std::move(triangles_));
		if (static_cast<std::size_t>(scene.mesh.triangleCount()) != buildingIds_.size())
			throw std::runtime_error("synth: degenerate triangle slipped through the builder");
		scene.gtBuildingIds = std::move(buildingIds_);
		scene.gtRoofIds = std::move(roofIds_);
	}

private:
	std::unordered_map<std::array<std::int64_t, 3>, std::int32_t, VertexKeyHash> lookup_;
	std::vector<Vec3> vertices_;
	std::vector<std::array<std::int32_t, 3>> triangles_;
	std::vector<std::int32_t> buildingIds_;
	std::vector<std::int32_t> roofIds_;
};

enum class SideKind { Overhang, FlushTall, FlushShort };

struct SideSpec {
	SideKind kind = SideKind::Overhang;
	double neighborTop = 0.0;      // FlushTall: partner roof height
	std::int32_t neighborId = -1;  // FlushTall: partner building id
};

struct BuildingSpec {
	std::array<Vec2, 4> corner;  // outer rect, CCW from (-hw,-hl)
	double h = 0.0;              // roof edge height
	bool hip = false;
	double ridgeInset = 0.0;
	double ridgeRise = 0.0;
	std::int32_t id = 0;
	std::array<SideSpec, 4> side;
};

// Canonical traversal direction per side; chosen so every boundary edge is
// parameterized the same way by the roof patch and by the wall/ring patches
// that share it.
constexpr int kSideA[4] = {0, 1, 3, 0};
constexpr int kSideB[4] = {1, 2, 2, 3};

void emitHipRoof(SceneBuilder& b, const BuildingSpec& s) {
	const auto& c = s.corner;
	double wlen = (c[1] - c[0]).norm();
	double llen = (c[3] - c[0]).norm();
	Vec2 mid = (c[0] + c[1] + c[2] + c[3]) / 4.0;
	double zr = s.h + s.ridgeRise;

	std::array<Vec2, 4> top;  // ridge counterpart of each face's D/C corner
	if (wlen >= llen) {
		Vec2 dir = (c[1] - c[0]).normalized();
		double half = wlen / 2.0 - s.ridgeInset;
		Vec2 r0 = mid - dir * half, r1 = mid + dir * half;
		// faces, indexed by side: D corner / C corner ridge points
		std::array<std::pair<Vec2, Vec2>, 4> dc = {
		    std::pair{r0, r1}, {r1, r1}, {r0, r1}, {r0, r0}};
		double maxSlant = 0.0;
		for (int k = 0; k < 4; ++k)
			maxSlant = std::max(maxSlant,
			                    (at3(dc[k].first, zr) - at3(c[kSideA[k]], s.h)).norm());
		int nv = subdiv(maxSlant);
		for (int k = 0; k < 4; ++k) {
			const Vec2& A = c[kSideA[k]];
			const Vec2& B = c[kSideB[k]];
			b.grid(at3(A, s.h), at3(B, s.h), at3(dc[k].second, zr), at3(dc[k].first, zr),
			       subdiv((B - A).norm()), nv, s.id, s.id);
		}
	} else {
		Vec2 dir = (c[3] - c[0]).normalized();
		double half = llen / 2.0 - s.ridgeInset;
		Vec2 ra = mid - dir * half, rb = mid + dir * half;
		std::array<std::pair<Vec2, Vec2>, 4> dc = {
		    std::pair{ra, ra}, {ra, rb}, {rb, rb}, {ra, rb}};
		double maxSlant = 0.0;
		for (int k = 0; k < 4; ++k)
			maxSlant = std::max(maxSlant,
			                    (at3(dc[k].first, zr) - at3(c[kSideA[k]], s.h)).norm());
		int nv = subdiv(maxSlant);
		for (int k = 0; k < 4; ++k) {
			const Vec2& A = c[kSideA[k]];
			const Vec2& B = c[kSideB[k]];
			b.grid(at3(A, s.h), at3(B, s.h), at3(dc[k].second, zr), at3(dc[k].first, zr),
			       subdiv((B - A).norm()), nv, s.id, s.id);
		}
	}
}

void emitBuilding(SceneBuilder& b, const BuildingSpec& s) {
	const auto& c = s.corner;
	Vec2 u = (c[1] - c[0]).normalized();
	Vec2 v = (c[3] - c[0]).normalized();
	std::array<Vec2, 4> inward = {v, -u, -v, u};

	std::array<double, 4> inset;
	for (int k = 0; k < 4; ++k)
		inset[k] = s.side[k].kind == SideKind::Overhang ? kEave : 0.0;
	std::array<Vec2, 4> wall;
	for (int k = 0; k < 4; ++k) {
		int prev = (k + 3) % 4;
		wall[k] = c[k] + inward[prev] * inset[prev] + inward[k] * inset[k];
	}

	double top = s.h - kEave;
	for (int k = 0; k < 4; ++k) {
		const Vec2& A = c[kSideA[k]];
		const Vec2& B = c[kSideB[k]];
		const Vec2& WA = wall[kSideA[k]];
		const Vec2& WB = wall[kSideB[k]];
		int nu = subdiv((B - A).norm());
		switch (s.side[k].kind) {
		case SideKind::Overhang:
			b.grid(at3(WA, 0.0), at3(WB, 0.0), at3(WB, top), at3(WA, top), nu, subdiv(top), s.id,
			       -1);
			b.grid(at3(WA, top), at3(WB, top), at3(B, s.h), at3(A, s.h), nu, 1, s.id, -1);
			break;
		case SideKind::FlushTall: {
			// Party wall spans the full shared segment above the partner's
			// roof; its bottom row duplicates the partner roof edge bitwise
			// so the pair shares vertices there.
			double lo = s.side[k].neighborTop;
			std::int32_t shared = std::min(s.id, s.side[k].neighborId);
			b.grid(at3(A, lo), at3(B, lo), at3(B, top), at3(A, top), nu, subdiv(top - lo), shared,
			       -1);
			b.grid(at3(A, top), at3(B, top), at3(B, s.h), at3(A, s.h), nu, 1, s.id, -1);
			break;
		}
		case SideKind::FlushShort:
			break;
		}
	}

	if (s.hip) {
		emitHipRoof(b, s);
	} else {
		b.grid(at3(c[0], s.h), at3(c[1], s.h), at3(c[2], s.h), at3(c[3], s.h),
		       subdiv((c[1] - c[0]).norm()), subdiv((c[3] - c[0]).norm()), s.id, s.id);
	}
}

struct Obb {
	Vec2 center, u, v;
	double hu = 0.0, hv = 0.0;
};

Obb obbOf(const BuildingSpec& s) {
	Obb o;
	o.center = (s.corner[0] + s.corner[2]) / 2.0;
	o.u = (s.corner[1] - s.corner[0]).normalized();
	o.v = (s.corner[3] - s.corner[0]).normalized();
	o.hu = (s.corner[1] - s.corner[0]).norm() / 2.0;
	o.hv = (s.corner[3] - s.corner[0]).norm() / 2.0;
	return o;
}

bool cellHitsObb(const Vec2& lo, const Vec2& hi, const Obb& o) {
	std::array<Vec2, 4> axes = {Vec2(1, 0), Vec2(0, 1), o.u, o.v};
	std::array<Vec2, 4> cell = {lo, Vec2(hi.x(), lo.y()), hi, Vec2(lo.x(), hi.y())};
	for (const Vec2& a : axes) {
		double cMin = cell[0].dot(a), cMax = cMin;
		for (int k = 1; k < 4; ++k) {
			double p = cell[k].dot(a);
			cMin = std::min(cMin, p);
			cMax = std::max(cMax, p);
		}
		double center = o.center.dot(a);
		double r = o.hu * std::abs(o.u.dot(a)) + o.hv * std::abs(o.v.dot(a));
		if (cMax < center - r || cMin > center + r) return false;
	}
	return true;
}

CameraView makeView(int imageId, const Vec3& center, double hx, double hy, double sinPitch,
                    double cosPitch, const SynthConfig& cfg) {
	CameraView view;
	view.imageId = imageId;
	view.width = cfg.imageWidth;
	view.height = cfg.imageHeight;
	view.fx = view.fy = cfg.focalLength;
	view.cx = cfg.imageWidth / 2.0;
	view.cy = cfg.imageHeight / 2.0;
	Vec3 f(hx * cosPitch, hy * cosPitch, -sinPitch);
	Vec3 r(hy, -hx, 0.0);
	Vec3 d = f.cross(r);
	view.rotation.row(0) = r;
	view.rotation.row(1) = d;
	view.rotation.row(2) = f;
	view.translation = -(view.rotation * center);
	return view;
}

void renderGtMasks(SynthScene& scene, const SynthConfig& cfg) {
	scene.masks.resize(scene.cameras.size());
	parallelFor(static_cast<std::int64_t>(scene.cameras.size()), [&](std::int64_t vi) {
		const CameraView& cam = scene.cameras[vi];
		auto [depth, ids] = renderDepthWithIds(scene.mesh, cam);
		(void)depth;

		std::map<std::int32_t, std::int64_t> hits;
		for (std::int32_t t : ids)
			if (t >= 0 && scene.gtRoofIds[t] >= 0) ++hits[scene.gtRoofIds[t]];

		std::map<std::int32_t, std::int32_t> local;
		ViewMasks vm;
		for (const auto& [roof, count] : hits) {
			if (count < cfg.minMaskPixels) continue;
			local[roof] = static_cast<std::int32_t>(vm.probabilities.size());
			vm.probabilities.push_back(1.0);
			vm.sources.push_back({roof});
		}

		vm.labels = MaskLabelImage(cam.imageId, cam.width, cam.height);
		for (int y = 0; y < cam.height; ++y)
			for (int x = 0; x < cam.width; ++x) {
				std::int32_t t = ids[static_cast<std::size_t>(y) * cam.width + x];
				if (t < 0 || scene.gtRoofIds[t] < 0) continue;
				auto it = local.find(scene.gtRoofIds[t]);
				if (it != local.end()) vm.labels.at(x, y) = it->second;
			}
		scene.masks[vi] = std::move(vm);
	});
}

}  // namespace

SynthScene generateScene(const SynthConfig& cfg) {
	if (cfg.buildingCount < 1) throw std::invalid_argument("synth: building count must be >= 1");
	if (cfg.attachedFraction < 0.0 || cfg.attachedFraction > 1.0)
		throw std::invalid_argument("synth: attached fraction outside [0, 1]");
	if (cfg.footprintMin < 2.0 || cfg.footprintMax < cfg.footprintMin)
		throw std::invalid_argument("synth: bad footprint range");
	if (cfg.heightMin < 1.0 || cfg.heightMax < cfg.heightMin)
		throw std::invalid_argument("synth: bad height range");
	if (cfg.groundExtent < cfg.footprintMax * 2.0)
		throw std::invalid_argument("synth: ground extent too small");
	if (cfg.imageWidth < 16 || cfg.imageHeight < 16 || cfg.focalLength <= 0.0)
		throw std::invalid_argument("synth: bad camera intrinsics");

	std::mt19937_64 rng(cfg.seed);
	auto sampleHip = [&](RoofStyle style) {
		switch (style) {
		case RoofStyle::Flat: return false;
		case RoofStyle::Gabled: return true;
		case RoofStyle::Mixed: return unitReal(rng) < 0.5;
		}
		return false;
	};
	auto ridgeParams = [](BuildingSpec& s, double hw, double hl) {
		double ri = std::min(0.7 * std::min(hw, hl), std::max(hw, hl) - 0.3);
		s.ridgeInset = std::max(ri, 0.1);
		s.ridgeRise = 0.75 * s.ridgeInset;
	};

	int attachedBuildings = static_cast<int>(std::llround(cfg.buildingCount * cfg.attachedFraction));
	attachedBuildings = std::min(attachedBuildings, cfg.buildingCount);
	attachedBuildings -= attachedBuildings % 2;
	int pairs = attachedBuildings / 2;
	int singles = cfg.buildingCount - attachedBuildings;

	std::vector<BuildingSpec> specs;
	std::vector<Obb> placed;
	struct Circle {
		Vec2 c;
		double r;
	};
	std::vector<Circle> circles;
	double E = cfg.groundExtent;
	std::int32_t nextId = 0;

	auto place = [&](double spanU, double spanV) -> std::pair<Vec2, double> {
		double radius = std::hypot(spanU / 2.0, spanV / 2.0);
		double margin = radius + 2.0;
		if (margin >= E / 2.0) throw std::runtime_error("synth: building too large for the ground");
		for (int attempt = 0; attempt < 1000; ++attempt) {
			Vec2 cc(uniformIn(rng, -E / 2.0 + margin, E / 2.0 - margin),
			        uniformIn(rng, -E / 2.0 + margin, E / 2.0 - margin));
			bool ok = true;
			for (const Circle& other : circles)
				if ((cc - other.c).norm() < radius + other.r + kClearance) {
					ok = false;
					break;
				}
			if (ok) {
				circles.push_back({cc, radius});
				return {cc, radius};
			}
		}
		throw std::runtime_error("synth: placement failed after 1000 attempts");
	};

	auto cornersAt = [](const Vec2& center, const Vec2& u, const Vec2& v, double hw, double hl) {
		return std::array<Vec2, 4>{center - u * hw - v * hl, center + u * hw - v * hl,
		                           center + u * hw + v * hl, center - u * hw + v * hl};
	};

	for (int p = 0; p < pairs; ++p) {
		double wa = uniformIn(rng, cfg.footprintMin, cfg.footprintMax);
		double l = uniformIn(rng, cfg.footprintMin, cfg.footprintMax);
		double wb = uniformIn(rng, cfg.footprintMin, cfg.footprintMax);
		double ha = uniformIn(rng, std::min(cfg.heightMin + 2.5, cfg.heightMax), cfg.heightMax);
		// Height step stays in [1.6, 3]: big enough for a party-wall strip,
		// small enough that the tall partner's shadow band in oblique views
		// cannot shed viable fragment masks of the short roof.
		double hbMax = ha - kEave - 0.8;
		double hbMin = std::clamp(ha - 3.0, cfg.heightMin, std::max(cfg.heightMin, hbMax));
		double hb = uniformIn(rng, hbMin, std::max(hbMin, hbMax));
		hb = std::min(hb, hbMax);
		bool hipA = sampleHip(cfg.roofStyle);
		bool hipB = sampleHip(cfg.roofStyle);
		double phi = uniformIn(rng, 0.0, std::numbers::pi);
		auto [cc, radius] = place(wa + wb, l);
		(void)radius;
		Vec2 u(std::cos(phi), std::sin(phi));
		Vec2 v(-std::sin(phi), std::cos(phi));
		Vec2 ca = cc - u * ((wa + wb) / 2.0 - wa / 2.0);

		BuildingSpec a;
		a.corner = cornersAt(ca, u, v, wa / 2.0, l / 2.0);
		a.h = ha;
		a.hip = hipA;
		ridgeParams(a, wa / 2.0, l / 2.0);
		a.id = nextId++;

		BuildingSpec b;
		b.h = hb;
		b.hip = hipB;
		ridgeParams(b, wb / 2.0, l / 2.0);
		b.id = nextId++;
		// Partner corners on the shared plane reuse A's exact doubles.
		Vec2 cb = ca + u * (wa / 2.0 + wb / 2.0);
		b.corner = cornersAt(cb, u, v, wb / 2.0, l / 2.0);
		b.corner[0] = a.corner[1];
		b.corner[3] = a.corner[2];

		a.side[1] = {SideKind::FlushTall, hb, b.id};
		b.side[3] = {SideKind::FlushShort, 0.0, a.id};

		specs.push_back(a);
		specs.push_back(b);
		placed.push_back(obbOf(a));
		placed.push_back(obbOf(b));
	}

	for (int k = 0; k < singles; ++k) {
		double w = uniformIn(rng, cfg.footprintMin, cfg.footprintMax);
		double l = uniformIn(rng, cfg.footprintMin, cfg.footprintMax);
		double h = uniformIn(rng, cfg.heightMin, cfg.heightMax);
		bool hip = sampleHip(cfg.roofStyle);
		double phi = uniformIn(rng, 0.0, std::numbers::pi);
		auto [cc, radius] = place(w, l);
		(void)radius;
		Vec2 u(std::cos(phi), std::sin(phi));
		Vec2 v(-std::sin(phi), std::cos(phi));
		BuildingSpec s;
		s.corner = cornersAt(cc, u, v, w / 2.0, l / 2.0);
		s.h = h;
		s.hip = hip;
		ridgeParams(s, w / 2.0, l / 2.0);
		s.id = nextId++;
		specs.push_back(s);
		placed.push_back(obbOf(s));
	}

	SceneBuilder builder;
	for (const BuildingSpec& s : specs) emitBuilding(builder, s);

	int cells = std::max(1, static_cast<int>(std::llround(E / kGroundCell)));
	double cell = E / cells;
	for (int gy = 0; gy < cells; ++gy)
		for (int gx = 0; gx < cells; ++gx) {
			Vec2 lo(-E / 2.0 + gx * cell, -E / 2.0 + gy * cell);
			Vec2 hi(lo.x() + cell, lo.y() + cell);
			bool hole = false;
			for (const Obb& o : placed)
				if (cellHitsObb(lo, hi, o)) {
					hole = true;
					break;
				}
			if (hole) continue;
			builder.quad(Vec3(lo.x(), lo.y(), 0.0), Vec3(hi.x(), lo.y(), 0.0),
			             Vec3(hi.x(), hi.y(), 0.0), Vec3(lo.x(), hi.y(), 0.0), -1, -1);
		}

	SynthScene scene;
	builder.finish(scene);

	double meanRoof = 0.0, maxTop = 0.0;
	for (const BuildingSpec& s : specs) {
		meanRoof += s.h;
		maxTop = std::max(maxTop, s.h + (s.hip ? s.ridgeRise : 0.0));
	}
	meanRoof /= static_cast<double>(specs.size());
	double alt = meanRoof + cfg.cameraAltitude;
	if (alt <= maxTop + 1.0)
		throw std::invalid_argument("synth: camera altitude does not clear the buildings");

	int nvp = std::max(1, static_cast<int>(std::floor(E / cfg.viewpointSpacing)));
	double pitchLen = E / nvp;
	const double s45 = std::sqrt(0.5);
	int imageId = 0;
	for (int iy = 0; iy < nvp; ++iy)
		for (int ix = 0; ix < nvp; ++ix) {
			double jx = (unitReal(rng) - 0.5) * pitchLen * 0.5;
			double jy = (unitReal(rng) - 0.5) * pitchLen * 0.5;
			Vec3 C(-E / 2.0 + (ix + 0.5) * pitchLen + jx, -E / 2.0 + (iy + 0.5) * pitchLen + jy,
			       alt);
			// Random heading per burst keeps frame-edge crop lines from lining
			// up across viewpoints.
			double yaw = unitReal(rng) * 2.0 * std::numbers::pi;
			double hx = std::cos(yaw), hy = std::sin(yaw);
			scene.cameras.push_back(makeView(imageId++, C, hx, hy, 1.0, 0.0, cfg));
			scene.cameras.push_back(makeView(imageId++, C, hx, hy, s45, s45, cfg));
			scene.cameras.push_back(makeView(imageId++, C, -hy, hx, s45, s45, cfg));
			scene.cameras.push_back(makeView(imageId++, C, -hx, -hy, s45, s45, cfg));
			scene.cameras.push_back(makeView(imageId++, C, hy, -hx, s45, s45, cfg));
		}

	renderGtMasks(scene, cfg);
	return scene;
}

void corruptMasks(SynthScene& scene, const CorruptionSpec& spec, std::uint64_t seed) {
	for (double p : {spec.splitProbability, spec.mergeProbability, spec.dropProbability,
	                 spec.jitterProbability})
		if (p < 0.0 || p > 1.0)
			throw std::invalid_argument("synth: corruption probability outside [0, 1]");

	parallelFor(static_cast<std::int64_t>(scene.masks.size()), [&](std::int64_t vi) {
		ViewMasks& vm = scene.masks[vi];
		if (vm.labels.empty()) return;
		int w = vm.labels.width();
		int h = vm.labels.height();
		std::mt19937_64 rng(splitmix64(
		    seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(vm.labels.imageId() + 1))));

		struct Mask {
			std::vector<std::int32_t> pixels;  // ascending y*w+x
			double prob = 1.0;
			std::vector<std::int32_t> sources;
			bool alive = true;
			int minX = 1 << 30, minY = 1 << 30, maxX = -1, maxY = -1;
		};
		std::vector<Mask> ms(vm.probabilities.size());
		for (std::size_t i = 0; i < ms.size(); ++i) {
			ms[i].prob = vm.probabilities[i];
			ms[i].sources = vm.sources[i];
		}
		for (int y = 0; y < h; ++y)
			for (int x = 0; x < w; ++x) {
				std::int32_t id = vm.labels.at(x, y);
				if (id < 0) continue;
				Mask& m = ms[id];
				m.pixels.push_back(y * w + x);
				m.minX = std::min(m.minX, x);
				m.minY = std::min(m.minY, y);
				m.maxX = std::max(m.maxX, x);
				m.maxY = std::max(m.maxY, y);
			}

		for (Mask& m : ms)
			if (unitReal(rng) < spec.dropProbability) m.alive = false;

		if (unitReal(rng) < spec.mergeProbability) {
			std::vector<std::pair<std::size_t, std::size_t>> adjacent;
			for (std::size_t i = 0; i < ms.size(); ++i) {
				if (!ms[i].alive || ms[i].pixels.empty()) continue;
				for (std::size_t j = i + 1; j < ms.size(); ++j) {
					if (!ms[j].alive || ms[j].pixels.empty()) continue;
					bool near = ms[i].minX <= ms[j].maxX + 4 && ms[j].minX <= ms[i].maxX + 4 &&
					            ms[i].minY <= ms[j].maxY + 4 && ms[j].minY <= ms[i].maxY + 4;
					if (near) adjacent.emplace_back(i, j);
				}
			}
			if (!adjacent.empty()) {
				auto [i, j] = adjacent[rng() % adjacent.size()];
				Mask& a = ms[i];
				Mask& b = ms[j];
				a.pixels.insert(a.pixels.end(), b.pixels.begin(), b.pixels.end());
				std::sort(a.pixels.begin(), a.pixels.end());
				a.prob = std::max(a.prob, b.prob);
				a.sources.insert(a.sources.end(), b.sources.begin(), b.sources.end());
				b.alive = false;
			}
		}

		std::size_t before = ms.size();
		for (std::size_t k = 0; k < before; ++k) {
			if (!ms[k].alive) continue;
			if (unitReal(rng) >= spec.splitProbability) continue;
			if (ms[k].pixels.size() < 2) continue;
			double angle = unitReal(rng) * 2.0 * std::numbers::pi;
			double q = uniformIn(rng, 0.62, 0.82);
			double ca = std::cos(angle), sa = std::sin(angle);
			std::vector<std::int32_t> px = std::move(ms[k].pixels);
			std::stable_sort(px.begin(), px.end(), [&](std::int32_t lhs, std::int32_t rhs) {
				double pl = (lhs % w) * ca + (lhs / w) * sa;
				double pr = (rhs % w) * ca + (rhs / w) * sa;
				return pl < pr;
			});
			std::size_t cut = std::clamp<std::size_t>(
			    static_cast<std::size_t>(q * static_cast<double>(px.size())), 1, px.size() - 1);
			Mask half;
			half.pixels.assign(px.begin() + static_cast<std::ptrdiff_t>(cut), px.end());
			std::sort(half.pixels.begin(), half.pixels.end());
			half.prob = ms[k].prob;
			half.sources = ms[k].sources;
			px.resize(cut);
			std::sort(px.begin(), px.end());
			ms[k].pixels = std::move(px);
			ms.push_back(std::move(half));
		}

		for (Mask& m : ms)
			if (m.alive && unitReal(rng) < spec.jitterProbability)
				m.prob = uniformIn(rng, 0.7, 1.0);

		ViewMasks out;
		out.labels = MaskLabelImage(vm.labels.imageId(), w, h);
		for (Mask& m : ms) {
			if (!m.alive || m.pixels.empty()) continue;
			std::int32_t id = static_cast<std::int32_t>(out.probabilities.size());
			out.probabilities.push_back(m.prob);
			out.sources.push_back(std::move(m.sources));
			for (std::int32_t p : m.pixels) out.labels.at(p % w, p / w) = id;
		}
		vm = std::move(out);
	});
}

void writeDataset(const std::string& dir, const SynthScene& scene, const SynthConfig& cfg) {
	namespace fs = std::filesystem;
	fs::create_directories(fs::path(dir) / "masks");

	saveLabeledPly((fs::path(dir) / "scene.ply").string(), scene.mesh, scene.gtBuildingIds);
	saveCameras((fs::path(dir) / "cameras.json").string(), scene.cameras);

	auto writeGroups = [&](const fs::path& path, const std::vector<std::int32_t>& ids) {
		std::map<std::int32_t, std::vector<std::int32_t>> groups;
		for (std::size_t t = 0; t < ids.size(); ++t)
			if (ids[t] >= 0) groups[ids[t]].push_back(static_cast<std::int32_t>(t));
		nlohmann::json arr = nlohmann::json::array();
		for (const auto& [id, tris] : groups) arr.push_back({{"id", id}, {"triangle_ids", tris}});
		std::ofstream out(path);
		if (!out) throw std::runtime_error("synth: cannot write " + path.string());
		out << arr.dump(1) << '\n';
	};
	writeGroups(fs::path(dir) / "gt.json", scene.gtBuildingIds);
	writeGroups(fs::path(dir) / "gt_roofs.json", scene.gtRoofIds);

	for (const ViewMasks& vm : scene.masks) {
		int w = vm.labels.width(), h = vm.labels.height();
		std::vector<std::uint16_t> px(static_cast<std::size_t>(w) * h, 0);
		for (int y = 0; y < h; ++y)
			for (int x = 0; x < w; ++x) {
				std::int32_t id = vm.labels.at(x, y);
				if (id >= 0) px[static_cast<std::size_t>(y) * w + x] =
				    static_cast<std::uint16_t>(id + 1);
			}
		fs::path base = fs::path(dir) / "masks" / std::to_string(vm.labels.imageId());
		writePngGray16(base.string() + ".png", w, h, px);
		nlohmann::json sidecar = nlohmann::json::array();
		for (std::size_t i = 0; i < vm.probabilities.size(); ++i)
			sidecar.push_back(
			    {{"id", static_cast<int>(i)}, {"prob", vm.probabilities[i]}});
		std::ofstream out(base.string() + ".json");
		if (!out) throw std::runtime_error("synth: cannot write mask sidecar");
		out << sidecar.dump(1) << '\n';
	}

	nlohmann::json conf = {
	    {"seed", cfg.seed},
	    {"building_count", cfg.buildingCount},
	    {"attached_fraction", cfg.attachedFraction},
	    {"footprint_min", cfg.footprintMin},
	    {"footprint_max", cfg.footprintMax},
	    {"height_min", cfg.heightMin},
	    {"height_max", cfg.heightMax},
	    {"roof_style", cfg.roofStyle == RoofStyle::Flat     ? "flat"
	                   : cfg.roofStyle == RoofStyle::Gabled ? "gabled"
	                                                        : "mixed"},
	    {"ground_extent", cfg.groundExtent},
	    {"camera_altitude", cfg.cameraAltitude},
	    {"viewpoint_spacing", cfg.viewpointSpacing},
	    {"image_width", cfg.imageWidth},
	    {"image_height", cfg.imageHeight},
	    {"focal_length", cfg.focalLength},
	    {"min_mask_pixels", cfg.minMaskPixels},
	    {"corruption",
	     {{"split", cfg.corruption.splitProbability},
	      {"merge", cfg.corruption.mergeProbability},
	      {"drop", cfg.corruption.dropProbability},
	      {"jitter", cfg.corruption.jitterProbability}}},
	};
	std::ofstream out(fs::path(dir) / "config.json");
	if (!out) throw std::runtime_error("synth: cannot write config.json");
	out << conf.dump(1) << '\n';
}

SynthScene balconyScene() {
	SceneBuilder b;
	const double hw = 4.0, hl = 3.0, h = 10.0, taper = 0.3;
	const double pitch = 0.25;
	const double hwB = hw - taper, hlB = hl - taper;  // wall bottom rect

	std::array<Vec2, 4> c = {Vec2(-hw, -hl), Vec2(hw, -hl), Vec2(hw, hl), Vec2(-hw, hl)};
	std::array<Vec2, 4> wb = {Vec2(-hwB, -hlB), Vec2(hwB, -hlB), Vec2(hwB, hlB),
	                          Vec2(-hwB, hlB)};

	std::array<int, 4> nu;
	for (int k = 0; k < 4; ++k)
		nu[k] = subdiv((c[kSideB[k]] - c[kSideA[k]]).norm(), pitch);
	int nv = subdiv(h, pitch);

	// Side 0 carries the balcony window: 6 x 4 cells starting at (12, 16).
	const int ws0 = 12, ws1 = 18, wt0 = 16, wt1 = 20;
	Vec3 A0 = at3(wb[0], 0.0), B0 = at3(wb[1], 0.0);
	Vec3 C0 = at3(c[1], h), D0 = at3(c[0], h);
	auto wallPoint = [&](double s, double t) {
		return lerp3(lerp3(A0, B0, s / nu[0]), lerp3(D0, C0, s / nu[0]), t / nv);
	};
	for (int j = 0; j < nv; ++j)
		for (int i = 0; i < nu[0]; ++i) {
			if (i >= ws0 && i < ws1 && j >= wt0 && j < wt1) continue;
			b.quad(wallPoint(i, j), wallPoint(i + 1, j), wallPoint(i + 1, j + 1),
			       wallPoint(i, j + 1), 0, -1);
		}
	for (int k = 1; k < 4; ++k)
		b.grid(at3(wb[kSideA[k]], 0.0), at3(wb[kSideB[k]], 0.0), at3(c[kSideB[k]], h),
		       at3(c[kSideA[k]], h), nu[k], nv, 0, -1);

	b.grid(at3(c[0], h), at3(c[1], h), at3(c[2], h), at3(c[3], h), nu[0], nu[1], 0, 0);

	// Balcony: window frame -> 45 degree chamfer ring -> box front.
	Vec3 out = (B0 - A0).cross(D0 - A0).normalized();
	if (out.y() > 0.0) out = -out;
	auto cycle = [&](double s0, double s1, double t0, double t1, int nsu, int nsv,
	                 const Vec3& offset) {
		std::vector<Vec3> loop;
		auto push = [&](double s, double t) { loop.push_back(wallPoint(s, t) + offset); };
		for (int k = 0; k < nsu; ++k) push(s0 + (s1 - s0) * k / nsu, t0);
		for (int k = 0; k < nsv; ++k) push(s1, t0 + (t1 - t0) * k / nsv);
		for (int k = 0; k < nsu; ++k) push(s1 - (s1 - s0) * k / nsu, t1);
		for (int k = 0; k < nsv; ++k) push(s0, t1 - (t1 - t0) * k / nsv);
		return loop;
	};
	std::vector<Vec3> frame = cycle(ws0, ws1, wt0, wt1, 6, 4, Vec3::Zero());
	std::vector<Vec3> chamfer = cycle(ws0 + 0.75, ws1 - 0.75, wt0 + 0.75, wt1 - 0.75, 6, 4,
	                                  out * 0.2);
	std::vector<Vec3> front = chamfer;
	for (Vec3& p : front) p += out * 0.45;
	b.strip(frame, chamfer, 0, -1);
	b.strip(chamfer, front, 0, -1);
	Vec3 ctr = Vec3::Zero();
	for (const Vec3& p : front) ctr += p;
	ctr /= static_cast<double>(front.size());
	for (std::size_t k = 0; k < front.size(); ++k)
		b.tri(front[k], front[(k + 1) % front.size()], ctr, 0, -1);

	// Ground apron stitched to the wall bottoms, sloping away with a gentle
	// ripple so no zero-cost cut exists inside it.
	const double dists[] = {0.0, 0.6, 1.3, 2.2, 3.4, 5.0, 7.0, 9.5, 12.5, 16.0, 20.0};
	auto apronRing = [&](double d) {
		double z = -0.06 * d + 0.05 * std::sin(1.1 * d);
		std::array<Vec3, 4> rc = {Vec3(-hwB - d, -hlB - d, z), Vec3(hwB + d, -hlB - d, z),
		                          Vec3(hwB + d, hlB + d, z), Vec3(-hwB - d, hlB + d, z)};
		std::vector<Vec3> loop;
		for (int k = 0; k < 4; ++k) {
			const Vec3& a = rc[k];
			const Vec3& bb = rc[(k + 1) % 4];
			int n = k % 2 == 0 ? nu[0] : nu[1];
			for (int i = 0; i < n; ++i) loop.push_back(lerp3(a, bb, static_cast<double>(i) / n));
		}
		return loop;
	};
	std::vector<Vec3> prev = apronRing(dists[0]);
	for (std::size_t k = 1; k < std::size(dists); ++k) {
		std::vector<Vec3> next = apronRing(dists[k]);
		b.strip(prev, next, -1, -1);
		prev = std::move(next);
	}

	SynthScene scene;
	b.finish(scene);
	return scene;
}

}  // namespace mvsseg

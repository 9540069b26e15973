#include "mvsseg/masks.hpp"

#include "mvsseg/parallel.hpp"
#include "mvsseg/png_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

namespace mvsseg {

namespace {

namespace fs = std::filesystem;

struct SidecarEntry {
	int id;
	double prob;
};

std::vector<SidecarEntry> readSidecar(const fs::path& path) {
	std::ifstream in(path);
	if (!in) throw std::runtime_error("masks: missing sidecar " + path.string());
	nlohmann::json doc;
	try {
		doc = nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception& e) {
		throw std::runtime_error("masks: " + path.string() + ": " + e.what());
	}
	if (!doc.is_array())
		throw std::runtime_error("masks: sidecar " + path.string() + " is not an array");
	std::vector<SidecarEntry> entries;
	for (const auto& item : doc) {
		SidecarEntry e{};
		try {
			e.id = item.at("id").get<int>();
			e.prob = item.at("prob").get<double>();
		} catch (const nlohmann::json::exception& err) {
			throw std::runtime_error("masks: malformed sidecar entry in " + path.string() + ": " +
			                         err.what());
		}
		if (e.prob < 0.0 || e.prob > 1.0)
			throw std::runtime_error("masks: probability outside [0, 1] in " + path.string());
		entries.push_back(e);
	}
	return entries;
}

}  // namespace

MaskCollection loadMasks(const std::string& dir, double minProb) {
	// Collect <image_id>.png files, ascending image id.
	std::map<int, fs::path> images;
	for (const auto& entry : fs::directory_iterator(dir)) {
		if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
		const std::string stem = entry.path().stem().string();
		try {
			std::size_t used = 0;
			int id = std::stoi(stem, &used);
			if (used == stem.size()) images[id] = entry.path();
		} catch (const std::exception&) {
			// Non-numeric stems are not mask images.
		}
	}

	MaskCollection out;
	for (const auto& [imageId, pngPath] : images) {
		fs::path sidecarPath = pngPath;
		sidecarPath.replace_extension(".json");
		std::vector<SidecarEntry> sidecar = readSidecar(sidecarPath);
		std::map<int, double> probs;
		for (const SidecarEntry& e : sidecar) probs[e.id] = e.prob;

		ImageU16 png = readPng(pngPath.string());
		if (png.channels != 1)
			throw std::runtime_error("masks: " + pngPath.string() + " is not single-channel");

		// Pixel value v > 0 means in-image mask v-1.
		std::map<int, std::vector<RleRun>> regions;
		for (int y = 0; y < png.height; ++y) {
			int x = 0;
			while (x < png.width) {
				int v = png.sample(x, y);
				if (v == 0) {
					++x;
					continue;
				}
				int begin = x;
				while (x < png.width && png.sample(x, y) == v) ++x;
				regions[v - 1].push_back({y, begin, x});
			}
		}

		int survivors = 0;
		for (auto& [inImageId, region] : regions) {
			auto probIt = probs.find(inImageId);
			if (probIt == probs.end())
				throw std::runtime_error("masks: label id " + std::to_string(inImageId) +
				                         " has no sidecar entry in " + sidecarPath.string());
			if (probIt->second < minProb) {
				++out.discardedLowConfidence;
				continue;
			}
			LocalMask mask;
			mask.imageId = imageId;
			mask.inImageId = inImageId;
			mask.probability = probIt->second;
			mask.region = std::move(region);
			out.masks.push_back(std::move(mask));
			++survivors;
		}
		(void)survivors;

		out.labelImages.emplace_back(imageId, png.width, png.height);
	}

	// Global indices in (image id, in-image id) order; std::map iteration
	// above already yields that order.
	for (std::size_t i = 0; i < out.masks.size(); ++i)
		out.masks[i].globalIndex = static_cast<int>(i);

	// Paint surviving masks into the label grids.
	std::map<int, MaskLabelImage*> grids;
	for (auto& img : out.labelImages) grids[img.imageId()] = &img;
	for (const LocalMask& mask : out.masks) {
		MaskLabelImage& grid = *grids.at(mask.imageId);
		for (const RleRun& run : mask.region)
			for (int x = run.begin; x < run.end; ++x) grid.at(x, run.row) = mask.globalIndex;
	}
	return out;
}

MaskTriangleSets liftMasks(const TriMesh& mesh, std::span<const CameraView> cameras,
                           std::span<const DepthMap> depths,
                           std::span<const MaskLabelImage> labels, int maskCount) {
	if (cameras.size() != depths.size() || cameras.size() != labels.size())
		throw std::invalid_argument("lift: cameras, depths and labels must align");

	MaskTriangleSets out;
	out.triangleMasks.resize(mesh.triangleCount());

	parallelFor(mesh.triangleCount(), [&](std::int64_t t) {
		const Vec3& c = mesh.centroid(static_cast<std::int32_t>(t));
		auto& list = out.triangleMasks[t];
		for (std::size_t v = 0; v < cameras.size(); ++v) {
			if (labels[v].empty()) continue;
			if (!visible(cameras[v], depths[v], c)) continue;
			PixelProjection p = cameras[v].project(c);
			int px = static_cast<int>(std::floor(p.u));
			int py = static_cast<int>(std::floor(p.v));
			std::int32_t mask = labels[v].at(px, py);
			if (mask >= 0) list.emplace_back(cameras[v].imageId, mask);
		}
	});

	// Assemble S_i serially in ascending triangle order: deterministic for
	// every thread count.
	std::vector<std::vector<std::int32_t>> sets(maskCount);
	for (std::int32_t t = 0; t < mesh.triangleCount(); ++t) {
		for (const auto& [imageId, mask] : out.triangleMasks[t]) {
			if (mask < 0 || mask >= maskCount)
				throw std::out_of_range("lift: label image references unknown mask");
			sets[mask].push_back(t);
		}
	}
	out.sets.reserve(maskCount);
	for (auto& s : sets) out.sets.push_back(TriangleSet::fromIndices(mesh, std::move(s)));
	return out;
}

void writeMaskSets(const std::string& path, const MaskTriangleSets& sets) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw std::runtime_error("masksets: cannot open " + path + " for writing");
	auto writeU32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
	writeU32(static_cast<std::uint32_t>(sets.sets.size()));
	for (const TriangleSet& s : sets.sets) {
		writeU32(static_cast<std::uint32_t>(s.size()));
		static_assert(sizeof(std::int32_t) == 4);
		out.write(reinterpret_cast<const char*>(s.indices().data()),
		          static_cast<std::streamsize>(s.size() * 4));
	}
	if (!out) throw std::runtime_error("masksets: write failed for " + path);
}

std::vector<std::vector<std::int32_t>> readMaskSets(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw std::runtime_error("masksets: cannot open " + path);
	auto readU32 = [&]() {
		std::uint32_t v = 0;
		in.read(reinterpret_cast<char*>(&v), 4);
		if (!in) throw std::runtime_error("masksets: truncated file " + path);
		return v;
	};
	std::uint32_t count = readU32();
	std::vector<std::vector<std::int32_t>> sets(count);
	for (std::uint32_t i = 0; i < count; ++i) {
		std::uint32_t len = readU32();
		sets[i].resize(len);
		in.read(reinterpret_cast<char*>(sets[i].data()), static_cast<std::streamsize>(len) * 4);
		if (!in) throw std::runtime_error("masksets: truncated file " + path);
	}
	return sets;
}

}  // namespace mvsseg

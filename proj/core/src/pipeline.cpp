#include "mvsseg/pipeline.hpp"

#include "mvsseg/camera.hpp"
#include "mvsseg/clustering.hpp"
#include "mvsseg/masks.hpp"
#include "mvsseg/mesh.hpp"
#include "mvsseg/metrics.hpp"
#include "mvsseg/numeric.hpp"
#include "mvsseg/parallel.hpp"
#include "mvsseg/roof_labeling.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mvsseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string readFileBytes(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw std::runtime_error("cannot open " + path);
	std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	if (in.bad()) throw std::runtime_error("read failed for " + path);
	return bytes;
}

void writeJsonFile(const fs::path& path, const json& doc) {
	std::ofstream out(path);
	if (!out) throw std::runtime_error("cannot write " + path.string());
	out << doc.dump(1) << '\n';
	if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string hex64(std::uint64_t v) {
	char buf[17];
	std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
	return buf;
}

/// Rolling content digest over files and parameters; order-sensitive.
class Digest {
public:
	void text(const std::string& s) { h_ = fnv1a64(s.data(), s.size(), h_); }
	void number(double v) {
		char buf[40];
		std::snprintf(buf, sizeof(buf), "%.17g", v);
		text(buf);
	}
	void file(const std::string& path) {
		text(path.substr(path.find_last_of('/') + 1));
		std::string bytes = readFileBytes(path);
		h_ = fnv1a64(bytes.data(), bytes.size(), h_);
	}
	/// Every regular file in the directory, sorted by name.
	void dir(const std::string& path) {
		std::vector<std::string> names;
		for (const auto& entry : fs::directory_iterator(path))
			if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
		std::sort(names.begin(), names.end());
		for (const std::string& name : names) file((fs::path(path) / name).string());
	}
	std::string hex() const { return hex64(h_); }

private:
	std::uint64_t h_ = 0xcbf29ce484222325ull;
};

json loadManifestStages(const fs::path& path) {
	std::ifstream in(path);
	if (!in) return json::object();
	json doc = json::parse(in, nullptr, false);
	if (doc.is_discarded() || !doc.is_object() || !doc.contains("stages") ||
	    !doc["stages"].is_object())
		return json::object();
	return doc["stages"];
}

std::vector<ScoredInstance> instancesFromGroupJson(const TriMesh& mesh, const json& arr,
                                                   const char* idKey) {
	if (!arr.is_array()) throw std::runtime_error("expected a JSON array of instances");
	std::vector<ScoredInstance> out;
	for (const json& entry : arr) {
		ScoredInstance inst;
		inst.id = entry.at(idKey).get<std::int32_t>();
		inst.score = entry.value("score", 0.0);
		std::vector<std::int32_t> ids = entry.at("triangle_ids").get<std::vector<std::int32_t>>();
		inst.triangles = TriangleSet::fromIndices(mesh, std::move(ids));
		out.push_back(std::move(inst));
	}
	return out;
}

json reportToJson(const EvalReport& report, const char* scoreSource) {
	json thresholds = json::array();
	for (const ThresholdReport& t : report.thresholds)
		thresholds.push_back({{"threshold", t.threshold},
		                      {"ap", t.ap},
		                      {"true_positives", t.truePositives},
		                      {"precision", t.precision},
		                      {"recall", t.recall}});
	return {{"ap", report.ap},
	        {"ap50", report.ap50},
	        {"ap75", report.ap75},
	        {"score_source", scoreSource},
	        {"thresholds", std::move(thresholds)},
	        {"best_iou", report.bestIou}};
}

}  // namespace

std::vector<StageStatus> runPipeline(const PipelineConfig& cfg) {
	if (cfg.outDir.empty()) throw StageError("setup", "output directory not set");
	if (cfg.beta < 0.0 || cfg.beta > 1.0) throw StageError("setup", "beta outside [0, 1]");
	if (cfg.threadCap > 0)
		::setenv("MVSSEG_THREADS", std::to_string(cfg.threadCap).c_str(), 1);

	fs::create_directories(cfg.outDir);
	const fs::path out(cfg.outDir);
	const fs::path manifestPath = out / "manifest.json";
	json oldStages = loadManifestStages(manifestPath);
	json newStages = oldStages;
	std::vector<StageStatus> statuses;

	// Lazily materialized shared state; stages fall back to reading the
	// artifacts of earlier (possibly cached) stages.
	std::optional<TriMesh> mesh;
	std::optional<std::vector<CameraView>> cameras;
	std::vector<DepthMap> depths;
	std::optional<MaskCollection> collection;
	std::optional<MaskTriangleSets> lifted;
	std::vector<double> maskProbs;
	std::optional<MaskMapping> mapping;
	std::optional<std::vector<RoofInstance>> roofs;
	std::map<std::int32_t, double> roofScores;

	auto ensureMesh = [&](const char* stage) -> const TriMesh& {
		if (!mesh) {
			try {
				mesh = loadMesh(cfg.meshPath);
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
		}
		return *mesh;
	};
	auto ensureCameras = [&](const char* stage) -> const std::vector<CameraView>& {
		if (!cameras) {
			try {
				cameras = loadCameras(cfg.camerasPath);
				std::sort(cameras->begin(), cameras->end(),
				          [](const CameraView& a, const CameraView& b) {
					          return a.imageId < b.imageId;
				          });
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
		}
		return *cameras;
	};
	auto depthPath = [&](int imageId) {
		return out / "depth" / (std::to_string(imageId) + ".dmap");
	};
	auto ensureDepths = [&](const char* stage) -> const std::vector<DepthMap>& {
		if (depths.empty()) {
			const auto& cams = ensureCameras(stage);
			depths.resize(cams.size());
			try {
				for (std::size_t i = 0; i < cams.size(); ++i)
					depths[i] = readDepthMapFile(depthPath(cams[i].imageId).string(),
					                             cams[i].imageId);
			} catch (const std::exception& e) {
				depths.clear();
				throw StageError(stage, e.what());
			}
		}
		return depths;
	};
	auto ensureCollection = [&](const char* stage) -> const MaskCollection& {
		if (!collection) {
			try {
				collection = loadMasks(cfg.masksDir, cfg.minMaskProb);
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
		}
		return *collection;
	};
	auto ensureLifted = [&](const char* stage) -> const MaskTriangleSets& {
		if (!lifted) {
			try {
				const TriMesh& m = ensureMesh(stage);
				std::vector<std::vector<std::int32_t>> sets =
				    readMaskSets((out / "masksets.bin").string());
				std::ifstream metaIn(out / "masks_meta.json");
				if (!metaIn) throw std::runtime_error("missing masks_meta.json");
				json meta = json::parse(metaIn);
				const json& entries = meta.at("masks");
				if (entries.size() != sets.size())
					throw std::runtime_error("masks_meta.json does not match masksets.bin");
				MaskTriangleSets lift;
				lift.triangleMasks.resize(m.triangleCount());
				maskProbs.clear();
				for (std::size_t i = 0; i < sets.size(); ++i) {
					int imageId = entries[i].at("image_id").get<int>();
					maskProbs.push_back(entries[i].at("prob").get<double>());
					for (std::int32_t t : sets[i])
						lift.triangleMasks[t].emplace_back(imageId,
						                                   static_cast<std::int32_t>(i));
					lift.sets.push_back(TriangleSet::fromIndices(m, std::move(sets[i])));
				}
				lifted = std::move(lift);
			} catch (const StageError&) {
				throw;
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
		}
		return *lifted;
	};
	auto ensureMapping = [&](const char* stage) -> const MaskMapping& {
		if (!mapping) {
			try {
				std::ifstream in(out / "mapping.json");
				if (!in) throw std::runtime_error("missing mapping.json");
				json doc = json::parse(in);
				MaskMapping mp;
				mp.assignment = doc.at("assignment").get<std::vector<std::int32_t>>();
				for (const json& g : doc.at("globals")) {
					MaskMapping::GlobalMask gm;
					gm.rep = g.at("rep_local").get<int>();
					gm.support = g.at("support").get<int>();
					gm.repCStar = g.at("rep_cstar").get<double>();
					mp.globals.push_back(gm);
				}
				mapping = std::move(mp);
			} catch (const StageError&) {
				throw;
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
		}
		return *mapping;
	};
	auto ensureRoofs = [&](const char* stage) -> const std::vector<RoofInstance>& {
		if (!roofs) {
			try {
				const TriMesh& m = ensureMesh(stage);
				std::ifstream in(out / "roofs.json");
				if (!in) throw std::runtime_error("missing roofs.json");
				json doc = json::parse(in);
				std::vector<RoofInstance> list;
				for (const json& entry : doc) {
					RoofInstance inst;
					inst.roofId = entry.at("roof_id").get<std::int32_t>();
					std::vector<std::int32_t> ids =
					    entry.at("triangle_ids").get<std::vector<std::int32_t>>();
					inst.triangles = TriangleSet::fromIndices(m, std::move(ids));
					roofScores[inst.roofId] = entry.value("score", 0.0);
					list.push_back(std::move(inst));
				}
				roofs = std::move(list);
			} catch (const StageError&) {
				throw;
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
		}
		return *roofs;
	};

	// Digest of the stage inputs; any failure is the stage's own error.
	auto guarded = [&](const char* stage, auto&& fn) {
		try {
			return fn();
		} catch (const StageError&) {
			throw;
		} catch (const std::exception& e) {
			throw StageError(stage, e.what());
		}
	};

	auto runStage = [&](const char* stage, const std::string& digest,
	                    const std::vector<fs::path>& artifacts, auto&& body) {
		bool artifactsPresent = true;
		for (const fs::path& p : artifacts)
			if (!fs::exists(p)) {
				artifactsPresent = false;
				break;
			}
		bool cached = artifactsPresent && oldStages.contains(stage) &&
		              oldStages[stage].is_object() &&
		              oldStages[stage].value("digest", "") == digest;
		StageStatus status;
		status.name = stage;
		status.cached = cached;
		if (!cached) {
			auto start = std::chrono::steady_clock::now();
			try {
				body();
			} catch (const StageError&) {
				throw;
			} catch (const std::exception& e) {
				throw StageError(stage, e.what());
			}
			status.seconds =
			    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
		}
		newStages[stage] = {{"digest", digest}};
		statuses.push_back(status);
	};

	if (cfg.stages.depth) {
		const char* stage = "depth-render";
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file(cfg.camerasPath);
			return d.hex();
		});
		const auto& cams = ensureCameras(stage);
		std::vector<fs::path> artifacts;
		for (const CameraView& cam : cams) artifacts.push_back(depthPath(cam.imageId));
		runStage(stage, digest, artifacts, [&] {
			const TriMesh& m = ensureMesh(stage);
			fs::create_directories(out / "depth");
			depths.resize(cams.size());
			parallelFor(static_cast<std::int64_t>(cams.size()),
			            [&](std::int64_t i) { depths[i] = renderDepth(m, cams[i]); });
			for (std::size_t i = 0; i < cams.size(); ++i)
				writeDepthMapFile(depthPath(cams[i].imageId).string(), depths[i]);
		});
	}

	if (cfg.stages.height) {
		const char* stage = "height-render";
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file(cfg.camerasPath);
			return d.hex();
		});
		const auto& cams = ensureCameras(stage);
		std::vector<fs::path> artifacts;
		for (const CameraView& cam : cams)
			artifacts.push_back(out / "height" / (std::to_string(cam.imageId) + ".hmap"));
		runStage(stage, digest, artifacts, [&] {
			const TriMesh& m = ensureMesh(stage);
			fs::create_directories(out / "height");
			std::vector<HeightMap> heights(cams.size());
			parallelFor(static_cast<std::int64_t>(cams.size()),
			            [&](std::int64_t i) { heights[i] = renderHeightmap(m, cams[i]); });
			for (std::size_t i = 0; i < cams.size(); ++i)
				writeHeightMapFile(artifacts[i].string(), heights[i]);
		});
	}

	if (cfg.stages.lift) {
		const char* stage = "lift-masks";
		const auto& cams = ensureCameras(stage);
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file(cfg.camerasPath);
			for (const CameraView& cam : cams) d.file(depthPath(cam.imageId).string());
			d.dir(cfg.masksDir);
			d.number(cfg.minMaskProb);
			return d.hex();
		});
		runStage(stage, digest, {out / "masksets.bin", out / "masks_meta.json"}, [&] {
			const TriMesh& m = ensureMesh(stage);
			const MaskCollection& coll = ensureCollection(stage);
			ensureDepths(stage);
			lifted = liftMasks(m, cams, depths, coll.labelImages,
			                   static_cast<int>(coll.masks.size()));
			maskProbs.clear();
			for (const LocalMask& lm : coll.masks) maskProbs.push_back(lm.probability);
			writeMaskSets((out / "masksets.bin").string(), *lifted);
			json entries = json::array();
			for (const LocalMask& lm : coll.masks)
				entries.push_back({{"image_id", lm.imageId},
				                   {"local_id", lm.inImageId},
				                   {"prob", lm.probability}});
			writeJsonFile(out / "masks_meta.json",
			              {{"min_prob", cfg.minMaskProb},
			               {"discarded_low_confidence", coll.discardedLowConfidence},
			               {"masks", std::move(entries)}});
		});
	}

	if (cfg.stages.cluster) {
		const char* stage = "cluster";
		if (cfg.clusterBackend != "order" && cfg.clusterBackend != "spectral")
			throw StageError(stage, "unknown backend " + cfg.clusterBackend);
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file((out / "masksets.bin").string());
			d.file((out / "masks_meta.json").string());
			d.number(cfg.beta);
			d.text(cfg.clusterBackend);
			d.number(cfg.spectralK);
			return d.hex();
		});
		runStage(stage, digest, {out / "mapping.json"}, [&] {
			const TriMesh& m = ensureMesh(stage);
			const MaskTriangleSets& lift = ensureLifted(stage);
			SimilarityMatrix sim = SimilarityMatrix::fromMaskSets(m, lift);
			MaskConfidences conf = confidences(sim, maskProbs, cfg.beta);
			mapping = cfg.clusterBackend == "spectral"
			              ? spectralBaseline(sim, conf, cfg.spectralK)
			              : cluster(sim, conf);
			json globals = json::array();
			for (std::size_t g = 0; g < mapping->globals.size(); ++g)
				globals.push_back({{"g", static_cast<int>(g)},
				                   {"rep_local", mapping->globals[g].rep},
				                   {"support", mapping->globals[g].support},
				                   {"rep_cstar", mapping->globals[g].repCStar}});
			writeJsonFile(out / "mapping.json", {{"beta", cfg.beta},
			                                     {"globals", std::move(globals)},
			                                     {"assignment", mapping->assignment}});
		});
	}

	if (cfg.stages.roofs) {
		const char* stage = "segment-roofs";
		const auto& cams = ensureCameras(stage);
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file(cfg.camerasPath);
			for (const CameraView& cam : cams) d.file(depthPath(cam.imageId).string());
			d.dir(cfg.masksDir);
			d.file((out / "mapping.json").string());
			d.number(cfg.minMaskProb);
			return d.hex();
		});
		runStage(stage, digest, {out / "roofs.json", out / "roofs.ply"}, [&] {
			const TriMesh& m = ensureMesh(stage);
			const MaskCollection& coll = ensureCollection(stage);
			const MaskMapping& mp = ensureMapping(stage);
			ensureDepths(stage);
			std::vector<std::int32_t> vertexIds =
			    voteVertexRoofIds(m, cams, depths, coll.labelImages, mp.assignment);
			std::vector<std::int32_t> triangleIds = voteTriangleRoofIds(m, vertexIds);
			roofs = roofInstances(m, triangleIds);
			roofScores.clear();
			json arr = json::array();
			for (const RoofInstance& inst : *roofs) {
				double score = mp.globals[inst.roofId].repCStar;
				roofScores[inst.roofId] = score;
				arr.push_back({{"roof_id", inst.roofId},
				               {"score", score},
				               {"triangle_ids", inst.triangles.indices()}});
			}
			writeJsonFile(out / "roofs.json", arr);
			saveLabeledPly((out / "roofs.ply").string(), m, triangleIds);
		});
	}

	if (cfg.stages.buildings) {
		const char* stage = "segment-buildings";
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file((out / "roofs.json").string());
			d.number(cfg.hobbOffset);
			d.number(cfg.profileTol);
			d.number(static_cast<double>(static_cast<int>(cfg.dataTermMode)));
			return d.hex();
		});
		runStage(stage, digest, {out / "buildings.json", out / "labeled.ply"}, [&] {
			const TriMesh& m = ensureMesh(stage);
			const std::vector<RoofInstance>& roofList = ensureRoofs(stage);
			BuildingGrowthConfig growth;
			growth.hobbOffset = cfg.hobbOffset;
			growth.profileTol = cfg.profileTol;
			growth.mode = cfg.dataTermMode;
			BuildingSegmentation seg = segmentBuildings(m, roofList, growth);
			json arr = json::array();
			for (const BuildingInstance& b : seg.buildings) {
				auto scoreIt = roofScores.find(b.roofId);
				arr.push_back({{"building_id", b.buildingId},
				               {"roof_id", b.roofId},
				               {"triangle_count", static_cast<std::int64_t>(b.triangles.size())},
				               {"area_m2", b.triangles.area()},
				               {"score", scoreIt != roofScores.end() ? scoreIt->second : 0.0},
				               {"profile_fallback", b.profileFallback}});
			}
			writeJsonFile(out / "buildings.json", arr);
			saveLabeledPly((out / "labeled.ply").string(), m, seg.triangleLabels);
		});
	}

	if (cfg.stages.evaluate && !cfg.gtBuildingsPath.empty()) {
		const char* stage = "evaluate";
		std::string digest = guarded(stage, [&] {
			Digest d;
			d.text(stage);
			d.file(cfg.meshPath);
			d.file((out / "labeled.ply").string());
			d.file((out / "buildings.json").string());
			d.file(cfg.gtBuildingsPath);
			if (!cfg.gtRoofsPath.empty()) {
				d.file((out / "roofs.json").string());
				d.file(cfg.gtRoofsPath);
			}
			return d.hex();
		});
		std::vector<fs::path> artifacts = {out / "eval.json"};
		if (!cfg.gtRoofsPath.empty()) artifacts.push_back(out / "eval_roofs.json");
		runStage(stage, digest, artifacts, [&] {
			const TriMesh& m = ensureMesh(stage);

			auto loadGt = [&](const std::string& path) {
				if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") {
					auto labels = loadPlyFaceLabels(path);
					if (!labels)
						throw std::runtime_error(path + " carries no per-face labels");
					return instancesFromLabels(m, *labels);
				}
				std::ifstream in(path);
				if (!in) throw std::runtime_error("cannot open " + path);
				return instancesFromGroupJson(m, json::parse(in), "id");
			};

			auto predLabels = loadPlyFaceLabels((out / "labeled.ply").string());
			if (!predLabels) throw std::runtime_error("labeled.ply carries no per-face labels");
			std::vector<ScoredInstance> preds = instancesFromLabels(m, *predLabels);
			std::ifstream bin(out / "buildings.json");
			if (!bin) throw std::runtime_error("missing buildings.json");
			json buildingsDoc = json::parse(bin);
			std::map<std::int32_t, double> scores;
			for (const json& b : buildingsDoc)
				scores[b.at("building_id").get<std::int32_t>()] = b.value("score", 0.0);
			for (ScoredInstance& p : preds) {
				auto it = scores.find(p.id);
				if (it != scores.end()) p.score = it->second;
			}

			EvalReport report = averagePrecision(m, preds, loadGt(cfg.gtBuildingsPath));
			writeJsonFile(out / "eval.json", reportToJson(report, "representative_cstar"));

			if (!cfg.gtRoofsPath.empty()) {
				std::ifstream rin(out / "roofs.json");
				if (!rin) throw std::runtime_error("missing roofs.json");
				std::vector<ScoredInstance> roofPreds =
				    instancesFromGroupJson(m, json::parse(rin), "roof_id");
				EvalReport roofReport =
				    averagePrecision(m, roofPreds, loadGt(cfg.gtRoofsPath));
				writeJsonFile(out / "eval_roofs.json",
				              reportToJson(roofReport, "representative_cstar"));
			}
		});
	}

	json stageOrder = json::array();
	for (const StageStatus& s : statuses)
		stageOrder.push_back({{"name", s.name}, {"cached", s.cached}, {"seconds", s.seconds}});
	writeJsonFile(manifestPath, {{"stages", newStages}, {"run", std::move(stageOrder)}});
	return statuses;
}

}  // namespace mvsseg

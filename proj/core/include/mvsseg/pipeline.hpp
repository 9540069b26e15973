#pragma once

#include "mvsseg/building.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace mvsseg {

/// Paths, knobs and stage toggles for the staged pipeline.
struct PipelineConfig {
	std::string meshPath;
	std::string camerasPath;
	std::string masksDir;
	std::string outDir;
	std::string gtBuildingsPath;  // labeled PLY or gt.json; empty skips evaluation
	std::string gtRoofsPath;      // roof-instance gt.json, optional

	double beta = 0.5;
	double minMaskProb = 0.7;
	double hobbOffset = 4.0;
	double profileTol = 0.2;
	DataTermMode dataTermMode = DataTermMode::Full;
	std::string clusterBackend = "order";  // "order" or "spectral"
	int spectralK = 0;                     // group count for the spectral backend
	int threadCap = 0;                     // > 0 overrides MVSSEG_THREADS

	struct Toggles {
		bool depth = true;
		bool height = true;
		bool lift = true;
		bool cluster = true;
		bool roofs = true;
		bool buildings = true;
		bool evaluate = true;
	} stages;
};

/// Failure inside one stage; what() starts with "stage: <name>".
class StageError : public std::runtime_error {
public:
	StageError(const std::string& stage, const std::string& message)
	    : std::runtime_error("stage: " + stage + ": " + message), stage_(stage) {}
	const std::string& stage() const { return stage_; }

private:
	std::string stage_;
};

struct StageStatus {
	std::string name;
	bool cached = false;
	double seconds = 0.0;
};

/// Runs the enabled stages in order. A stage whose inputs hash to the digest
/// recorded in the previous manifest.json and whose artifacts still exist is
/// skipped as cached. Rewrites manifest.json; throws StageError on failure.
std::vector<StageStatus> runPipeline(const PipelineConfig& cfg);

}  // namespace mvsseg

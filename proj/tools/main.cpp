#include "mvsseg/pipeline.hpp"
#include "mvsseg/synth.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

namespace {

struct RunOptions {
	mvsseg::PipelineConfig cfg;
	std::string configPath;
	bool uniformData = false;
	bool noOrientation = false;
	bool noDistance = false;
};

void addCommonOptions(CLI::App* sub, RunOptions& o) {
	sub->add_option("--mesh", o.cfg.meshPath, "input mesh (.ply or .obj)");
	sub->add_option("--cameras", o.cfg.camerasPath, "camera JSON file");
	sub->add_option("--masks", o.cfg.masksDir, "mask directory (PNG + JSON sidecars)");
	sub->add_option("--out", o.cfg.outDir, "output / working directory")->required();
	sub->add_option("--gt", o.cfg.gtBuildingsPath, "building ground truth (labeled PLY or JSON)");
	sub->add_option("--gt-roofs", o.cfg.gtRoofsPath, "roof ground truth JSON");
	sub->add_option("--beta", o.cfg.beta, "mask similarity threshold")
	    ->check(CLI::Range(0.0, 1.0));
	sub->add_option("--min-prob", o.cfg.minMaskProb, "mask confidence floor")
	    ->check(CLI::Range(0.0, 1.0));
	sub->add_option("--hobb-offset", o.cfg.hobbOffset, "roof box expansion (m)");
	sub->add_option("--profile-tol", o.cfg.profileTol, "profile merge tolerance (m)");
	sub->add_option("--threads", o.cfg.threadCap, "worker thread cap (0 = all cores)");
	sub->add_option("--config", o.configPath, "TOML-style key=value file; flags win");
}

/// Feeds the TOML file through the subcommand's own option set. Values only
/// land on options the command line left empty, so flags win.
int applyConfigFile(CLI::App* sub, RunOptions& o) {
	if (o.configPath.empty()) return 0;
	std::ifstream in(o.configPath);
	if (!in) {
		std::fprintf(stderr, "error: cannot open config file %s\n", o.configPath.c_str());
		return 2;
	}
	try {
		sub->parse_from_stream(in);
	} catch (const CLI::ParseError& e) {
		int code = sub->exit(e);
		return code == 0 ? 0 : 2;
	}
	return 0;
}

void addAblationFlags(CLI::App* sub, RunOptions& o) {
	sub->add_flag("--ablation-uniform-data", o.uniformData,
	              "constant foreground penalty (direct-MRF baseline)");
	sub->add_flag("--no-orientation", o.noOrientation, "drop the orientation term");
	sub->add_flag("--no-distance", o.noDistance, "drop the distance term");
}

int resolveMode(RunOptions& o) {
	int picked = static_cast<int>(o.uniformData) + static_cast<int>(o.noOrientation) +
	             static_cast<int>(o.noDistance);
	if (picked > 1) {
		std::fprintf(stderr, "error: at most one data-term ablation flag may be set\n");
		return 2;
	}
	if (o.uniformData) o.cfg.dataTermMode = mvsseg::DataTermMode::Uniform;
	else if (o.noOrientation) o.cfg.dataTermMode = mvsseg::DataTermMode::NoOrientation;
	else if (o.noDistance) o.cfg.dataTermMode = mvsseg::DataTermMode::NoDistance;
	return 0;
}

int runStages(RunOptions& o) {
	int rc = resolveMode(o);
	if (rc != 0) return rc;
	try {
		auto statuses = mvsseg::runPipeline(o.cfg);
		for (const auto& s : statuses) {
			if (s.cached)
				std::printf("stage %s: cached\n", s.name.c_str());
			else
				std::printf("stage %s: ok (%.2f s)\n", s.name.c_str(), s.seconds);
		}
		return 0;
	} catch (const std::exception& e) {
		std::fprintf(stderr, "error: %s\n", e.what());
		return 1;
	}
}

}  // namespace

int main(int argc, char** argv) {
	CLI::App app{"Building instance segmentation for MVS urban meshes"};
	app.require_subcommand(1);

	// synth
	mvsseg::SynthConfig synthCfg;
	std::string synthOut;
	std::string roofStyle = "mixed";
	CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
	synth->add_option("--out", synthOut, "dataset directory")->required();
	synth->add_option("--seed", synthCfg.seed, "generator seed");
	synth->add_option("--buildings", synthCfg.buildingCount, "building count");
	synth->add_option("--attached-fraction", synthCfg.attachedFraction,
	                  "fraction of buildings arranged as attached pairs")
	    ->check(CLI::Range(0.0, 1.0));
	synth->add_option("--footprint-min", synthCfg.footprintMin, "min footprint side (m)");
	synth->add_option("--footprint-max", synthCfg.footprintMax, "max footprint side (m)");
	synth->add_option("--height-min", synthCfg.heightMin, "min roof-edge height (m)");
	synth->add_option("--height-max", synthCfg.heightMax, "max roof-edge height (m)");
	synth->add_option("--roof-style", roofStyle, "flat | gabled | mixed")
	    ->check(CLI::IsMember({"flat", "gabled", "mixed"}));
	synth->add_option("--ground-extent", synthCfg.groundExtent, "square ground side (m)");
	synth->add_option("--camera-altitude", synthCfg.cameraAltitude,
	                  "camera offset above mean roof height (m)");
	synth->add_option("--viewpoint-spacing", synthCfg.viewpointSpacing,
	                  "viewpoint grid pitch (m)");
	synth->add_option("--image-width", synthCfg.imageWidth, "mask image width (px)");
	synth->add_option("--image-height", synthCfg.imageHeight, "mask image height (px)");
	synth->add_option("--focal", synthCfg.focalLength, "focal length (px)");
	synth->add_option("--min-mask-pixels", synthCfg.minMaskPixels,
	                  "smallest rendered mask kept (px)");
	synth->add_option("--split", synthCfg.corruption.splitProbability,
	                  "per-view mask split probability")
	    ->check(CLI::Range(0.0, 1.0));
	synth->add_option("--merge", synthCfg.corruption.mergeProbability,
	                  "per-view mask merge probability")
	    ->check(CLI::Range(0.0, 1.0));
	synth->add_option("--drop", synthCfg.corruption.dropProbability,
	                  "per-view mask drop probability")
	    ->check(CLI::Range(0.0, 1.0));
	synth->add_option("--jitter", synthCfg.corruption.jitterProbability,
	                  "per-view confidence jitter probability")
	    ->check(CLI::Range(0.0, 1.0));

	// staged runs
	RunOptions depthOpt, heightOpt, liftOpt, clusterOpt, roofsOpt, buildingsOpt, evalOpt,
	    pipelineOpt;
	std::string backend = "order";
	int spectralK = 0;

	CLI::App* renderDepth =
	    app.add_subcommand("render-depth", "render per-view depth maps");
	addCommonOptions(renderDepth, depthOpt);
	CLI::App* renderHeight =
	    app.add_subcommand("render-height", "render per-view height maps");
	addCommonOptions(renderHeight, heightOpt);
	CLI::App* liftMasksCmd =
	    app.add_subcommand("lift-masks", "lift 2D masks to triangle sets");
	addCommonOptions(liftMasksCmd, liftOpt);
	CLI::App* clusterCmd =
	    app.add_subcommand("cluster", "group lifted masks into global masks");
	addCommonOptions(clusterCmd, clusterOpt);
	clusterCmd->add_option("--backend", backend, "order | spectral")
	    ->check(CLI::IsMember({"order", "spectral"}));
	clusterCmd->add_option("--k", spectralK, "group count for the spectral backend");
	CLI::App* segmentRoofs =
	    app.add_subcommand("segment-roofs", "vote per-triangle roof instances");
	addCommonOptions(segmentRoofs, roofsOpt);
	CLI::App* segmentBuildings =
	    app.add_subcommand("segment-buildings", "grow buildings from roof instances");
	addCommonOptions(segmentBuildings, buildingsOpt);
	addAblationFlags(segmentBuildings, buildingsOpt);
	CLI::App* evaluate = app.add_subcommand("evaluate", "score a labeling against ground truth");
	addCommonOptions(evaluate, evalOpt);
	CLI::App* pipeline = app.add_subcommand("pipeline", "run every stage in order");
	addCommonOptions(pipeline, pipelineOpt);
	addAblationFlags(pipeline, pipelineOpt);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		int code = app.exit(e);
		return code == 0 ? 0 : 2;
	}

	if (synth->parsed()) {
		if (roofStyle == "flat") synthCfg.roofStyle = mvsseg::RoofStyle::Flat;
		else if (roofStyle == "gabled") synthCfg.roofStyle = mvsseg::RoofStyle::Gabled;
		else synthCfg.roofStyle = mvsseg::RoofStyle::Mixed;
		try {
			mvsseg::SynthScene scene = mvsseg::generateScene(synthCfg);
			const auto& c = synthCfg.corruption;
			if (c.splitProbability > 0.0 || c.mergeProbability > 0.0 ||
			    c.dropProbability > 0.0 || c.jitterProbability > 0.0)
				mvsseg::corruptMasks(scene, c, synthCfg.seed);
			mvsseg::writeDataset(synthOut, scene, synthCfg);
			std::printf("synth: %d triangles, %zu views -> %s\n", scene.mesh.triangleCount(),
			            scene.cameras.size(), synthOut.c_str());
			return 0;
		} catch (const std::exception& e) {
			std::fprintf(stderr, "error: %s\n", e.what());
			return 1;
		}
	}

	auto only = [](RunOptions& o, bool mvsseg::PipelineConfig::Toggles::* member) {
		o.cfg.stages = {false, false, false, false, false, false, false};
		o.cfg.stages.*member = true;
	};

	if (renderDepth->parsed()) {
		if (int rc = applyConfigFile(renderDepth, depthOpt)) return rc;
		only(depthOpt, &mvsseg::PipelineConfig::Toggles::depth);
		return runStages(depthOpt);
	}
	if (renderHeight->parsed()) {
		if (int rc = applyConfigFile(renderHeight, heightOpt)) return rc;
		only(heightOpt, &mvsseg::PipelineConfig::Toggles::height);
		return runStages(heightOpt);
	}
	if (liftMasksCmd->parsed()) {
		if (int rc = applyConfigFile(liftMasksCmd, liftOpt)) return rc;
		only(liftOpt, &mvsseg::PipelineConfig::Toggles::lift);
		return runStages(liftOpt);
	}
	if (clusterCmd->parsed()) {
		if (int rc = applyConfigFile(clusterCmd, clusterOpt)) return rc;
		if (backend == "spectral" && spectralK < 1) {
			std::fprintf(stderr, "error: --backend spectral requires --k >= 1\n");
			return 2;
		}
		only(clusterOpt, &mvsseg::PipelineConfig::Toggles::cluster);
		clusterOpt.cfg.clusterBackend = backend;
		clusterOpt.cfg.spectralK = spectralK;
		return runStages(clusterOpt);
	}
	if (segmentRoofs->parsed()) {
		if (int rc = applyConfigFile(segmentRoofs, roofsOpt)) return rc;
		only(roofsOpt, &mvsseg::PipelineConfig::Toggles::roofs);
		return runStages(roofsOpt);
	}
	if (segmentBuildings->parsed()) {
		if (int rc = applyConfigFile(segmentBuildings, buildingsOpt)) return rc;
		only(buildingsOpt, &mvsseg::PipelineConfig::Toggles::buildings);
		return runStages(buildingsOpt);
	}
	if (evaluate->parsed()) {
		if (int rc = applyConfigFile(evaluate, evalOpt)) return rc;
		if (evalOpt.cfg.gtBuildingsPath.empty()) {
			std::fprintf(stderr, "error: evaluate requires --gt\n");
			return 2;
		}
		only(evalOpt, &mvsseg::PipelineConfig::Toggles::evaluate);
		return runStages(evalOpt);
	}
	if (pipeline->parsed()) {
		if (int rc = applyConfigFile(pipeline, pipelineOpt)) return rc;
		if (pipelineOpt.cfg.gtBuildingsPath.empty()) pipelineOpt.cfg.stages.evaluate = false;
		return runStages(pipelineOpt);
	}
	return 2;
}

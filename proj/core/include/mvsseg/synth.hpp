#pragma once

#include "mvsseg/camera.hpp"
#include "mvsseg/masks.hpp"
#include "mvsseg/mesh.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mvsseg {

enum class RoofStyle { Flat, Gabled, Mixed };

/// Per-view corruption probabilities for the generated GT masks.
struct CorruptionSpec {
	double splitProbability = 0.0;
	double mergeProbability = 0.0;
	double dropProbability = 0.0;
	double jitterProbability = 0.0;
};

struct SynthConfig {
	std::uint64_t seed = 42;
	int buildingCount = 20;
	double attachedFraction = 0.5;  // fraction of buildings arranged as pairs
	double footprintMin = 8.0;      // side length range (m)
	double footprintMax = 18.0;
	double heightMin = 6.0;  // roof edge height range (m)
	double heightMax = 16.0;
	RoofStyle roofStyle = RoofStyle::Mixed;
	double groundExtent = 160.0;    // square ground side (m)
	double cameraAltitude = 70.0;   // offset above the mean roof height (m)
	double viewpointSpacing = 32.0;  // jittered viewpoint grid pitch (m)
	int imageWidth = 512;
	int imageHeight = 512;
	double focalLength = 700.0;  // pixels; keeps adjacent nadir views overlapping
	int minMaskPixels = 16;       // roofs below this count get no mask in a view
	CorruptionSpec corruption;
};

/// GT masks of one view. The label grid stores in-image mask ids (-1 =
/// background); sources maps each in-image mask back to the GT roof ids it
/// was rendered (or merged) from.
struct ViewMasks {
	MaskLabelImage labels;
	std::vector<double> probabilities;
	std::vector<std::vector<std::int32_t>> sources;
};

struct SynthScene {
	TriMesh mesh;
	std::vector<std::int32_t> gtBuildingIds;  // per triangle, -1 = ground
	std::vector<std::int32_t> gtRoofIds;      // per triangle, -1 = not a roof
	std::vector<CameraView> cameras;
	std::vector<ViewMasks> masks;  // aligned with cameras
};

/// Builds the procedural scene: box buildings with eave overhangs (optionally
/// hipped), the requested fraction arranged as attached pairs sharing a full
/// wall, on a ground grid with holes under the footprints. Viewpoints lie on
/// a jittered grid at mean roof height + altitude offset, 5 cameras each
/// (nadir + 4 oblique at 45 degrees, burst heading randomized). GT masks are
/// rendered per view.
/// Throws std::invalid_argument on bad config and std::runtime_error when
/// placement fails 1000 times in a row.
SynthScene generateScene(const SynthConfig& cfg);

/// Applies drop, merge, split and probability jitter to scene.masks in
/// place, per view, with an independent per-view RNG substream derived from
/// seed. A split keeps the parent's probability and sources on both halves;
/// a merge concatenates sources and keeps the higher probability.
void corruptMasks(SynthScene& scene, const CorruptionSpec& spec, std::uint64_t seed);

/// Writes scene.ply, cameras.json, gt.json, gt_roofs.json, masks/ and
/// config.json under dir (created if missing).
void writeDataset(const std::string& dir, const SynthScene& scene, const SynthConfig& cfg);

///// Fixed single-building fixture for the data-term ablations: tapered walls
/// meeting the roof in a sharp crease, a balcony box attached through
/// chamfer strips, and a gently sloped ground apron stitched to the wall
/// bottoms. No cameras or masks.
SynthScene balconyScene();

}  // namespace mvsseg

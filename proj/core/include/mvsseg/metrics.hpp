#pragma once

#include "mvsseg/mesh.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvsseg {

/// Area IoU of two triangle sets from the same mesh; 0 when both are empty.
double instanceIou(const TriMesh& mesh, const TriangleSet& a, const TriangleSet& b);

/// One labeled instance with a ranking score.
struct ScoredInstance {
	std::int32_t id = -1;
	double score = 0.0;
	TriangleSet triangles;
};

/// Instances grouped from per-triangle labels (-1 skipped), ascending id,
/// scores zero.
std::vector<ScoredInstance> instancesFromLabels(const TriMesh& mesh,
                                                std::span<const std::int32_t> labels);

struct ThresholdReport {
	double threshold = 0.0;
	double ap = 0.0;
	std::vector<double> precision;  // after each prediction, score-descending
	std::vector<double> recall;
	int truePositives = 0;
};

struct EvalReport {
	double ap = 0.0;    // mean of the 10 thresholds 0.50:0.05:0.95
	double ap50 = 0.0;
	double ap75 = 0.0;
	std::vector<ThresholdReport> thresholds;  // ascending threshold
	std::vector<double> bestIou;              // per GT instance, gt order
};

/// Greedy score-ordered matching per threshold (each prediction takes the
/// unmatched GT of highest IoU >= threshold); AP(t) is the exact area under
/// the step-interpolated precision envelope. Ties in score break toward the
/// lower instance id.
EvalReport averagePrecision(const TriMesh& mesh, std::span<const ScoredInstance> predictions,
                            std::span<const ScoredInstance> groundTruth);

}  // namespace mvsseg

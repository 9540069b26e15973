#include "mvsseg/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace mvsseg {

double instanceIou(const TriMesh& mesh, const TriangleSet& a, const TriangleSet& b) {
	std::vector<std::int32_t> common, merged;
	std::set_intersection(a.indices().begin(), a.indices().end(), b.indices().begin(),
	                      b.indices().end(), std::back_inserter(common));
	if (common.empty()) return 0.0;
	std::set_union(a.indices().begin(), a.indices().end(), b.indices().begin(),
	               b.indices().end(), std::back_inserter(merged));
	const double inter = setArea(mesh, common);
	const double uni = setArea(mesh, merged);
	return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<ScoredInstance> instancesFromLabels(const TriMesh& mesh,
                                                std::span<const std::int32_t> labels) {
	if (labels.size() != static_cast<std::size_t>(mesh.triangleCount()))
		throw std::invalid_argument("instances: label count mismatch");
	std::map<std::int32_t, std::vector<std::int32_t>> groups;
	for (std::int32_t t = 0; t < mesh.triangleCount(); ++t)
		if (labels[t] >= 0) groups[labels[t]].push_back(t);
	std::vector<ScoredInstance> out;
	out.reserve(groups.size());
	for (auto& [id, tris] : groups)
		out.push_back({id, 0.0, TriangleSet::fromIndices(mesh, std::move(tris))});
	return out;
}

namespace {

/// Area under the precision envelope: each recall step contributes its width
/// times the highest precision at or beyond it.
double interpolatedAp(std::span<const double> precision, std::span<const double> recall) {
	std::vector<double> envelope(precision.begin(), precision.end());
	for (std::size_t k = envelope.size(); k-- > 1;)
		envelope[k - 1] = std::max(envelope[k - 1], envelope[k]);
	// Forward accumulation keeps the telescoped recall exact, so a perfect
	// prediction set scores exactly 1.
	double ap = 0.0;
	double prevRecall = 0.0;
	for (std::size_t k = 0; k < envelope.size(); ++k) {
		ap += (recall[k] - prevRecall) * envelope[k];
		prevRecall = recall[k];
	}
	return ap;
}

}  // namespace

EvalReport averagePrecision(const TriMesh& mesh, std::span<const ScoredInstance> predictions,
                            std::span<const ScoredInstance> groundTruth) {
	std::vector<std::size_t> order(predictions.size());
	std::iota(order.begin(), order.end(), 0);
	std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		if (predictions[a].score != predictions[b].score)
			return predictions[a].score > predictions[b].score;
		return predictions[a].id < predictions[b].id;
	});

	// IoU of every prediction/GT pair, in match order.
	std::vector<std::vector<double>> iou(order.size(),
	                                     std::vector<double>(groundTruth.size(), 0.0));
	for (std::size_t p = 0; p < order.size(); ++p)
		for (std::size_t g = 0; g < groundTruth.size(); ++g)
			iou[p][g] = instanceIou(mesh, predictions[order[p]].triangles,
			                        groundTruth[g].triangles);

	EvalReport report;
	report.bestIou.assign(groundTruth.size(), 0.0);
	for (std::size_t g = 0; g < groundTruth.size(); ++g)
		for (std::size_t p = 0; p < order.size(); ++p)
			report.bestIou[g] = std::max(report.bestIou[g], iou[p][g]);

	double apSum = 0.0;
	for (int k = 0; k < 10; ++k) {
		const double tau = static_cast<double>(50 + 5 * k) / 100.0;
		ThresholdReport tr;
		tr.threshold = tau;

		std::vector<std::uint8_t> taken(groundTruth.size(), 0);
		int tp = 0;
		for (std::size_t p = 0; p < order.size(); ++p) {
			double bestIou = 0.0;
			std::ptrdiff_t best = -1;
			for (std::size_t g = 0; g < groundTruth.size(); ++g) {
				if (taken[g] || iou[p][g] < tau) continue;
				if (iou[p][g] > bestIou) {
					bestIou = iou[p][g];
					best = static_cast<std::ptrdiff_t>(g);
				}
			}
			if (best >= 0) {
				taken[best] = 1;
				++tp;
			}
			tr.precision.push_back(static_cast<double>(tp) / static_cast<double>(p + 1));
			tr.recall.push_back(groundTruth.empty()
			                        ? 0.0
			                        : static_cast<double>(tp) /
			                              static_cast<double>(groundTruth.size()));
		}
		tr.truePositives = tp;
		tr.ap = groundTruth.empty() ? 0.0 : interpolatedAp(tr.precision, tr.recall);
		apSum += tr.ap;
		report.thresholds.push_back(std::move(tr));
	}

	report.ap = apSum / 10.0;
	report.ap50 = report.thresholds[0].ap;
	report.ap75 = report.thresholds[5].ap;
	return report;
}

}  // namespace mvsseg

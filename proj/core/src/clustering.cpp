#include "mvsseg/clustering.hpp"

#include "mvsseg/parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace mvsseg {

void SimilarityMatrix::set(int i, int j, float v) {
	if (denseStorage_) {
		denseValues_[static_cast<std::size_t>(i) * n_ + j] = v;
		denseValues_[static_cast<std::size_t>(j) * n_ + i] = v;
	} else {
		rows_[i].push_back({j, v});
		if (i != j) rows_[j].push_back({i, v});
	}
}

SimilarityMatrix SimilarityMatrix::fromMaskSets(const TriMesh& mesh,
                                                const MaskTriangleSets& lifted,
                                                std::size_t denseLimit) {
	const int n = static_cast<int>(lifted.sets.size());
	SimilarityMatrix m;
	m.n_ = n;
	m.denseStorage_ = static_cast<std::size_t>(n) <= denseLimit;
	if (m.denseStorage_)
		m.denseValues_.assign(static_cast<std::size_t>(n) * n, 0.0f);
	else
		m.rows_.resize(n);

	// Pairwise intersection areas through the inverse map. Accumulation runs
	// serially in ascending triangle order so the result does not depend on
	// the thread count.
	const auto key = [](int a, int b) {
		return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
		       static_cast<std::uint32_t>(b);
	};
	std::unordered_map<std::uint64_t, double> inter;
	std::vector<int> ids;
	const std::size_t triCount = lifted.triangleMasks.size();
	for (std::size_t t = 0; t < triCount; ++t) {
		const auto& entry = lifted.triangleMasks[t];
		if (entry.size() < 2) continue;
		ids.clear();
		for (const auto& [imageId, mask] : entry) ids.push_back(mask);
		std::sort(ids.begin(), ids.end());
		const double area = mesh.area(static_cast<std::int32_t>(t));
		for (std::size_t a = 0; a < ids.size(); ++a)
			for (std::size_t b = a + 1; b < ids.size(); ++b)
				if (ids[a] != ids[b]) inter[key(ids[a], ids[b])] += area;
	}

	std::vector<std::uint64_t> keys;
	keys.reserve(inter.size());
	for (const auto& [k, v] : inter) keys.push_back(k);
	std::sort(keys.begin(), keys.end());
	for (std::uint64_t k : keys) {
		const int a = static_cast<int>(k >> 32);
		const int b = static_cast<int>(k & 0xffffffffu);
		const double i = inter[k];
		if (i <= 0.0) continue;
		const double denom = lifted.sets[a].area() + lifted.sets[b].area() - i;
		const double ratio = denom > 0.0 ? std::clamp(i / denom, 0.0, 1.0) : 1.0;
		m.set(a, b, static_cast<float>(ratio));
	}
	for (int i = 0; i < n; ++i) m.set(i, i, lifted.sets[i].area() > 0.0 ? 1.0f : 0.0f);

	if (!m.denseStorage_)
		for (auto& row : m.rows_)
			std::sort(row.begin(), row.end(),
			          [](const Entry& x, const Entry& y) { return x.col < y.col; });
	return m;
}

SimilarityMatrix SimilarityMatrix::fromDense(int n, std::span<const float> values) {
	if (values.size() != static_cast<std::size_t>(n) * n)
		throw std::invalid_argument("similarity: dense buffer size mismatch");
	for (int i = 0; i < n; ++i)
		for (int j = 0; j < n; ++j) {
			const float v = values[static_cast<std::size_t>(i) * n + j];
			if (!(v >= 0.0f && v <= 1.0f))
				throw std::invalid_argument("similarity: value outside [0, 1]");
			if (v != values[static_cast<std::size_t>(j) * n + i])
				throw std::invalid_argument("similarity: matrix not symmetric");
		}
	SimilarityMatrix m;
	m.n_ = n;
	m.denseStorage_ = true;
	m.denseValues_.assign(values.begin(), values.end());
	return m;
}

MaskConfidences confidences(const SimilarityMatrix& m, std::span<const double> probs,
                            double beta) {
	if (!(beta >= 0.0 && beta <= 1.0))
		throw std::invalid_argument("confidences: beta outside [0, 1]");
	const int n = m.size();
	if (probs.size() != static_cast<std::size_t>(n))
		throw std::invalid_argument("confidences: probability count mismatch");

	MaskConfidences out;
	out.beta = beta;
	out.c.resize(n);
	out.cstar.resize(n);
	parallelFor(n, [&](std::int64_t i) {
		double c = 0.0, cstar = 0.0;
		m.visitRow(static_cast<int>(i), [&](int j, float mij) {
			const double term = probs[j] * static_cast<double>(mij);
			c += term;
			if (static_cast<double>(mij) > beta) cstar += term;
		});
		out.c[i] = probs[i] * c;
		out.cstar[i] = probs[i] * cstar;
	});
	return out;
}

MaskMapping cluster(const SimilarityMatrix& m, const MaskConfidences& conf) {
	const int n = m.size();
	if (conf.cstar.size() != static_cast<std::size_t>(n))
		throw std::invalid_argument("cluster: confidence count mismatch");
	const double beta = conf.beta;

	std::vector<int> order(n);
	std::iota(order.begin(), order.end(), 0);
	std::sort(order.begin(), order.end(), [&](int a, int b) {
		if (conf.cstar[a] != conf.cstar[b]) return conf.cstar[a] > conf.cstar[b];
		return a < b;
	});

	MaskMapping mapping;
	mapping.assignment.assign(n, -1);
	std::vector<char> marked(n, 0);
	for (int rep : order) {
		if (marked[rep]) continue;
		const int g = static_cast<int>(mapping.globals.size());
		marked[rep] = 1;
		mapping.assignment[rep] = g;
		MaskMapping::GlobalMask global;
		global.rep = rep;
		global.support = 1;
		global.repCStar = conf.cstar[rep];
		m.visitRow(rep, [&](int l, float mlr) {
			if (marked[l]) return;
			if (static_cast<double>(mlr) > beta) {
				marked[l] = 1;
				mapping.assignment[l] = g;
				++global.support;
			}
		});
		mapping.globals.push_back(global);
	}
	return mapping;
}

namespace {

/// Deterministic k-means on embedding rows: k-means++ seeding from a fixed
/// RNG, empty clusters re-seeded with the point farthest from its center.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
	const int n = static_cast<int>(points.rows());
	std::vector<int> assign(n, 0);
	if (k <= 1) return assign;

	std::mt19937_64 rng(seed);
	Eigen::MatrixXd centers(k, points.cols());
	std::vector<double> minDist(n, std::numeric_limits<double>::infinity());
	{
		std::uniform_int_distribution<int> first(0, n - 1);
		centers.row(0) = points.row(first(rng));
		for (int c = 1; c < k; ++c) {
			double total = 0.0;
			for (int i = 0; i < n; ++i) {
				const double d = (points.row(i) - centers.row(c - 1)).squaredNorm();
				minDist[i] = std::min(minDist[i], d);
				total += minDist[i];
			}
			if (total <= 0.0) {
				centers.row(c) = points.row(c % n);
				continue;
			}
			std::uniform_real_distribution<double> u(0.0, total);
			const double target = u(rng);
			double acc = 0.0;
			int pick = n - 1;
			for (int i = 0; i < n; ++i) {
				acc += minDist[i];
				if (acc >= target) {
					pick = i;
					break;
				}
			}
			centers.row(c) = points.row(pick);
		}
	}

	for (int iter = 0; iter < 200; ++iter) {
		bool changed = false;
		for (int i = 0; i < n; ++i) {
			int best = 0;
			double bestD = std::numeric_limits<double>::infinity();
			for (int c = 0; c < k; ++c) {
				const double d = (points.row(i) - centers.row(c)).squaredNorm();
				if (d < bestD) {
					bestD = d;
					best = c;
				}
			}
			if (assign[i] != best) {
				assign[i] = best;
				changed = true;
			}
		}
		Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
		std::vector<int> counts(k, 0);
		for (int i = 0; i < n; ++i) {
			sums.row(assign[i]) += points.row(i);
			++counts[assign[i]];
		}
		for (int c = 0; c < k; ++c) {
			if (counts[c] > 0) {
				centers.row(c) = sums.row(c) / counts[c];
			} else {
				int far = 0;
				double farD = -1.0;
				for (int i = 0; i < n; ++i) {
					const double d = (points.row(i) - centers.row(assign[i])).squaredNorm();
					if (d > farD) {
						farD = d;
						far = i;
					}
				}
				centers.row(c) = points.row(far);
				changed = true;
			}
		}
		if (!changed) break;
	}
	return assign;
}

}  // namespace

MaskMapping spectralBaseline(const SimilarityMatrix& m, const MaskConfidences& conf, int k,
                             std::uint64_t seed) {
	const int n = m.size();
	if (k < 1 || k > n) throw std::invalid_argument("spectral: k must be in [1, mask count]");
	if (conf.cstar.size() != static_cast<std::size_t>(n))
		throw std::invalid_argument("spectral: confidence count mismatch");

	std::vector<int> assign(n, 0);
	if (k == n) {
		std::iota(assign.begin(), assign.end(), 0);
	} else if (k > 1) {
		// Symmetric normalized Laplacian of the similarity graph, no self loops.
		Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
		for (int i = 0; i < n; ++i)
			m.visitRow(i, [&](int j, float v) {
				if (j != i) w(i, j) = v;
			});
		const Eigen::VectorXd d = w.rowwise().sum();
		Eigen::VectorXd dInvSqrt(n);
		for (int i = 0; i < n; ++i) dInvSqrt[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
		const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) -
		                            dInvSqrt.asDiagonal() * w * dInvSqrt.asDiagonal();

		Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
		if (solver.info() != Eigen::Success)
			throw std::runtime_error("spectral: eigendecomposition failed");
		Eigen::MatrixXd embedding = solver.eigenvectors().leftCols(k);
		for (int i = 0; i < n; ++i) {
			const double norm = embedding.row(i).norm();
			if (norm > 0.0) embedding.row(i) /= norm;
		}
		assign = kmeans(embedding, k, seed);
	}

	// Representative per group: highest C*, ties to the lower local index.
	std::vector<int> rep(k, -1);
	std::vector<int> support(k, 0);
	for (int i = 0; i < n; ++i) {
		const int g = assign[i];
		++support[g];
		if (rep[g] < 0 || conf.cstar[i] > conf.cstar[rep[g]]) rep[g] = i;
	}

	std::vector<int> groups;
	for (int g = 0; g < k; ++g)
		if (rep[g] >= 0) groups.push_back(g);
	std::sort(groups.begin(), groups.end(), [&](int a, int b) {
		if (conf.cstar[rep[a]] != conf.cstar[rep[b]])
			return conf.cstar[rep[a]] > conf.cstar[rep[b]];
		return rep[a] < rep[b];
	});

	MaskMapping mapping;
	mapping.assignment.assign(n, -1);
	std::vector<int> remap(k, -1);
	for (std::size_t out = 0; out < groups.size(); ++out) {
		const int g = groups[out];
		remap[g] = static_cast<int>(out);
		mapping.globals.push_back({rep[g], support[g], conf.cstar[rep[g]]});
	}
	for (int i = 0; i < n; ++i) mapping.assignment[i] = remap[assign[i]];
	return mapping;
}

}  // namespace mvsseg

#pragma once

#include "mvsseg/masks.hpp"
#include "mvsseg/mesh.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvsseg {

/// Symmetric pairwise mask similarity: area IoU of the lifted triangle sets.
/// m_ii is 1 for non-empty masks and 0 for empty ones; empty-vs-empty
/// off-diagonals resolve to 0. Values are stored as 32-bit floats, densely up
/// to denseLimit masks and as sorted sparse rows above it.
class SimilarityMatrix {
public:
	static constexpr std::size_t kDefaultDenseLimit = 20000;

	SimilarityMatrix() = default;

	static SimilarityMatrix fromMaskSets(const TriMesh& mesh, const MaskTriangleSets& lifted,
	                                     std::size_t denseLimit = kDefaultDenseLimit);

	/// Adopts an explicit dense matrix (row-major n*n). Values must be in
	/// [0, 1] and symmetric; used by tests and synthetic inputs.
	static SimilarityMatrix fromDense(int n, std::span<const float> values);

	int size() const { return n_; }
	bool dense() const { return denseStorage_; }

	float at(int i, int j) const {
		if (denseStorage_) return denseValues_[static_cast<std::size_t>(i) * n_ + j];
		const auto& row = rows_[i];
		auto it = std::lower_bound(row.begin(), row.end(), j,
		                           [](const Entry& e, int col) { return e.col < col; });
		return (it != row.end() && it->col == j) ? it->value : 0.0f;
	}

	/// Visits the non-zero entries of row i in ascending column order.
	template <class Fn>
	void visitRow(int i, Fn&& fn) const {
		if (denseStorage_) {
			const float* row = denseValues_.data() + static_cast<std::size_t>(i) * n_;
			for (int j = 0; j < n_; ++j)
				if (row[j] != 0.0f) fn(j, row[j]);
		} else {
			for (const Entry& e : rows_[i]) fn(e.col, e.value);
		}
	}

private:
	struct Entry {
		std::int32_t col;
		float value;
	};

	void set(int i, int j, float v);

	int n_ = 0;
	bool denseStorage_ = true;
	std::vector<float> denseValues_;
	std::vector<std::vector<Entry>> rows_;
};

/// Per-mask overlap confidence C (all similarities, self term included) and
/// cleaned confidence C* (only pairs whose similarity strictly exceeds beta).
struct MaskConfidences {
	std::vector<double> c;
	std::vector<double> cstar;
	double beta = 0.5;
};

/// probs[i] is the 2D confidence P_i of mask i. beta must lie in [0, 1].
MaskConfidences confidences(const SimilarityMatrix& m, std::span<const double> probs,
                            double beta = 0.5);

/// Grouping of local masks into global (3D) masks.
struct MaskMapping {
	struct GlobalMask {
		int rep = -1;          // local index of the representative
		int support = 0;       // member count
		double repCStar = 0.0;
	};
	std::vector<std::int32_t> assignment;  // local index -> global index
	std::vector<GlobalMask> globals;       // in selection order, g = 0 first
};

/// Greedy traversal in descending C* order (ties to the lower local index):
/// each unmarked mask opens a global mask and immediately absorbs every
/// unmarked mask whose similarity to it strictly exceeds beta.
MaskMapping cluster(const SimilarityMatrix& m, const MaskConfidences& conf);

/// Normalized spectral clustering of the similarity graph into k groups;
/// the highest-C* member of each group becomes its representative. Throws
/// if k < 1 or k exceeds the mask count.
MaskMapping spectralBaseline(const SimilarityMatrix& m, const MaskConfidences& conf, int k,
                             std::uint64_t seed = 0x9e3779b97f4a7c15ull);

}  // namespace mvsseg

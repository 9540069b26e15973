#include "mvsseg/maxflow.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mvsseg {

MaxFlow::MaxFlow(std::int32_t nodeCount) {
	if (nodeCount < 0) throw std::invalid_argument("maxflow: negative node count");
	const std::size_t n = static_cast<std::size_t>(nodeCount);
	firstArc_.assign(n, kNoArc);
	excess_.assign(n, 0.0);
	tree_.assign(n, Tree::Free);
	parentArc_.assign(n, kNoArc);
	nextActive_.assign(n, -1);
	queued_.assign(n, 0);
	timestamp_.assign(n, 0);
	dist_.assign(n, 0);
}

void MaxFlow::addTerminal(std::int32_t v, double sourceCap, double sinkCap) {
	// Fold the node's running excess into the new pair so repeated calls
	// accumulate; the overlap of the two capacities flows immediately.
	const double delta = excess_[v];
	if (delta > 0.0)
		sourceCap += delta;
	else
		sinkCap -= delta;
	flow_ += std::min(sourceCap, sinkCap);
	excess_[v] = sourceCap - sinkCap;
}

void MaxFlow::addEdge(std::int32_t u, std::int32_t v, double cap, double reverseCap) {
	arcs_.push_back({v, kNoArc, cap});
	tails_.push_back(u);
	arcs_.push_back({u, kNoArc, reverseCap});
	tails_.push_back(v);
}

void MaxFlow::setActive(std::int32_t v) {
	if (queued_[v]) return;
	queued_[v] = 1;
	nextActive_[v] = -1;
	if (activeLast_ >= 0)
		nextActive_[activeLast_] = v;
	else
		activeFirst_ = v;
	activeLast_ = v;
}

std::int32_t MaxFlow::popActive() {
	const std::int32_t v = activeFirst_;
	if (v >= 0) {
		activeFirst_ = nextActive_[v];
		if (activeFirst_ < 0) activeLast_ = -1;
		queued_[v] = 0;
	}
	return v;
}

void MaxFlow::addOrphan(std::int32_t v) {
	parentArc_[v] = kOrphanArc;
	orphans_.push_back(v);
}

void MaxFlow::augment(std::int32_t connector) {
	const std::int32_t u = arcs_[sister(connector)].head;
	const std::int32_t v = arcs_[connector].head;

	double b = arcs_[connector].rCap;
	std::int32_t x = u;
	while (parentArc_[x] != kTerminalArc) {
		const std::int32_t p = parentArc_[x];
		b = std::min(b, arcs_[sister(p)].rCap);  // residual parent -> x
		x = arcs_[p].head;
	}
	b = std::min(b, excess_[x]);
	x = v;
	while (parentArc_[x] != kTerminalArc) {
		const std::int32_t p = parentArc_[x];
		b = std::min(b, arcs_[p].rCap);  // residual x -> parent, toward the sink
		x = arcs_[p].head;
	}
	b = std::min(b, -excess_[x]);

	arcs_[connector].rCap -= b;
	arcs_[sister(connector)].rCap += b;
	x = u;
	while (parentArc_[x] != kTerminalArc) {
		const std::int32_t p = parentArc_[x];
		arcs_[sister(p)].rCap -= b;
		arcs_[p].rCap += b;
		if (arcs_[sister(p)].rCap == 0.0) addOrphan(x);
		x = arcs_[p].head;
	}
	excess_[x] -= b;
	if (excess_[x] == 0.0) addOrphan(x);
	x = v;
	while (parentArc_[x] != kTerminalArc) {
		const std::int32_t p = parentArc_[x];
		arcs_[p].rCap -= b;
		arcs_[sister(p)].rCap += b;
		if (arcs_[p].rCap == 0.0) addOrphan(x);
		x = arcs_[p].head;
	}
	excess_[x] += b;
	if (excess_[x] == 0.0) addOrphan(x);
	flow_ += b;
}

void MaxFlow::adopt(std::int32_t v) {
	const Tree t = tree_[v];

	// Distance to the terminal through valid parents; -1 when the chain hits
	// an orphan. Results are memoized per phase through the timestamps.
	const auto rootedDistance = [&](std::int32_t start) -> std::int32_t {
		std::int32_t x = start;
		std::int32_t steps = 0;
		std::int32_t total;
		while (true) {
			if (timestamp_[x] == time_) {
				total = dist_[x] + steps;
				break;
			}
			const std::int32_t p = parentArc_[x];
			if (p == kTerminalArc) {
				timestamp_[x] = time_;
				dist_[x] = 1;
				total = 1 + steps;
				break;
			}
			if (p < 0) return -1;  // orphaned or detached chain
			++steps;
			x = arcs_[p].head;
		}
		std::int32_t d = total;
		x = start;
		while (timestamp_[x] != time_) {
			timestamp_[x] = time_;
			dist_[x] = d--;
			x = arcs_[parentArc_[x]].head;
		}
		return total;
	};

	std::int32_t bestArc = kNoArc;
	std::int32_t bestDist = std::numeric_limits<std::int32_t>::max();
	for (std::int32_t a = firstArc_[v]; a != kNoArc; a = arcs_[a].next) {
		const double residual = t == Tree::Source ? arcs_[sister(a)].rCap : arcs_[a].rCap;
		if (residual <= 0.0) continue;
		const std::int32_t j = arcs_[a].head;
		if (tree_[j] != t) continue;
		const std::int32_t d = rootedDistance(j);
		if (d >= 0 && d < bestDist) {
			bestDist = d;
			bestArc = a;
		}
	}
	if (bestArc != kNoArc) {
		parentArc_[v] = bestArc;
		dist_[v] = bestDist + 1;
		timestamp_[v] = time_;
		return;
	}

	// No parent found: v leaves its tree; former neighbors may regrow into
	// the gap and v's children become orphans themselves.
	for (std::int32_t a = firstArc_[v]; a != kNoArc; a = arcs_[a].next) {
		const std::int32_t j = arcs_[a].head;
		if (tree_[j] != t) continue;
		const double residual = t == Tree::Source ? arcs_[sister(a)].rCap : arcs_[a].rCap;
		if (residual > 0.0) setActive(j);
		const std::int32_t p = parentArc_[j];
		if (p >= 0 && arcs_[p].head == v) addOrphan(j);
	}
	tree_[v] = Tree::Free;
}

double MaxFlow::solve() {
	if (solved_) throw std::logic_error("maxflow: solve() may run only once");
	solved_ = true;

	// Chain the arc lists in insertion order per tail.
	for (std::int32_t a = static_cast<std::int32_t>(arcs_.size()) - 1; a >= 0; --a) {
		arcs_[a].next = firstArc_[tails_[a]];
		firstArc_[tails_[a]] = a;
	}

	const std::int32_t n = static_cast<std::int32_t>(excess_.size());
	for (std::int32_t v = 0; v < n; ++v) {
		if (excess_[v] > 0.0) {
			tree_[v] = Tree::Source;
			parentArc_[v] = kTerminalArc;
			dist_[v] = 1;
			setActive(v);
		} else if (excess_[v] < 0.0) {
			tree_[v] = Tree::Sink;
			parentArc_[v] = kTerminalArc;
			dist_[v] = 1;
			setActive(v);
		}
	}

	while (true) {
		const std::int32_t v = popActive();
		if (v < 0) break;
		if (tree_[v] == Tree::Free) continue;

		std::int32_t connector = kNoArc;
		if (tree_[v] == Tree::Source) {
			for (std::int32_t a = firstArc_[v]; a != kNoArc; a = arcs_[a].next) {
				if (arcs_[a].rCap <= 0.0) continue;
				const std::int32_t j = arcs_[a].head;
				if (tree_[j] == Tree::Free) {
					tree_[j] = Tree::Source;
					parentArc_[j] = sister(a);
					dist_[j] = dist_[v] + 1;
					timestamp_[j] = timestamp_[v];
					setActive(j);
				} else if (tree_[j] == Tree::Sink) {
					connector = a;
					break;
				}
			}
		} else {
			for (std::int32_t a = firstArc_[v]; a != kNoArc; a = arcs_[a].next) {
				if (arcs_[sister(a)].rCap <= 0.0) continue;
				const std::int32_t j = arcs_[a].head;
				if (tree_[j] == Tree::Free) {
					tree_[j] = Tree::Sink;
					parentArc_[j] = sister(a);
					dist_[j] = dist_[v] + 1;
					timestamp_[j] = timestamp_[v];
					setActive(j);
				} else if (tree_[j] == Tree::Source) {
					connector = sister(a);  // oriented source side -> sink side
					break;
				}
			}
		}
		if (connector == kNoArc) continue;

		setActive(v);  // rescan v: it may hold further connections
		++time_;
		augment(connector);
		for (std::size_t o = 0; o < orphans_.size(); ++o) adopt(orphans_[o]);
		orphans_.clear();
	}
	return flow_;
}

}  // namespace mvsseg

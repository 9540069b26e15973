#pragma once

#include <cstdint>
#include <vector>

namespace mvsseg {

/// Binary min-cut solver: augmenting paths over reusable source/sink search
/// trees, the construction commonly used for vision MRFs. Capacities are
/// doubles; the computed flow equals the min-cut value. Deterministic: arcs
/// are visited in insertion order and the active queue is FIFO.
///
/// Usage: addTerminal/addEdge, one solve(), then sourceSide() per node.
/// Nodes unreachable from either terminal end on the sink side.
class MaxFlow {
public:
	explicit MaxFlow(std::int32_t nodeCount);

	/// Adds capacity source->v and v->sink. Callable repeatedly; capacities
	/// accumulate.
	void addTerminal(std::int32_t v, double sourceCap, double sinkCap);

	/// Adds a residual arc pair u->v (cap) and v->u (reverseCap).
	void addEdge(std::int32_t u, std::int32_t v, double cap, double reverseCap);

	/// Returns the max-flow value. Call once.
	double solve();

	/// True if v sits on the source side of the min cut. Valid after solve().
	bool sourceSide(std::int32_t v) const { return tree_[v] == Tree::Source; }

private:
	enum class Tree : std::uint8_t { Free, Source, Sink };

	struct Arc {
		std::int32_t head;
		std::int32_t next;  // next arc out of the same tail, -1 ends
		double rCap;
	};

	static constexpr std::int32_t kNoArc = -1;
	static constexpr std::int32_t kTerminalArc = -2;
	static constexpr std::int32_t kOrphanArc = -3;

	std::int32_t sister(std::int32_t a) const { return a ^ 1; }
	void setActive(std::int32_t v);
	std::int32_t popActive();
	void addOrphan(std::int32_t v);
	void augment(std::int32_t connector);
	void adopt(std::int32_t v);

	std::vector<Arc> arcs_;
	std::vector<std::int32_t> tails_;  // arc tails; lists are chained in solve()
	std::vector<std::int32_t> firstArc_;
	std::vector<double> excess_;  // >0 capacity from source, <0 toward sink
	std::vector<Tree> tree_;
	std::vector<std::int32_t> parentArc_;  // arc from node to its tree parent
	std::vector<std::int32_t> nextActive_;
	std::vector<std::uint8_t> queued_;
	std::vector<std::uint64_t> timestamp_;
	std::vector<std::int32_t> dist_;
	std::vector<std::int32_t> orphans_;
	std::int32_t activeFirst_ = -1;
	std::int32_t activeLast_ = -1;
	std::uint64_t time_ = 0;
	double flow_ = 0.0;
	bool solved_ = false;
};

}  // namespace mvsseg

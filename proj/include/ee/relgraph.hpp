#ifndef EE_RELGRAPH_HPP
#define EE_RELGRAPH_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace ee {

// Edge classes: 0 is NoRelation, 1..kNumRelationClasses are the relation
// labels in a fixed order.
using EdgeClass = int;

inline constexpr EdgeClass kNoRelation = 0;
inline constexpr int kNumRelationClasses = 16;
inline constexpr int kNumEdgeClasses = kNumRelationClasses + 1;

const std::vector<std::string>& relation_class_names();
EdgeClass relation_class_id(const std::string& name);  // throws on unknown
const std::string& edge_class_name(EdgeClass c);       // "NoRelation" for 0

// Dense directed edge labelling over the ordered distinct pairs of one
// document's entities. Every pair holds exactly one class; NoRelation is the
// default.
class RelationGraph {
 public:
  RelationGraph() = default;
  explicit RelationGraph(int n_nodes)
      : n_(n_nodes), edges_(static_cast<size_t>(n_nodes) * n_nodes, kNoRelation) {}

  int n_nodes() const { return n_; }

  EdgeClass at(int head, int tail) const {
    check(head, tail);
    return edges_[static_cast<size_t>(head) * n_ + tail];
  }
  void set(int head, int tail, EdgeClass c) {
    check(head, tail);
    edges_[static_cast<size_t>(head) * n_ + tail] = c;
  }

  int count_edges() const;  // non-NoRelation entries

  bool operator==(const RelationGraph&) const = default;

 private:
  void check(int head, int tail) const;

  int n_ = 0;
  std::vector<EdgeClass> edges_;
};

struct Pair {
  int head = 0;
  int tail = 0;
  bool operator==(const Pair&) const = default;
  bool operator<(const Pair& o) const {
    return head != o.head ? head < o.head : tail < o.tail;
  }
};

// |rank(i) - rank(j)| in document appearance order.
int entity_distance(int i, int j);

// All ordered pairs (i, j), i != j, with d1 <= distance < d2. d2 < 0 means
// unbounded. Pairs come out in (head, tail) order for determinism.
std::vector<Pair> pairs_at_distance(int n_nodes, int d1, int d2);

// Close-first schedule: bucket k (0-based) holds distance k+1 pairs, the last
// bucket everything at distance >= d_max.
struct EditSchedule {
  std::vector<std::vector<Pair>> buckets;
  int d_max = 0;
};

EditSchedule build_schedule(int n_nodes, int d_max);

// All ordered pairs shuffled into n_buckets buckets of near-equal size.
EditSchedule random_schedule(int n_nodes, int n_buckets, uint64_t seed);

// Exactly n_edges random distinct pairs with uniform random relation classes
// (never NoRelation).
RelationGraph init_random_graph(int n_nodes, int n_edges, uint64_t seed);

// JSON round-trip: {"doc_id": ..., "n_nodes": ..., "edges": [{head, tail,
// label}]}, only non-NoRelation edges listed, sorted by (head, tail).
std::string graph_to_json(const RelationGraph& graph, const std::string& doc_id);
RelationGraph graph_from_json(const std::string& json, std::string* doc_id = nullptr);

}  // namespace ee

#endif  // EE_RELGRAPH_HPP

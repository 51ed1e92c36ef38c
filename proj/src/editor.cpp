#include "ee/editor.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

namespace ee {

std::string EditTrace::to_jsonl(const std::string& doc_id) const {
  std::ostringstream out;
  for (const auto& d : decisions) {
    nlohmann::json j;
    j["doc_id"] = doc_id;
    j["round"] = d.round;
    j["distance"] = d.distance;
    j["head"] = d.pair.head;
    j["tail"] = d.pair.tail;
    j["before"] = edge_class_name(d.before);
    j["after"] = edge_class_name(d.after);
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<EdgeClass> edit_round(Tape& tape, const EdgeModel& model,
                                  ParamStore& store, Value* nodes,
                                  const RelationGraph& snapshot,
                                  const std::vector<Pair>& bucket) {
  Value* enriched = model.gcn_forward(tape, store, nodes, snapshot);
  Value* reps = model.encode_edges(tape, store, enriched, snapshot, bucket);
  std::mt19937_64 unused_rng(0);  // dropout is off at inference
  Value* probs = model.classify_edges(tape, store, reps, false, unused_rng);
  std::vector<EdgeClass> out;
  out.reserve(bucket.size());
  for (size_t r = 0; r < bucket.size(); ++r)
    out.push_back(EdgeModel::predicted_class(probs, static_cast<int>(r)));
  return out;
}

EditResult edit_graph(const Document& doc, const RelationGraph& initial,
                      const EdgeModel& model, ParamStore& store,
                      const EditSchedule& schedule,
                      const NodeVectorFile* sidecar) {
  int n = static_cast<int>(doc.entities.size());
  if (initial.n_nodes() != n)
    throw std::invalid_argument("edit_graph: initial graph node count " +
                                std::to_string(initial.n_nodes()) +
                                " does not match document " + doc.doc_id);
  size_t scheduled = 0;
  for (const auto& bucket : schedule.buckets) scheduled += bucket.size();
  if (scheduled != static_cast<size_t>(n) * std::max(0, n - 1))
    throw std::invalid_argument("edit_graph: schedule does not cover " +
                                doc.doc_id);

  EditResult result{initial, {}};
  if (n < 2) return result;

  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc, sidecar);
  for (size_t round = 0; round < schedule.buckets.size(); ++round) {
    const auto& bucket = schedule.buckets[round];
    if (bucket.empty()) continue;
    RelationGraph snapshot = result.graph;
    std::vector<EdgeClass> decisions =
        edit_round(tape, model, store, nodes, snapshot, bucket);
    for (size_t k = 0; k < bucket.size(); ++k) {
      const Pair& p = bucket[k];
      result.trace.decisions.push_back(
          {static_cast<int>(round), entity_distance(p.head, p.tail), p,
           snapshot.at(p.head, p.tail), decisions[k]});
      result.graph.set(p.head, p.tail, decisions[k]);
    }
    ++result.trace.rounds;
  }
  return result;
}

}  // namespace ee

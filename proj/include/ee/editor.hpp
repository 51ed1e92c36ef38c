#ifndef EE_EDITOR_HPP
#define EE_EDITOR_HPP

#include <string>
#include <vector>

#include "ee/corpus.hpp"
#include "ee/model.hpp"
#include "ee/relgraph.hpp"

namespace ee {

struct EditDecision {
  int round = 0;     // 0-based bucket index
  int distance = 0;  // appearance-order distance of the pair
  Pair pair;
  EdgeClass before = kNoRelation;
  EdgeClass after = kNoRelation;
};

struct EditTrace {
  std::vector<EditDecision> decisions;
  int rounds = 0;

  // One JSON object per decision, for debugging and case studies.
  std::string to_jsonl(const std::string& doc_id) const;
};

struct EditResult {
  RelationGraph graph;
  EditTrace trace;
};

// Classifies every pair of one bucket against an immutable graph snapshot;
// decisions cannot observe each other. `nodes` is the document-encoded node
// matrix (computed once per document).
std::vector<EdgeClass> edit_round(Tape& tape, const EdgeModel& model,
                                  ParamStore& store, Value* nodes,
                                  const RelationGraph& snapshot,
                                  const std::vector<Pair>& bucket);

// Iterative close-first editing: per bucket, re-enrich nodes on the current
// graph, classify the bucket's pairs against that snapshot, then commit all
// of the bucket's new classes at once. Later buckets see earlier edits; each
// ordered pair is edited exactly once.
EditResult edit_graph(const Document& doc, const RelationGraph& initial,
                      const EdgeModel& model, ParamStore& store,
                      const EditSchedule& schedule,
                      const NodeVectorFile* sidecar = nullptr);

}  // namespace ee

#endif  // EE_EDITOR_HPP

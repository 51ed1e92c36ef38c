#ifndef EE_TRAINING_HPP
#define EE_TRAINING_HPP

#include <functional>
#include <string>
#include <vector>

#include "ee/corpus.hpp"
#include "ee/model.hpp"
#include "ee/relgraph.hpp"
#include "ee/rules.hpp"

namespace ee {

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.001;
  uint64_t seed = 0;
  // What the classifier sees while training:
  // gold       - gold classes on closer-distance pairs (teacher forcing),
  //              empty elsewhere
  // rule_init  - gold on closer pairs, the rule extractor's output elsewhere
  // empty_init - an empty graph throughout (no teacher forcing)
  // self_exposure replaces the teacher-forced gold classes with the model's
  // own earlier-bucket decisions (no gradient through them).
  enum class Exposure { gold, rule_init, empty_init };
  Exposure exposure = Exposure::gold;
  bool self_exposure = false;
  bool shuffle = true;
  int checkpoint_every = 0;            // epochs between snapshots; 0 = off
  std::string out_dir;                 // where snapshots land when enabled
};

struct TrainingView {
  RelationGraph input;        // graph visible to the classifier
  std::vector<Pair> pairs;    // the pairs supervised by this view
  std::vector<int> targets;   // gold class per pair
};

// Gold graph of a document as a RelationGraph.
RelationGraph gold_graph(const Document& doc);

// Per-distance-bucket supervision mirroring inference: bucket k's input graph
// carries gold classes on all pairs of smaller distance (except under
// empty_init, which never stages gold) and initial-graph classes elsewhere.
// The views' pair sets partition all ordered pairs.
std::vector<TrainingView> build_training_views(const Document& doc,
                                               const RelationGraph& initial,
                                               TrainConfig::Exposure exposure,
                                               int d_max);

struct EpochLog {
  int epoch = 0;
  double train_nll = 0.0;
  double dev_micro_f = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ParamStore best_params;
  int best_epoch = -1;
  double best_dev_f = -1.0;
  double best_dev_nll = 0.0;
  std::vector<EpochLog> log;

  std::string log_csv() const;
};

// Batch-size-1 Adam training of the edge classifier: one optimization step
// per document per epoch over the NLL of gold classes on all ordered pairs.
// Dev is scored each epoch by running the editor (initial graphs per the
// exposure mode) and the best-dev parameters are kept (ties broken by lower
// dev NLL). Deterministic for a fixed seed on one thread.
TrainResult train(const std::vector<Document>& train_docs,
                  const std::vector<Document>& dev_docs,
                  const EdgeModel& model, const TrainConfig& config,
                  const DictionarySet* dicts = nullptr,
                  const NodeVectorFile* sidecar = nullptr,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace ee

#endif  // EE_TRAINING_HPP

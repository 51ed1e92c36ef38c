#ifndef EE_MODEL_HPP
#define EE_MODEL_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ee/corpus.hpp"
#include "ee/relgraph.hpp"
#include "ee/tensor.hpp"

namespace ee {

// Splits text into lowercased word tokens; punctuation characters become
// single-character tokens.
std::vector<std::string> tokenize(const std::string& text);

// Token vocabulary with an unknown token at id 0.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;

  // From training documents' full text, keeping tokens seen >= min_freq times.
  static Vocabulary build(const std::vector<Document>& train_docs,
                          int min_freq = 2);
  // From an explicit token list (id = position + 1).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()) + 1; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

struct ModelConfig {
  enum class Encoder { learned_embedding, precomputed_file };
  Encoder encoder_kind = Encoder::learned_embedding;
  int token_dim = 85;       // fixed to the sidecar width for precomputed-file
  int hidden_dim = 85;
  int gcn_layers = 3;
  int fc_out_layers = 4;
  int fc_head_tail_layers = 1;
  double dropout_rate = 0.46;
  int old_class_dim = 3;
  int dist_embed_max = 3;
  int dist_embed_dim = 1;
  bool bidirectional_gcn = true;
  bool scalar_bilinear = false;  // 1-dim bilinear score instead of hidden_dim
  int d_max = 4;
  double learning_rate = 0.001;
  int epochs = 100;

  int bilinear_dim() const { return scalar_bilinear ? 1 : hidden_dim; }
  int edge_rep_dim() const {
    return bilinear_dim() + dist_embed_dim + old_class_dim;
  }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json);
};

// Precomputed per-entity vectors keyed by (doc_id, entity index); loaded from
// a JSON-lines sidecar whose first line declares {"dim": D}.
struct NodeVectorFile {
  int dim = 0;
  std::map<std::pair<std::string, int>, std::vector<double>> vectors;

  static NodeVectorFile load(const std::string& path);
};

// The edge classifier: node encoding, relational GCN enrichment, edge
// encoding, and edge classification. Parameters live in a ParamStore under
// stable names; all forward passes record onto a caller-provided Tape so the
// loss gradient reaches every parameter.
class EdgeModel {
 public:
  EdgeModel(ModelConfig config, Vocabulary vocab,
            std::vector<std::string> entity_labels);

  // Creates every parameter (idempotent for existing ones).
  void init_params(ParamStore& store, std::mt19937_64& rng) const;

  // One row per entity, width token_dim + hidden_dim (pooled tokens, then
  // the label embedding).
  Value* encode_nodes(Tape& tape, ParamStore& store, const Document& doc,
                      const NodeVectorFile* sidecar = nullptr) const;

  // gcn_layers relational-GCN layers over the current graph; with zero
  // layers, a width projection of the node matrix. Output is n x hidden_dim.
  Value* gcn_forward(Tape& tape, ParamStore& store, Value* nodes,
                     const RelationGraph& graph) const;

  // One row per pair: [bilinear(FC_head, FC_tail) ; distance embedding ;
  // current-class embedding].
  Value* encode_edges(Tape& tape, ParamStore& store, Value* enriched,
                      const RelationGraph& graph,
                      const std::vector<Pair>& pairs) const;
  Value* encode_edge(Tape& tape, ParamStore& store, Value* enriched,
                     const RelationGraph& graph, int i, int j) const;

  // Dropout (train only) -> FC stack -> row-wise softmax over the 17 edge
  // classes.
  Value* classify_edges(Tape& tape, ParamStore& store, Value* edge_reps,
                        bool train, std::mt19937_64& rng) const;

  static EdgeClass predicted_class(const Value* probs, int row = 0);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<std::string>& entity_labels() const { return labels_; }
  int label_id(const std::string& label) const;  // 0 = unknown

  // Bundles config + vocabulary + label set for checkpoint blobs.
  std::string meta_json() const;
  static EdgeModel from_meta_json(const std::string& json);

 private:
  int node_input_dim() const { return config_.token_dim + config_.hidden_dim; }

  ModelConfig config_;
  Vocabulary vocab_;
  std::vector<std::string> labels_;
  std::map<std::string, int> label_ids_;
};

// Entity label inventory of the training split (sorted, unique).
std::vector<std::string> collect_entity_labels(
    const std::vector<Document>& train_docs);

}  // namespace ee

#endif  // EE_MODEL_HPP

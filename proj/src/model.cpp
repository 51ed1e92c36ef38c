#include "ee/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ee {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenizer and vocabulary

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && !std::isalnum(c)) {
      flush();
      out.push_back(std::string(1, static_cast<char>(c)));
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::build(const std::vector<Document>& train_docs,
                             int min_freq) {
  std::map<std::string, int> freq;
  for (const auto& doc : train_docs)
    for (const auto& tok : tokenize(doc.text)) ++freq[tok];
  std::vector<std::string> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_freq) kept.push_back(tok);
  return from_tokens(kept);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.tokens_ = tokens;
  for (size_t i = 0; i < tokens.size(); ++i)
    v.ids_[tokens[i]] = static_cast<int>(i) + 1;
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

// ---------------------------------------------------------------------------
// Config serialization

std::string ModelConfig::to_json() const {
  json j;
  j["encoder_kind"] =
      encoder_kind == Encoder::learned_embedding ? "learned" : "precomputed";
  j["token_dim"] = token_dim;
  j["hidden_dim"] = hidden_dim;
  j["gcn_layers"] = gcn_layers;
  j["fc_out_layers"] = fc_out_layers;
  j["fc_head_tail_layers"] = fc_head_tail_layers;
  j["dropout_rate"] = dropout_rate;
  j["old_class_dim"] = old_class_dim;
  j["dist_embed_max"] = dist_embed_max;
  j["dist_embed_dim"] = dist_embed_dim;
  j["bidirectional_gcn"] = bidirectional_gcn;
  j["scalar_bilinear"] = scalar_bilinear;
  j["d_max"] = d_max;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.encoder_kind = j.at("encoder_kind").get<std::string>() == "learned"
                       ? Encoder::learned_embedding
                       : Encoder::precomputed_file;
  c.token_dim = j.at("token_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.gcn_layers = j.at("gcn_layers").get<int>();
  c.fc_out_layers = j.at("fc_out_layers").get<int>();
  c.fc_head_tail_layers = j.at("fc_head_tail_layers").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.old_class_dim = j.at("old_class_dim").get<int>();
  c.dist_embed_max = j.at("dist_embed_max").get<int>();
  c.dist_embed_dim = j.at("dist_embed_dim").get<int>();
  c.bidirectional_gcn = j.at("bidirectional_gcn").get<bool>();
  c.scalar_bilinear = j.at("scalar_bilinear").get<bool>();
  c.d_max = j.at("d_max").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  return c;
}

// ---------------------------------------------------------------------------
// Sidecar vectors

NodeVectorFile NodeVectorFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open node-vector file: " + path);
  NodeVectorFile file;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("node-vector file is empty: " + path);
  file.dim = json::parse(line).at("dim").get<int>();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line);
    std::vector<double> vec = j.at("vector").get<std::vector<double>>();
    if (static_cast<int>(vec.size()) != file.dim)
      throw std::runtime_error("node-vector width mismatch at line " +
                               std::to_string(line_no));
    file.vectors[{j.at("doc_id").get<std::string>(),
                  j.at("entity_index").get<int>()}] = std::move(vec);
  }
  return file;
}

// ---------------------------------------------------------------------------
// EdgeModel

std::vector<std::string> collect_entity_labels(
    const std::vector<Document>& train_docs) {
  std::set<std::string> labels;
  for (const auto& doc : train_docs)
    for (const auto& e : doc.entities) labels.insert(e.label);
  return {labels.begin(), labels.end()};
}

EdgeModel::EdgeModel(ModelConfig config, Vocabulary vocab,
                     std::vector<std::string> entity_labels)
    : config_(config), vocab_(std::move(vocab)),
      labels_(std::move(entity_labels)) {
  for (size_t i = 0; i < labels_.size(); ++i)
    label_ids_[labels_[i]] = static_cast<int>(i) + 1;  // 0 = unknown
}

int EdgeModel::label_id(const std::string& label) const {
  auto it = label_ids_.find(label);
  return it == label_ids_.end() ? 0 : it->second;
}

void EdgeModel::init_params(ParamStore& store, std::mt19937_64& rng) const {
  const int h = config_.hidden_dim;
  if (config_.encoder_kind == ModelConfig::Encoder::learned_embedding)
    store.add("tok_emb", vocab_.size(), config_.token_dim, Init::normal_002,
              rng);
  store.add("label_emb", static_cast<int>(labels_.size()) + 1, h,
            Init::normal_002, rng);

  if (config_.gcn_layers == 0) {
    store.add("node_proj", node_input_dim(), h, Init::xavier_uniform, rng);
  } else {
    for (int l = 0; l < config_.gcn_layers; ++l) {
      int in = l == 0 ? node_input_dim() : h;
      std::string prefix = "gcn" + std::to_string(l);
      store.add(prefix + ".self", in, h, Init::xavier_uniform, rng);
      for (const auto& cls : relation_class_names()) {
        store.add(prefix + ".fwd." + cls, in, h, Init::xavier_uniform, rng);
        if (config_.bidirectional_gcn)
          store.add(prefix + ".inv." + cls, in, h, Init::xavier_uniform, rng);
      }
    }
  }

  for (int k = 0; k < config_.fc_head_tail_layers; ++k) {
    for (const char* side : {"fc_head", "fc_tail"}) {
      std::string prefix = std::string(side) + std::to_string(k);
      store.add(prefix + ".w", h, h, Init::xavier_uniform, rng);
      store.add(prefix + ".b", 1, h, Init::zeros, rng);
    }
  }
  store.add("bilinear_w", h * h, config_.bilinear_dim(), Init::xavier_uniform,
            rng);
  store.add("dist_emb", config_.dist_embed_max, config_.dist_embed_dim,
            Init::normal_002, rng);
  store.add("old_emb", kNumEdgeClasses, config_.old_class_dim,
            Init::normal_002, rng);

  int in = config_.edge_rep_dim();
  for (int k = 0; k < config_.fc_out_layers; ++k) {
    int out = k + 1 == config_.fc_out_layers ? kNumEdgeClasses : h;
    std::string prefix = "fc_out" + std::to_string(k);
    store.add(prefix + ".w", in, out, Init::xavier_uniform, rng);
    store.add(prefix + ".b", 1, out, Init::zeros, rng);
    in = out;
  }
}

Value* EdgeModel::encode_nodes(Tape& tape, ParamStore& store,
                               const Document& doc,
                               const NodeVectorFile* sidecar) const {
  if (doc.entities.empty())
    throw std::runtime_error("document has no entities: " + doc.doc_id);
  Value* label_emb = tape.param(store, "label_emb");
  bool learned =
      config_.encoder_kind == ModelConfig::Encoder::learned_embedding;
  Value* tok_emb = learned ? tape.param(store, "tok_emb") : nullptr;
  if (!learned && sidecar == nullptr)
    throw std::runtime_error("precomputed encoder needs a node-vector file");

  std::vector<Value*> node_rows;
  std::vector<int> label_ids;
  for (size_t i = 0; i < doc.entities.size(); ++i) {
    const auto& ent = doc.entities[i];
    Value* pooled = nullptr;
    if (learned) {
      std::vector<int> ids;
      for (const auto& tok : tokenize(ent.surface)) ids.push_back(vocab_.id(tok));
      if (ids.empty())
        throw std::runtime_error("entity with zero tokens: " + doc.doc_id +
                                 "/" + ent.id);
      pooled = tape.maxpool_rows(tape.rows(tok_emb, ids));
    } else {
      auto it = sidecar->vectors.find({doc.doc_id, static_cast<int>(i)});
      if (it == sidecar->vectors.end())
        throw std::runtime_error("missing precomputed vector: " + doc.doc_id +
                                 "/" + ent.id);
      Mat row(1, sidecar->dim);
      for (int c = 0; c < sidecar->dim; ++c) row(0, c) = it->second[c];
      pooled = tape.constant(row);
    }
    node_rows.push_back(pooled);
    label_ids.push_back(label_id(ent.label));
  }
  Value* pooled_mat = tape.concat_rows(node_rows);
  Value* label_mat = tape.rows(label_emb, label_ids);
  return tape.concat_cols({pooled_mat, label_mat});
}

Value* EdgeModel::gcn_forward(Tape& tape, ParamStore& store, Value* nodes,
                              const RelationGraph& graph) const {
  int n = graph.n_nodes();
  if (nodes->val.rows() != n)
    throw DimensionError("gcn_forward: node count does not match graph");
  if (config_.gcn_layers == 0)
    return tape.matmul(nodes, tape.param(store, "node_proj"));

  // adjacency split by (class, direction); A(i, j) = 1/c_i for each message
  // j -> i, normalized by i's per-class in-degree
  struct ClassAdj {
    std::string param_suffix;
    Mat a;
  };
  std::vector<ClassAdj> adjacency;
  for (int c = 1; c <= kNumRelationClasses; ++c) {
    Mat fwd = Mat::Zero(n, n), inv = Mat::Zero(n, n);
    bool has_fwd = false, has_inv = false;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        if (graph.at(j, i) == c) {
          fwd(i, j) = 1.0;
          has_fwd = true;
        }
        if (config_.bidirectional_gcn && graph.at(i, j) == c) {
          inv(i, j) = 1.0;
          has_inv = true;
        }
      }
    auto normalize = [n](Mat& a) {
      for (int i = 0; i < n; ++i) {
        double deg = a.row(i).sum();
        if (deg > 0.0) a.row(i) /= deg;
      }
    };
    const std::string& name = edge_class_name(c);
    if (has_fwd) {
      normalize(fwd);
      adjacency.push_back({".fwd." + name, std::move(fwd)});
    }
    if (has_inv) {
      normalize(inv);
      adjacency.push_back({".inv." + name, std::move(inv)});
    }
  }

  Value* h = nodes;
  for (int l = 0; l < config_.gcn_layers; ++l) {
    std::string prefix = "gcn" + std::to_string(l);
    Value* acc = tape.matmul(h, tape.param(store, prefix + ".self"));
    for (const auto& adj : adjacency) {
      Value* msg = tape.matmul(h, tape.param(store, prefix + adj.param_suffix));
      acc = tape.add(acc, tape.matmul(tape.constant(adj.a), msg));
    }
    h = tape.relu(acc);
  }
  return h;
}

Value* EdgeModel::encode_edges(Tape& tape, ParamStore& store, Value* enriched,
                               const RelationGraph& graph,
                               const std::vector<Pair>& pairs) const {
  if (pairs.empty()) throw DimensionError("encode_edges: no pairs");
  std::vector<int> head_ids, tail_ids, dist_ids, old_ids;
  for (const auto& p : pairs) {
    if (p.head == p.tail)
      throw DimensionError("encode_edges: self-pair");
    head_ids.push_back(p.head);
    tail_ids.push_back(p.tail);
    int d = std::min(entity_distance(p.head, p.tail), config_.dist_embed_max);
    dist_ids.push_back(d - 1);
    old_ids.push_back(graph.at(p.head, p.tail));
  }

  auto fc_stack = [&](Value* x, const char* side) {
    for (int k = 0; k < config_.fc_head_tail_layers; ++k) {
      std::string prefix = std::string(side) + std::to_string(k);
      x = tape.relu(tape.affine(x, tape.param(store, prefix + ".w"),
                                tape.param(store, prefix + ".b")));
    }
    return x;
  };
  Value* heads = fc_stack(tape.rows(enriched, head_ids), "fc_head");
  Value* tails = fc_stack(tape.rows(enriched, tail_ids), "fc_tail");
  // a^T W b for every pair, as a flattened outer product times the stacked
  // bilinear weight
  Value* bil = tape.matmul(tape.outer_rows(heads, tails),
                           tape.param(store, "bilinear_w"));
  Value* dist = tape.rows(tape.param(store, "dist_emb"), dist_ids);
  Value* old = tape.rows(tape.param(store, "old_emb"), old_ids);
  return tape.concat_cols({bil, dist, old});
}

Value* EdgeModel::encode_edge(Tape& tape, ParamStore& store, Value* enriched,
                              const RelationGraph& graph, int i, int j) const {
  return encode_edges(tape, store, enriched, graph, {{i, j}});
}

Value* EdgeModel::classify_edges(Tape& tape, ParamStore& store,
                                 Value* edge_reps, bool train,
                                 std::mt19937_64& rng) const {
  Value* x = tape.dropout(edge_reps, config_.dropout_rate, train, rng);
  for (int k = 0; k < config_.fc_out_layers; ++k) {
    std::string prefix = "fc_out" + std::to_string(k);
    x = tape.affine(x, tape.param(store, prefix + ".w"),
                    tape.param(store, prefix + ".b"));
    if (k + 1 < config_.fc_out_layers) x = tape.relu(x);
  }
  return tape.softmax_rows(x);
}

EdgeClass EdgeModel::predicted_class(const Value* probs, int row) {
  Eigen::Index best;
  probs->val.row(row).maxCoeff(&best);
  return static_cast<EdgeClass>(best);
}

std::string EdgeModel::meta_json() const {
  json j;
  j["config"] = json::parse(config_.to_json());
  j["vocab"] = vocab_.tokens();
  j["entity_labels"] = labels_;
  return j.dump();
}

EdgeModel EdgeModel::from_meta_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig config = ModelConfig::from_json(j.at("config").dump());
  Vocabulary vocab = Vocabulary::from_tokens(
      j.at("vocab").get<std::vector<std::string>>());
  return EdgeModel(config, std::move(vocab),
                   j.at("entity_labels").get<std::vector<std::string>>());
}

}  // namespace ee

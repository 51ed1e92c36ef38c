#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "ee/model.hpp"

using namespace ee;

namespace {

// A document whose entities are single words: "w0 w1 w2 ...".
Document word_doc(const std::vector<std::string>& labels,
                  const std::vector<std::string>& words) {
  REQUIRE(labels.size() == words.size());
  Document doc;
  doc.doc_id = "fixture";
  for (size_t i = 0; i < words.size(); ++i) {
    int start = static_cast<int>(doc.text.size());
    doc.text += words[i];
    EntityMention e;
    e.id = "T" + std::to_string(i + 1);
    e.label = labels[i];
    e.fragments = {{start, static_cast<int>(doc.text.size())}};
    e.surface = words[i];
    doc.entities.push_back(e);
    doc.text += " ";
  }
  doc.sentences = {{0, static_cast<int>(doc.text.size())}};
  return doc;
}

ModelConfig small_config() {
  ModelConfig c;
  c.token_dim = 5;
  c.hidden_dim = 7;
  c.gcn_layers = 2;
  c.fc_out_layers = 3;
  c.dropout_rate = 0.3;
  return c;
}

EdgeModel small_model(const ModelConfig& config) {
  Vocabulary vocab = Vocabulary::from_tokens(
      {"mixed", "nacl", "water", "stirred", "heated", "oven"});
  return EdgeModel(config, vocab, {"Material", "Operation", "Number"});
}

}  // namespace

TEST_CASE("tokenizer lowercases, splits punctuation, keeps digits") {
  CHECK(tokenize("Mixed NaCl, then 2.5 mL") ==
        std::vector<std::string>{"mixed", "nacl", ",", "then", "2", ".", "5",
                                 "ml"});
  CHECK(tokenize("") == std::vector<std::string>{});
}

TEST_CASE("vocabulary applies the minimum frequency and maps unknowns to 0") {
  Document d1 = word_doc({"X", "X", "X"}, {"alpha", "alpha", "beta"});
  Vocabulary v = Vocabulary::build({d1}, 2);
  CHECK(v.id("alpha") > 0);
  CHECK(v.id("beta") == Vocabulary::kUnk);
  CHECK(v.id("never-seen") == Vocabulary::kUnk);
  CHECK(v.size() == 2);  // alpha + unk
}

TEST_CASE("node encoding: single-token entity pools to its token vector") {
  ModelConfig config = small_config();
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(7);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc({"Material", "Operation"}, {"nacl", "mixed"});
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  CHECK(nodes->val.rows() == 2);
  CHECK(nodes->val.cols() == config.token_dim + config.hidden_dim);
  const Mat& emb = store.value("tok_emb");
  CHECK(nodes->val.row(0).head(config.token_dim) ==
        emb.row(model.vocab().id("nacl")));
}

TEST_CASE("same text with different labels differs only in the label slice") {
  ModelConfig config = small_config();
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(8);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc({"Material", "Operation"}, {"water", "water"});
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  CHECK(nodes->val.row(0).head(config.token_dim) ==
        nodes->val.row(1).head(config.token_dim));
  CHECK(nodes->val.row(0).tail(config.hidden_dim) !=
        nodes->val.row(1).tail(config.hidden_dim));
}

TEST_CASE("precomputed node vectors come from the sidecar file") {
  std::string path = "/tmp/ee_test_vectors.jsonl";
  {
    std::ofstream out(path);
    out << "{\"dim\": 3}\n";
    out << "{\"doc_id\": \"fixture\", \"entity_index\": 0, \"vector\": [1.0, 2.0, 3.0]}\n";
  }
  ModelConfig config = small_config();
  config.encoder_kind = ModelConfig::Encoder::precomputed_file;
  config.token_dim = 3;
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(9);
  ParamStore store;
  model.init_params(store, rng);
  NodeVectorFile sidecar = NodeVectorFile::load(path);
  CHECK(sidecar.dim == 3);

  Document doc = word_doc({"Material"}, {"nacl"});
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc, &sidecar);
  CHECK(nodes->val(0, 0) == 1.0);
  CHECK(nodes->val(0, 2) == 3.0);

  Document doc2 = word_doc({"Material", "Material"}, {"nacl", "kcl"});
  Tape tape2;
  CHECK_THROWS_WITH_AS(model.encode_nodes(tape2, store, doc2, &sidecar),
                       doctest::Contains("T2"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("zero GCN layers projects the nodes and ignores the graph") {
  ModelConfig config = small_config();
  config.gcn_layers = 0;
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(10);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc({"Material", "Operation", "Number"},
                          {"nacl", "mixed", "oven"});
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  RelationGraph empty(3), busy(3);
  busy.set(0, 1, 3);
  busy.set(2, 0, 5);
  Value* a = model.gcn_forward(tape, store, nodes, empty);
  Value* b = model.gcn_forward(tape, store, nodes, busy);
  CHECK(a->val == b->val);
  CHECK(a->val.cols() == config.hidden_dim);
  CHECK(a->val == nodes->val * store.value("node_proj"));
}

TEST_CASE("empty edge set equals independent per-node self-connections") {
  ModelConfig config = small_config();
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(11);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc({"Material", "Operation", "Number", "Material"},
                          {"nacl", "mixed", "oven", "water"});
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  Value* enriched = model.gcn_forward(tape, store, nodes, RelationGraph(4));
  // oracle: run each node alone through a 1-node graph
  for (int i = 0; i < 4; ++i) {
    Tape solo;
    Value* one = solo.constant(nodes->val.row(i));
    Value* out = model.gcn_forward(solo, store, one, RelationGraph(1));
    CHECK((enriched->val.row(i) - out->val.row(0)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("one edge: tail gets a message; bidirectional also reaches the head") {
  ModelConfig config = small_config();
  config.gcn_layers = 1;
  Document doc = word_doc({"Material", "Operation"}, {"nacl", "mixed"});
  RelationGraph empty(2), one_edge(2);
  one_edge.set(0, 1, relation_class_id("Next_Operation"));
  for (bool bidir : {false, true}) {
    ModelConfig cfg = config;
    cfg.bidirectional_gcn = bidir;
    EdgeModel model = small_model(cfg);
    std::mt19937_64 rng(12);
    ParamStore store;
    model.init_params(store, rng);
    Tape tape;
    Value* nodes = model.encode_nodes(tape, store, doc);
    Value* base = model.gcn_forward(tape, store, nodes, empty);
    Value* with_edge = model.gcn_forward(tape, store, nodes, one_edge);
    bool head_changed =
        (with_edge->val.row(0) - base->val.row(0)).cwiseAbs().maxCoeff() >
        1e-12;
    bool tail_changed =
        (with_edge->val.row(1) - base->val.row(1)).cwiseAbs().maxCoeff() >
        1e-12;
    CHECK(tail_changed);
    CHECK(head_changed == bidir);
  }
}

TEST_CASE("permuting class weights with the edge labels leaves output fixed") {
  ModelConfig config = small_config();
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(13);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc({"Material", "Operation", "Number"},
                          {"nacl", "mixed", "oven"});
  int a = relation_class_id("Next_Operation");
  int b = relation_class_id("Brand_Of");
  RelationGraph g(3);
  g.set(0, 1, a);
  g.set(2, 0, b);

  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  Mat before = model.gcn_forward(tape, store, nodes, g)->val;

  // swap the two classes' weights everywhere and relabel the edges to match
  ParamStore swapped = store;
  for (int l = 0; l < config.gcn_layers; ++l)
    for (const char* dir : {".fwd.", ".inv."}) {
      std::string pa = "gcn" + std::to_string(l) + dir + "Next_Operation";
      std::string pb = "gcn" + std::to_string(l) + dir + "Brand_Of";
      std::swap(swapped.value(pa), swapped.value(pb));
    }
  RelationGraph g2(3);
  g2.set(0, 1, b);
  g2.set(2, 0, a);
  Tape tape2;
  Value* nodes2 = model.encode_nodes(tape2, swapped, doc);
  Mat after = model.gcn_forward(tape2, swapped, nodes2, g2)->val;
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("edge representation: distance clipping and old-class embedding") {
  ModelConfig config = small_config();
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(14);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc(
      {"Material", "Operation", "Number", "Material", "Operation", "Number"},
      {"nacl", "mixed", "oven", "water", "stirred", "heated"});
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  RelationGraph g(6);
  g.set(0, 5, relation_class_id("Condition_Of"));
  Value* enriched = model.gcn_forward(tape, store, nodes, g);

  Value* e05 = model.encode_edge(tape, store, enriched, g, 0, 5);  // dist 5
  Value* e03 = model.encode_edge(tape, store, enriched, g, 0, 3);  // dist 3
  Value* e01 = model.encode_edge(tape, store, enriched, g, 0, 1);  // dist 1
  CHECK(e05->val.cols() == config.edge_rep_dim());
  int bil = config.bilinear_dim();
  // distance 5 clips to dist_embed_max = 3
  CHECK(e05->val(0, bil) == e03->val(0, bil));
  CHECK(e01->val(0, bil) != e03->val(0, bil));
  // labelled pair carries that class's embedding, unlabelled NoRelation's
  const Mat& old_emb = store.value("old_emb");
  CHECK(e05->val.row(0).tail(config.old_class_dim) ==
        old_emb.row(relation_class_id("Condition_Of")));
  CHECK(e03->val.row(0).tail(config.old_class_dim) == old_emb.row(kNoRelation));
}

TEST_CASE("classification is a distribution, deterministic in eval mode") {
  ModelConfig config = small_config();
  EdgeModel model = small_model(config);
  std::mt19937_64 rng(15);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = word_doc({"Material", "Operation"}, {"nacl", "mixed"});
  RelationGraph g(2);
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  Value* enriched = model.gcn_forward(tape, store, nodes, g);
  Value* reps = model.encode_edges(tape, store, enriched, g, {{0, 1}, {1, 0}});
  std::mt19937_64 drop_rng(1);
  Value* probs = model.classify_edges(tape, store, reps, false, drop_rng);
  CHECK(probs->val.rows() == 2);
  CHECK(probs->val.cols() == kNumEdgeClasses);
  for (int r = 0; r < 2; ++r)
    CHECK(probs->val.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
  EdgeClass pred = EdgeModel::predicted_class(probs, 0);
  CHECK(probs->val(0, pred) == probs->val.row(0).maxCoeff());

  // repeated eval-mode calls and per-pair calls agree with the batch
  Tape tape2;
  Value* nodes2 = model.encode_nodes(tape2, store, doc);
  Value* enriched2 = model.gcn_forward(tape2, store, nodes2, g);
  Value* single = model.encode_edge(tape2, store, enriched2, g, 1, 0);
  std::mt19937_64 drop_rng2(99);
  Value* probs2 = model.classify_edges(tape2, store, single, false, drop_rng2);
  CHECK((probs2->val.row(0) - probs->val.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full-model loss gradient passes finite differences") {
  ModelConfig config = small_config();
  config.gcn_layers = 1;  // keep the FD run quick
  EdgeModel model = small_model(config);
  Document doc = word_doc({"Material", "Operation", "Number"},
                          {"nacl", "mixed", "oven"});
  RelationGraph g(3);
  g.set(0, 1, relation_class_id("Participant_Material"));
  std::vector<Pair> pairs = pairs_at_distance(3, 1, -1);
  std::vector<int> targets;
  for (const auto& p : pairs)
    targets.push_back(p.head == 0 && p.tail == 1
                          ? relation_class_id("Participant_Material")
                          : kNoRelation);
  auto loss = [&](ParamStore& s) {
    Tape tape;
    std::mt19937_64 rng(0);
    Value* nodes = model.encode_nodes(tape, s, doc);
    Value* enriched = model.gcn_forward(tape, s, nodes, g);
    Value* reps = model.encode_edges(tape, s, enriched, g, pairs);
    Value* probs = model.classify_edges(tape, s, reps, false, rng);
    Value* out = tape.nll_loss(probs, targets);
    tape.backward(out);
    return out->val(0, 0);
  };
  std::mt19937_64 rng(16);
  ParamStore store;
  model.init_params(store, rng);
  CHECK(grad_check(loss, store, 1e-5, 100, 16) < 1e-4);
}

TEST_CASE("model metadata round-trips through JSON") {
  ModelConfig config = small_config();
  config.scalar_bilinear = true;
  EdgeModel model = small_model(config);
  EdgeModel copy = EdgeModel::from_meta_json(model.meta_json());
  CHECK(copy.meta_json() == model.meta_json());
  CHECK(copy.config().hidden_dim == config.hidden_dim);
  CHECK(copy.config().scalar_bilinear);
  CHECK(copy.vocab().id("water") == model.vocab().id("water"));
  CHECK(copy.label_id("Operation") == model.label_id("Operation"));
}

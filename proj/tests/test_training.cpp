#include <doctest.h>

#include <random>
#include <set>

#include "ee/training.hpp"

using namespace ee;

namespace {

// Documents with a learnable pattern: each "opN mat mat" sentence carries
// Participant_Material edges from the operation to both materials and
// Next_Operation chains between operations.
Document pattern_doc(const std::string& id, int n_ops, int word_offset) {
  Document doc;
  doc.doc_id = id;
  auto add_entity = [&](const std::string& label, const std::string& word) {
    int start = static_cast<int>(doc.text.size());
    doc.text += word;
    EntityMention e;
    e.id = "T" + std::to_string(doc.entities.size() + 1);
    e.label = label;
    e.fragments = {{start, static_cast<int>(doc.text.size())}};
    e.surface = word;
    doc.entities.push_back(e);
    doc.text += " ";
    return static_cast<int>(doc.entities.size()) - 1;
  };
  int prev_op = -1;
  for (int k = 0; k < n_ops; ++k) {
    int op = add_entity("Operation", "op" + std::to_string(word_offset + k));
    int m1 = add_entity("Material", "mat" + std::to_string(word_offset + k));
    int m2 = add_entity("Material", "aux" + std::to_string(word_offset + k));
    doc.relations.push_back({op, m1, "Participant_Material"});
    doc.relations.push_back({op, m2, "Participant_Material"});
    if (prev_op >= 0) doc.relations.push_back({prev_op, op, "Next_Operation"});
    prev_op = op;
  }
  doc.sentences = {{0, static_cast<int>(doc.text.size())}};
  return doc;
}

std::vector<Document> fixture_corpus() {
  return {pattern_doc("a", 2, 0), pattern_doc("b", 3, 2),
          pattern_doc("c", 2, 5)};
}

EdgeModel fixture_model() {
  ModelConfig config;
  config.token_dim = 8;
  config.hidden_dim = 10;
  config.gcn_layers = 1;
  config.fc_out_layers = 2;
  config.dropout_rate = 0.1;
  config.d_max = 3;
  std::vector<Document> docs = fixture_corpus();
  return EdgeModel(config, Vocabulary::build(docs, 1),
                   collect_entity_labels(docs));
}

}  // namespace

TEST_CASE("gold graphs mirror a document's relation list") {
  Document doc = pattern_doc("x", 2, 0);
  RelationGraph g = gold_graph(doc);
  CHECK(g.count_edges() == static_cast<int>(doc.relations.size()));
  for (const auto& r : doc.relations)
    CHECK(g.at(r.head, r.tail) == relation_class_id(r.label));
}

TEST_CASE("training views partition all pairs and stage gold by distance") {
  Document doc = pattern_doc("x", 3, 0);  // 9 entities
  int n = 9;
  RelationGraph initial(n);
  initial.set(0, 5, relation_class_id("Brand_Of"));  // distance 5
  auto views =
      build_training_views(doc, initial, TrainConfig::Exposure::gold, 4);
  REQUIRE(views.size() == 4);

  // first view's input is the untouched initial graph
  CHECK(views[0].input == initial);

  // pair sets partition all ordered pairs (enumeration oracle)
  std::set<Pair> seen;
  for (const auto& v : views) {
    REQUIRE(v.pairs.size() == v.targets.size());
    for (const auto& p : v.pairs) CHECK(seen.insert(p).second);
  }
  CHECK(seen.size() == static_cast<size_t>(n * (n - 1)));

  // the final view's input carries gold on every closer pair
  RelationGraph gold = gold_graph(doc);
  const auto& last = views.back();
  for (const auto& p : pairs_at_distance(n, 1, 4))
    CHECK(last.input.at(p.head, p.tail) == gold.at(p.head, p.tail));
  // and initial-graph classes on its own pairs
  CHECK(last.input.at(0, 5) == relation_class_id("Brand_Of"));

  // empty_init never stages gold: every view sees the initial graph
  for (const auto& v : build_training_views(
           doc, initial, TrainConfig::Exposure::empty_init, 4))
    CHECK(v.input == initial);
}

TEST_CASE("targets are the gold classes of each view's pairs") {
  Document doc = pattern_doc("x", 2, 0);
  int n = static_cast<int>(doc.entities.size());
  RelationGraph gold = gold_graph(doc);
  for (const auto& v : build_training_views(doc, RelationGraph(n),
                                            TrainConfig::Exposure::gold, 3))
    for (size_t k = 0; k < v.pairs.size(); ++k)
      CHECK(v.targets[k] == gold.at(v.pairs[k].head, v.pairs[k].tail));
}

TEST_CASE("gradient flow reaches every parameter group") {
  EdgeModel model = fixture_model();
  std::mt19937_64 rng(1);
  ParamStore store;
  model.init_params(store, rng);
  Document doc = pattern_doc("x", 3, 0);
  RelationGraph gold = gold_graph(doc);
  std::vector<Pair> pairs = pairs_at_distance(9, 1, -1);
  std::vector<int> targets;
  for (const auto& p : pairs) targets.push_back(gold.at(p.head, p.tail));

  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc);
  Value* enriched = model.gcn_forward(tape, store, nodes, gold);
  Value* reps = model.encode_edges(tape, store, enriched, gold, pairs);
  Value* probs = model.classify_edges(tape, store, reps, true, rng);
  Value* loss = tape.nll_loss(probs, targets);
  tape.backward(loss);

  for (const char* name : {"tok_emb", "label_emb", "gcn0.self",
                           "gcn0.fwd.Participant_Material",
                           "gcn0.inv.Participant_Material", "fc_head0.w",
                           "fc_tail0.w", "bilinear_w", "dist_emb", "old_emb",
                           "fc_out0.w", "fc_out1.w"})
    CHECK(store.grad(name).norm() > 0.0);
}

TEST_CASE("training reduces the loss on a small fixture") {
  EdgeModel model = fixture_model();
  TrainConfig config;
  config.epochs = 40;
  config.learning_rate = 0.005;
  config.seed = 5;
  config.exposure = TrainConfig::Exposure::gold;
  std::vector<Document> docs = fixture_corpus();
  TrainResult result = train(docs, {}, model, config);
  REQUIRE(result.log.size() == 40);
  CHECK(result.log.back().train_nll < result.log.front().train_nll);
  CHECK(result.log.back().train_nll < 0.25 * result.log.front().train_nll);
}

TEST_CASE("fixed seeds give bit-identical loss curves") {
  EdgeModel model = fixture_model();
  TrainConfig config;
  config.epochs = 5;
  config.seed = 9;
  std::vector<Document> docs = fixture_corpus();
  TrainResult a = train(docs, {docs[0]}, model, config);
  TrainResult b = train(docs, {docs[0]}, model, config);
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_nll == b.log[i].train_nll);
    CHECK(a.log[i].dev_micro_f == b.log[i].dev_micro_f);
  }
  CHECK(a.best_params == b.best_params);

  TrainConfig other = config;
  other.seed = 10;
  TrainResult c = train(docs, {docs[0]}, model, other);
  CHECK(a.log[4].train_nll != c.log[4].train_nll);
}

TEST_CASE("best-dev selection tracks the logged maximum") {
  EdgeModel model = fixture_model();
  TrainConfig config;
  config.epochs = 12;
  config.seed = 3;
  config.learning_rate = 0.005;
  std::vector<Document> docs = fixture_corpus();
  TrainResult result = train({docs[0], docs[1]}, {docs[2]}, model, config);
  double best = -1.0;
  for (const auto& row : result.log) best = std::max(best, row.dev_micro_f);
  CHECK(result.best_dev_f == best);
  CHECK(result.best_epoch >= 1);
}

TEST_CASE("empty training split and missing dictionaries are errors") {
  EdgeModel model = fixture_model();
  TrainConfig config;
  config.epochs = 1;
  CHECK_THROWS(train({}, {}, model, config));
  config.exposure = TrainConfig::Exposure::rule_init;
  CHECK_THROWS(train(fixture_corpus(), {}, model, config));  // dicts == nullptr
}

TEST_CASE("rule-init and self-exposure modes run end to end") {
  EdgeModel model = fixture_model();
  std::vector<Document> docs = fixture_corpus();
  DictionarySet dicts = build_dictionaries(docs);
  TrainConfig config;
  config.epochs = 2;
  config.seed = 4;
  config.exposure = TrainConfig::Exposure::rule_init;
  TrainResult a = train(docs, {docs[0]}, model, config, &dicts);
  CHECK(a.log.size() == 2);
  config.self_exposure = true;
  TrainResult b = train(docs, {docs[0]}, model, config, &dicts);
  CHECK(b.log.size() == 2);
}

TEST_CASE("the CSV log has one row per epoch") {
  EdgeModel model = fixture_model();
  TrainConfig config;
  config.epochs = 3;
  config.seed = 1;
  TrainResult result = train(fixture_corpus(), {}, model, config);
  std::string csv = result.log_csv();
  CHECK(csv.rfind("epoch,train_nll,dev_micro_f,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

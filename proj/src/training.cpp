#include "ee/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ee/editor.hpp"
#include "ee/metrics.hpp"

namespace ee {

RelationGraph gold_graph(const Document& doc) {
  RelationGraph g(static_cast<int>(doc.entities.size()));
  for (const auto& rel : doc.relations)
    g.set(rel.head, rel.tail, relation_class_id(rel.label));
  return g;
}

std::vector<TrainingView> build_training_views(const Document& doc,
                                               const RelationGraph& initial,
                                               TrainConfig::Exposure exposure,
                                               int d_max) {
  int n = static_cast<int>(doc.entities.size());
  RelationGraph gold = gold_graph(doc);
  RelationGraph current = initial;
  bool teacher_force = exposure != TrainConfig::Exposure::empty_init;
  std::vector<TrainingView> views;
  for (const auto& bucket : build_schedule(n, d_max).buckets) {
    TrainingView view;
    view.input = current;
    view.pairs = bucket;
    for (const auto& p : bucket)
      view.targets.push_back(gold.at(p.head, p.tail));
    views.push_back(std::move(view));
    // closer-distance pairs carry gold classes for the next buckets
    if (teacher_force)
      for (const auto& p : bucket)
        current.set(p.head, p.tail, gold.at(p.head, p.tail));
  }
  return views;
}

namespace {

RelationGraph initial_graph(const Document& doc, TrainConfig::Exposure exposure,
                            const DictionarySet* dicts) {
  switch (exposure) {
    case TrainConfig::Exposure::gold:
    case TrainConfig::Exposure::empty_init:
      return RelationGraph(static_cast<int>(doc.entities.size()));
    case TrainConfig::Exposure::rule_init:
      if (!dicts)
        throw std::runtime_error("rule-init exposure needs dictionaries");
      return rule_extract(doc, *dicts);
  }
  throw std::logic_error("unreachable");
}

// Initial graphs for dev-time editing never contain dev gold.
RelationGraph dev_initial_graph(const Document& doc,
                                TrainConfig::Exposure exposure,
                                const DictionarySet* dicts) {
  if (exposure == TrainConfig::Exposure::rule_init && dicts)
    return rule_extract(doc, *dicts);
  return RelationGraph(static_cast<int>(doc.entities.size()));
}

// Mean NLL over all ordered pairs of one document; optionally backpropagates.
// Returns the loss value.
double document_loss(const Document& doc, const EdgeModel& model,
                     ParamStore& store, const TrainConfig& config,
                     const DictionarySet* dicts, const NodeVectorFile* sidecar,
                     bool train_mode, std::mt19937_64& rng) {
  int n = static_cast<int>(doc.entities.size());
  int total_pairs = n * (n - 1);
  Tape tape;
  Value* nodes = model.encode_nodes(tape, store, doc, sidecar);
  Value* loss = nullptr;
  auto add_view = [&](const RelationGraph& input,
                      const std::vector<Pair>& pairs,
                      const std::vector<int>& targets) {
    Value* enriched = model.gcn_forward(tape, store, nodes, input);
    Value* reps = model.encode_edges(tape, store, enriched, input, pairs);
    Value* probs = model.classify_edges(tape, store, reps, train_mode, rng);
    Value* nll = tape.scale(tape.nll_loss(probs, targets),
                            static_cast<double>(pairs.size()) / total_pairs);
    loss = loss ? tape.add(loss, nll) : nll;
    return probs;
  };

  if (config.self_exposure && train_mode) {
    // earlier buckets expose the model's own decisions (no gradient through
    // the commits)
    RelationGraph current = initial_graph(doc, config.exposure, dicts);
    RelationGraph gold = gold_graph(doc);
    for (const auto& bucket :
         build_schedule(n, model.config().d_max).buckets) {
      std::vector<int> targets;
      for (const auto& p : bucket) targets.push_back(gold.at(p.head, p.tail));
      Value* probs = add_view(current, bucket, targets);
      for (size_t k = 0; k < bucket.size(); ++k)
        current.set(bucket[k].head, bucket[k].tail,
                    EdgeModel::predicted_class(probs, static_cast<int>(k)));
    }
  } else {
    RelationGraph initial = initial_graph(doc, config.exposure, dicts);
    for (const auto& view : build_training_views(doc, initial, config.exposure,
                                                 model.config().d_max))
      add_view(view.input, view.pairs, view.targets);
  }

  double value = loss->val(0, 0);
  if (!std::isfinite(value))
    throw std::runtime_error("non-finite loss on document " + doc.doc_id);
  if (train_mode) tape.backward(loss);
  return value;
}

}  // namespace

std::string TrainResult::log_csv() const {
  std::ostringstream out;
  out << "epoch,train_nll,dev_micro_f,seconds\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& row : log)
    out << row.epoch << ',' << row.train_nll << ',' << row.dev_micro_f << ','
        << row.seconds << '\n';
  return out.str();
}

TrainResult train(const std::vector<Document>& train_docs,
                  const std::vector<Document>& dev_docs,
                  const EdgeModel& model, const TrainConfig& config,
                  const DictionarySet* dicts, const NodeVectorFile* sidecar,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<const Document*> trainable;
  for (const auto& doc : train_docs)
    if (doc.entities.size() >= 2) trainable.push_back(&doc);
  if (trainable.empty())
    throw std::runtime_error("training split has no usable documents");

  std::mt19937_64 rng(config.seed);
  ParamStore store;
  model.init_params(store, rng);

  TrainResult result;
  std::vector<size_t> order(trainable.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);

    double epoch_nll = 0.0;
    for (size_t idx : order) {
      epoch_nll += document_loss(*trainable[idx], model, store, config, dicts,
                                 sidecar, /*train_mode=*/true, rng);
      store.adam_step(config.learning_rate);
    }
    epoch_nll /= static_cast<double>(order.size());

    // dev: run the editor on exposure-consistent initial graphs
    double dev_f = 0.0, dev_nll = 0.0;
    if (!dev_docs.empty()) {
      std::vector<RelationGraph> predicted;
      int scored = 0;
      for (const auto& doc : dev_docs) {
        int n = static_cast<int>(doc.entities.size());
        RelationGraph init = dev_initial_graph(doc, config.exposure, dicts);
        if (n < 2) {
          predicted.push_back(init);
          continue;
        }
        predicted.push_back(edit_graph(doc, init, model, store,
                                       build_schedule(n, model.config().d_max),
                                       sidecar)
                                .graph);
        TrainConfig eval_cfg = config;
        eval_cfg.exposure = TrainConfig::Exposure::gold;
        eval_cfg.self_exposure = false;
        dev_nll += document_loss(doc, model, store, eval_cfg, dicts, sidecar,
                                 /*train_mode=*/false, rng);
        ++scored;
      }
      dev_f = score_split(dev_docs, predicted).overall.f_score();
      if (scored > 0) dev_nll /= scored;
    }

    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    EpochLog row{epoch, epoch_nll, dev_f, seconds};
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    if (dev_f > result.best_dev_f ||
        (dev_f == result.best_dev_f && dev_nll < result.best_dev_nll) ||
        result.best_epoch < 0) {
      result.best_dev_f = dev_f;
      result.best_dev_nll = dev_nll;
      result.best_epoch = epoch;
      result.best_params = store;
    }
    if (config.checkpoint_every > 0 && !config.out_dir.empty() &&
        epoch % config.checkpoint_every == 0)
      store.save(config.out_dir + "/epoch_" + std::to_string(epoch) +
                     ".ckpt.json",
                 model.meta_json());
  }
  return result;
}

}  // namespace ee

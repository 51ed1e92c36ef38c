// Command-line front end: corpus statistics, rule extraction, training,
// iterative edge editing, format conversion, and DOT export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ee/corpus.hpp"
#include "ee/dot_export.hpp"
#include "ee/editor.hpp"
#include "ee/metrics.hpp"
#include "ee/model.hpp"
#include "ee/relgraph.hpp"
#include "ee/rules.hpp"
#include "ee/tensor.hpp"
#include "ee/training.hpp"

namespace fs = std::filesystem;
using namespace ee;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string corpus_dir;
  std::string manifest;
  std::string dicts_dir;
  std::string split = "test";
  std::string out_dir;
  uint64_t seed = 0;
  int jobs = 1;
};

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw CLI::ValidationError("--split", "unknown split: " + name);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << content;
}

// Deterministic parallel map over document indices: worker w takes indices
// congruent to w, results land in a pre-sized vector.
template <typename Fn>
void parallel_over(size_t count, int jobs, Fn&& fn) {
  if (jobs <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&fn, w, jobs, count] {
      for (size_t i = static_cast<size_t>(w); i < count;
           i += static_cast<size_t>(jobs))
        fn(i);
    });
  for (auto& t : workers) t.join();
}

int cmd_stats(const CommonArgs& args, bool single_split) {
  Corpus corpus = load_corpus(args.corpus_dir, args.manifest);
  CorpusStats stats = corpus_stats(corpus);
  if (single_split) {
    Corpus one;
    one.of(parse_split(args.split)) = corpus.of(parse_split(args.split));
    stats = corpus_stats(one);
  }
  std::cout << format_stats(stats);
  return kExitOk;
}

int cmd_build_dicts(const CommonArgs& args) {
  Corpus corpus = load_corpus(args.corpus_dir, args.manifest);
  DictionarySet dicts = build_dictionaries(corpus.of(Split::train));
  fs::create_directories(args.out_dir);
  save_dictionary(dicts.solvent, args.out_dir + "/solvent.dict",
                  "solvent material surfaces collected from training gold");
  save_dictionary(dicts.atmospheric, args.out_dir + "/atmospheric.dict",
                  "atmospheric material surfaces collected from training gold");
  save_dictionary(dicts.participant, args.out_dir + "/participant.dict",
                  "participant material surfaces collected from training gold");
  std::cout << "wrote dictionaries to " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_rule_extract(const CommonArgs& args) {
  Corpus corpus = load_corpus(args.corpus_dir, args.manifest);
  DictionarySet dicts = load_dictionaries(args.dicts_dir);
  const auto& docs = corpus.of(parse_split(args.split));
  std::vector<RelationGraph> graphs(docs.size());
  parallel_over(docs.size(), args.jobs,
                [&](size_t i) { graphs[i] = rule_extract(docs[i], dicts); });
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    for (size_t i = 0; i < docs.size(); ++i)
      write_file(args.out_dir + "/" + docs[i].doc_id + ".graph.json",
                 graph_to_json(graphs[i], docs[i].doc_id));
  }
  std::cout << report_table(score_split(docs, graphs));
  return kExitOk;
}

int cmd_convert(const std::string& ann_path, const std::string& out_path) {
  std::string converted = convert_events_to_relations(read_file(ann_path));
  if (out_path.empty())
    std::cout << converted;
  else
    write_file(out_path, converted);
  return kExitOk;
}

struct TrainArgs {
  CommonArgs common;
  ModelConfig model_config;
  std::string exposure = "gold";
  std::string vectors_path;
  int min_freq = 2;
  bool self_exposure = false;
  bool shuffle = true;
  int checkpoint_every = 0;
};

int cmd_train(const TrainArgs& args) {
  Corpus corpus = load_corpus(args.common.corpus_dir, args.common.manifest);
  const auto& train_docs = corpus.of(Split::train);
  const auto& dev_docs = corpus.of(Split::dev);

  NodeVectorFile sidecar;
  const NodeVectorFile* sidecar_ptr = nullptr;
  ModelConfig model_config = args.model_config;
  if (!args.vectors_path.empty()) {
    sidecar = NodeVectorFile::load(args.vectors_path);
    model_config.encoder_kind = ModelConfig::Encoder::precomputed_file;
    model_config.token_dim = sidecar.dim;
    sidecar_ptr = &sidecar;
  }

  EdgeModel model(model_config, Vocabulary::build(train_docs, args.min_freq),
                  collect_entity_labels(train_docs));

  TrainConfig config;
  config.epochs = model_config.epochs;
  config.learning_rate = model_config.learning_rate;
  config.seed = args.common.seed;
  config.self_exposure = args.self_exposure;
  config.shuffle = args.shuffle;
  config.checkpoint_every = args.checkpoint_every;
  config.out_dir = args.common.out_dir;
  if (args.exposure == "gold") config.exposure = TrainConfig::Exposure::gold;
  else if (args.exposure == "rule")
    config.exposure = TrainConfig::Exposure::rule_init;
  else if (args.exposure == "empty")
    config.exposure = TrainConfig::Exposure::empty_init;
  else
    throw CLI::ValidationError("--exposure", "unknown mode: " + args.exposure);

  DictionarySet dicts;
  const DictionarySet* dicts_ptr = nullptr;
  if (!args.common.dicts_dir.empty()) {
    dicts = load_dictionaries(args.common.dicts_dir);
    dicts_ptr = &dicts;
  }

  fs::create_directories(args.common.out_dir);
  TrainResult result =
      train(train_docs, dev_docs, model, config, dicts_ptr, sidecar_ptr,
            [](const EpochLog& row) {
              std::cout << "epoch " << row.epoch << "  train_nll "
                        << row.train_nll << "  dev_micro_f " << row.dev_micro_f
                        << "  (" << row.seconds << "s)\n";
            });
  result.best_params.save(args.common.out_dir + "/model.ckpt.json",
                          model.meta_json());
  write_file(args.common.out_dir + "/train_log.csv", result.log_csv());
  std::cout << "best dev micro-F " << result.best_dev_f << " at epoch "
            << result.best_epoch << "; checkpoint and log in "
            << args.common.out_dir << "\n";
  return kExitOk;
}

struct EditArgs {
  CommonArgs common;
  std::string checkpoint;
  std::string init = "rule";
  std::string order = "close";
  std::string vectors_path;
  int dmax_override = -1;
  int random_edges = -1;  // random init: edge count, default n_nodes
};

int cmd_edit(const EditArgs& args) {
  Corpus corpus = load_corpus(args.common.corpus_dir, args.common.manifest);
  std::string meta;
  ParamStore store = ParamStore::load(args.checkpoint, &meta);
  EdgeModel model = EdgeModel::from_meta_json(meta);
  int d_max = args.dmax_override > 0 ? args.dmax_override
                                     : model.config().d_max;

  NodeVectorFile sidecar;
  const NodeVectorFile* sidecar_ptr = nullptr;
  if (!args.vectors_path.empty()) {
    sidecar = NodeVectorFile::load(args.vectors_path);
    sidecar_ptr = &sidecar;
  }

  DictionarySet dicts;
  bool have_dicts = !args.common.dicts_dir.empty();
  if (have_dicts) dicts = load_dictionaries(args.common.dicts_dir);
  if (args.init == "rule" && !have_dicts)
    throw std::runtime_error("--init rule requires --dicts");

  const auto& docs = corpus.of(parse_split(args.common.split));
  std::vector<RelationGraph> graphs(docs.size());
  std::vector<std::string> traces(docs.size());
  parallel_over(docs.size(), args.common.jobs, [&](size_t i) {
    const Document& doc = docs[i];
    int n = static_cast<int>(doc.entities.size());
    RelationGraph init(n);
    if (args.init == "rule") init = rule_extract(doc, dicts);
    else if (args.init == "random")
      init = init_random_graph(
          n, args.random_edges >= 0 ? std::min(args.random_edges, n * (n - 1))
                                    : std::min(n, n * (n - 1)),
          args.common.seed + i);
    else if (args.init != "empty")
      throw std::runtime_error("unknown --init: " + args.init);
    if (n < 2) {
      graphs[i] = init;
      return;
    }
    EditSchedule schedule =
        args.order == "random"
            ? random_schedule(n, d_max, args.common.seed + i)
            : build_schedule(n, d_max);
    EditResult result = edit_graph(doc, init, model, store, schedule,
                                   sidecar_ptr);
    graphs[i] = std::move(result.graph);
    traces[i] = result.trace.to_jsonl(doc.doc_id);
  });

  if (!args.common.out_dir.empty()) {
    fs::create_directories(args.common.out_dir);
    for (size_t i = 0; i < docs.size(); ++i) {
      write_file(args.common.out_dir + "/" + docs[i].doc_id + ".graph.json",
                 graph_to_json(graphs[i], docs[i].doc_id));
      write_file(args.common.out_dir + "/" + docs[i].doc_id + ".trace.jsonl",
                 traces[i]);
    }
  }
  std::cout << report_table(score_split(docs, graphs));
  return kExitOk;
}

int cmd_export_dot(const std::string& graph_path,
                   const std::string& corpus_dir, const std::string& out_path) {
  std::string doc_id;
  RelationGraph graph = graph_from_json(read_file(graph_path), &doc_id);
  Document doc = load_document(corpus_dir + "/" + doc_id + ".txt",
                               corpus_dir + "/" + doc_id + ".ann", doc_id);
  std::string dot = graph_to_dot(doc, graph);
  if (out_path.empty())
    std::cout << dot;
  else
    write_file(out_path, dot);
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_corpus = true) {
  auto* corpus =
      cmd->add_option("--corpus", args.corpus_dir, "corpus directory");
  auto* manifest =
      cmd->add_option("--manifest", args.manifest, "split manifest file");
  if (needs_corpus) {
    corpus->required();
    manifest->required();
  }
  cmd->add_option("--dicts", args.dicts_dir, "dictionary directory");
  cmd->add_option("--split", args.split, "train|dev|test");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--jobs", args.jobs, "parallel workers")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document-level relation extraction: rules + iterative edge "
               "editing"};
  app.require_subcommand(1);

  CommonArgs stats_args;
  bool stats_single = false;
  auto* stats = app.add_subcommand("stats", "per-split corpus statistics");
  add_common(stats, stats_args);
  stats->callback([&] { stats_single = stats->count("--split") > 0; });

  CommonArgs dict_args;
  auto* build_dicts =
      app.add_subcommand("build-dicts", "collect dictionaries from train gold");
  add_common(build_dicts, dict_args);

  CommonArgs rule_args;
  auto* rule =
      app.add_subcommand("rule-extract", "deterministic rule-based extraction");
  add_common(rule, rule_args);

  std::string convert_in, convert_out;
  auto* convert = app.add_subcommand(
      "convert", "rewrite event-style standoff as relation-style");
  convert->add_option("input", convert_in, "annotation file")->required();
  convert->add_option("--out", convert_out, "output path (default stdout)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the edge classifier");
  add_common(train_cmd, train_args.common);
  train_cmd->add_option("--epochs", train_args.model_config.epochs);
  train_cmd->add_option("--lr", train_args.model_config.learning_rate);
  train_cmd->add_option("--dmax", train_args.model_config.d_max);
  train_cmd->add_option("--gcn-layers", train_args.model_config.gcn_layers);
  train_cmd->add_option("--hidden-dim", train_args.model_config.hidden_dim);
  train_cmd->add_option("--token-dim", train_args.model_config.token_dim);
  train_cmd->add_option("--fc-out-layers",
                        train_args.model_config.fc_out_layers);
  train_cmd->add_option("--dropout", train_args.model_config.dropout_rate);
  train_cmd->add_option("--exposure", train_args.exposure,
                        "gold|rule|empty (initial graph while training)");
  train_cmd->add_flag("--self-exposure", train_args.self_exposure,
                      "expose the model's own earlier-bucket decisions");
  train_cmd->add_flag("--scalar-bilinear",
                      train_args.model_config.scalar_bilinear);
  train_cmd->add_option("--vectors", train_args.vectors_path,
                        "precomputed node-vector sidecar (JSON lines)");
  train_cmd->add_option("--min-freq", train_args.min_freq,
                        "vocabulary frequency cutoff");
  train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every,
                        "epochs between extra checkpoints");

  EditArgs edit_args;
  auto* edit = app.add_subcommand("edit", "iterative edge editing over a split");
  add_common(edit, edit_args.common);
  edit->add_option("--checkpoint", edit_args.checkpoint, "trained model")
      ->required();
  edit->add_option("--init", edit_args.init, "empty|rule|random");
  edit->add_option("--order", edit_args.order, "close|random");
  edit->add_option("--dmax", edit_args.dmax_override,
                   "override the checkpoint's schedule cutoff");
  edit->add_option("--random-edges", edit_args.random_edges,
                   "edge count for --init random (default: node count)");
  edit->add_option("--vectors", edit_args.vectors_path,
                   "precomputed node-vector sidecar");

  std::string dot_graph, dot_corpus, dot_out;
  auto* export_dot = app.add_subcommand("export-dot", "render a graph as DOT");
  export_dot->add_option("--graph", dot_graph, "graph JSON file")->required();
  export_dot->add_option("--corpus", dot_corpus, "corpus directory")
      ->required();
  export_dot->add_option("--out", dot_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (stats->parsed()) return cmd_stats(stats_args, stats_single);
    if (build_dicts->parsed()) {
      if (dict_args.out_dir.empty())
        throw CLI::ValidationError("--out", "output directory required");
      return cmd_build_dicts(dict_args);
    }
    if (rule->parsed()) return cmd_rule_extract(rule_args);
    if (convert->parsed()) return cmd_convert(convert_in, convert_out);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (edit->parsed()) return cmd_edit(edit_args);
    if (export_dot->parsed())
      return cmd_export_dot(dot_graph, dot_corpus, dot_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParseError& e) {
    std::cerr << "data error (line " << e.line_no() << "): " << e.what()
              << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::string what = e.what();
    bool numeric = what.find("non-finite") != std::string::npos;
    std::cerr << (numeric ? "numeric error: " : "data error: ") << what << "\n";
    return numeric ? kExitNumeric : kExitData;
  }
  return kExitUsage;
}

#include "ee/rules.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ee {

std::string normalize_surface(const std::string& surface) {
  std::string out;
  bool in_space = true;
  for (char c : surface) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

bool match_dictionary(const std::string& surface,
                      const std::set<std::string>& dict) {
  return dict.count(normalize_surface(surface)) > 0;
}

std::set<std::string> load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dictionary: " + path);
  std::set<std::string> dict;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string norm = normalize_surface(line);
    if (!norm.empty()) dict.insert(norm);
  }
  return dict;
}

DictionarySet load_dictionaries(const std::string& dicts_dir) {
  DictionarySet dicts;
  dicts.solvent = load_dictionary(dicts_dir + "/solvent.dict");
  dicts.atmospheric = load_dictionary(dicts_dir + "/atmospheric.dict");
  dicts.participant = load_dictionary(dicts_dir + "/participant.dict");
  return dicts;
}

void save_dictionary(const std::set<std::string>& dict, const std::string& path,
                     const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dictionary: " + path);
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& entry : dict) out << entry << '\n';
}

DictionarySet build_dictionaries(const std::vector<Document>& train_docs) {
  DictionarySet dicts;
  for (const auto& doc : train_docs) {
    for (const auto& rel : doc.relations) {
      std::set<std::string>* dict = nullptr;
      if (rel.label == "Solvent_Material") dict = &dicts.solvent;
      else if (rel.label == "Atmospheric_Material") dict = &dicts.atmospheric;
      else if (rel.label == "Participant_Material") dict = &dicts.participant;
      if (!dict) continue;
      // the Material side is whichever endpoint carries a material label
      for (int idx : {rel.head, rel.tail}) {
        const auto& label = doc.entities[idx].label;
        if (label == "Material" || label == "Nonrecipe-Material")
          dict->insert(normalize_surface(doc.entities[idx].surface));
      }
    }
  }
  return dicts;
}

namespace {

enum class SearchMode { bidirectional, before, after, before_priority };

// Nearest candidate by appearance-order distance; ties prefer the preceding
// entity. Candidates are entity ranks sorted ascending. Returns -1 if none.
int nearest(int head_rank, const std::vector<int>& candidates,
            SearchMode mode) {
  int best_before = -1, best_after = -1;
  for (int c : candidates) {
    if (c == head_rank) continue;
    if (c < head_rank) best_before = c;           // last one below wins
    else if (best_after < 0) best_after = c;       // first one above wins
  }
  switch (mode) {
    case SearchMode::before:
      return best_before;
    case SearchMode::after:
      return best_after;
    case SearchMode::before_priority:
      return best_before >= 0 ? best_before : best_after;
    case SearchMode::bidirectional:
      if (best_before < 0) return best_after;
      if (best_after < 0) return best_before;
      return (head_rank - best_before) <= (best_after - head_rank)
                 ? best_before
                 : best_after;
  }
  return -1;
}

class RuleContext {
 public:
  RuleContext(const Document& doc, const RuleConfig& config)
      : doc_(doc), config_(config) {
    sentence_of_.resize(doc.entities.size());
    by_sentence_.resize(doc.sentences.size());
    for (size_t i = 0; i < doc.entities.size(); ++i) {
      int s = doc.sentence_of(static_cast<int>(i));
      sentence_of_[i] = s;
      if (s >= 0) by_sentence_[s].push_back(static_cast<int>(i));
    }
  }

  // ranks of same-sentence entities whose label is in `labels`
  std::vector<int> in_sentence(int head_rank,
                               std::initializer_list<const char*> labels) const {
    std::vector<int> out;
    int s = sentence_of_[head_rank];
    if (s < 0) return out;
    for (int r : by_sentence_[s]) {
      for (const char* l : labels) {
        if (doc_.entities[r].label == l) {
          out.push_back(r);
          break;
        }
      }
    }
    return out;
  }

  std::vector<int> anywhere(std::initializer_list<const char*> labels) const {
    std::vector<int> out;
    for (size_t r = 0; r < doc_.entities.size(); ++r) {
      for (const char* l : labels) {
        if (doc_.entities[r].label == l) {
          out.push_back(static_cast<int>(r));
          break;
        }
      }
    }
    return out;
  }

  void emit(RelationGraph& graph, const std::string& label, int written_head,
            int written_tail) const {
    int h = written_head, t = written_tail;
    if (config_.flip_direction.count(label)) std::swap(h, t);
    graph.set(h, t, relation_class_id(label));
  }

  const Document& doc() const { return doc_; }
  const RuleConfig& config() const { return config_; }

 private:
  const Document& doc_;
  const RuleConfig& config_;
  std::vector<int> sentence_of_;
  std::vector<std::vector<int>> by_sentence_;
};

void link_next_operation(const RuleContext& ctx, RelationGraph& graph) {
  int prev = -1;
  for (size_t r = 0; r < ctx.doc().entities.size(); ++r) {
    if (ctx.doc().entities[r].label != "Operation") continue;
    if (prev >= 0) ctx.emit(graph, "Next_Operation", prev, static_cast<int>(r));
    prev = static_cast<int>(r);
  }
}

void link_operation_material(const RuleContext& ctx,
                             const DictionarySet& dicts, RelationGraph& graph) {
  for (size_t r = 0; r < ctx.doc().entities.size(); ++r) {
    const auto& ent = ctx.doc().entities[r];
    if (ent.label != "Material") continue;
    int op = nearest(static_cast<int>(r),
                     ctx.in_sentence(static_cast<int>(r), {"Operation"}),
                     SearchMode::bidirectional);
    if (op < 0) continue;
    // lookup priority: solvent > atmospheric > participant
    if (match_dictionary(ent.surface, dicts.solvent)) {
      ctx.emit(graph, "Solvent_Material", op, static_cast<int>(r));
    } else if (match_dictionary(ent.surface, dicts.atmospheric)) {
      ctx.emit(graph, "Atmospheric_Material", op, static_cast<int>(r));
    } else if (match_dictionary(ent.surface, dicts.participant)) {
      ctx.emit(graph, "Participant_Material", op, static_cast<int>(r));
    } else {
      // written direction is Material -> Operation
      ctx.emit(graph, "Recipe_Precursor", static_cast<int>(r), op);
    }
  }
}

void link_attribute_relations(const RuleContext& ctx, RelationGraph& graph) {
  const auto& ents = ctx.doc().entities;
  for (size_t ri = 0; ri < ents.size(); ++ri) {
    int r = static_cast<int>(ri);
    const std::string& label = ents[ri].label;
    auto attach = [&](const std::string& rel,
                      std::initializer_list<const char*> targets,
                      SearchMode mode) {
      int t = nearest(r, ctx.in_sentence(r, targets), mode);
      if (t >= 0) ctx.emit(graph, rel, r, t);
    };

    if (label == "Property-Unit") {
      attach("Property_Of", {"Material"}, SearchMode::bidirectional);
    } else if (label == "Property-Misc") {
      attach("Property_Of", {"Material", "Nonrecipe-Material"},
             SearchMode::bidirectional);
    } else if (label == "Condition-Unit" || label == "Condition-Misc") {
      attach("Condition_Of", {"Operation"}, SearchMode::bidirectional);
    } else if (label == "Number") {
      std::vector<int> units;
      for (int c : ctx.in_sentence(r, {"Property-Unit", "Condition-Unit",
                                       "Apparatus-Unit", "Amount-Unit"})) {
        if (ctx.config().number_of_targets.count(ents[c].label))
          units.push_back(c);
      }
      int t = nearest(r, units, SearchMode::after);
      if (t >= 0) ctx.emit(graph, "Number_Of", r, t);
    } else if (label == "Amount-Unit" || label == "Amount-Misc") {
      attach("Amount_Of", {"Material", "Nonrecipe-Material"},
             SearchMode::bidirectional);
    } else if (label == "Material-Descriptor") {
      attach("Descriptor_Of", {"Material", "Nonrecipe-Material"},
             SearchMode::bidirectional);
    } else if (label == "Apparatus-Descriptor") {
      attach("Descriptor_Of", {"Synthesis-Apparatus"},
             SearchMode::bidirectional);
    } else if (label == "Synthesis-Apparatus" ||
               label == "Characterization-Apparatus") {
      attach("Apparatus_Of", {"Operation"}, SearchMode::before_priority);
    } else if (label == "Property-Type") {
      attach("Type_Of", {"Property-Unit"}, SearchMode::bidirectional);
    } else if (label == "Apparatus-Property-Type") {
      attach("Type_Of", {"Apparatus-Unit"}, SearchMode::bidirectional);
    } else if (label == "Condition-Type") {
      attach("Type_Of", {"Condition-Unit"}, SearchMode::before);
    } else if (label == "Brand") {
      attach("Brand_Of",
             {"Material", "Nonrecipe-Material", "Synthesis-Apparatus",
              "Characterization-Apparatus"},
             SearchMode::bidirectional);
    } else if (label == "Apparatus-Unit") {
      auto candidates =
          ctx.config().apparatus_attr_sentence_scoped
              ? ctx.in_sentence(r, {"Synthesis-Apparatus",
                                    "Characterization-Apparatus"})
              : ctx.anywhere({"Synthesis-Apparatus",
                              "Characterization-Apparatus"});
      int t = nearest(r, candidates, SearchMode::bidirectional);
      if (t >= 0) ctx.emit(graph, "Apparatus_Attr_Of", r, t);
    }
  }
}

}  // namespace

RelationGraph rule_extract(const Document& doc, const DictionarySet& dicts,
                           const RuleConfig& config) {
  if (!doc.entities.empty() && doc.sentences.empty())
    throw std::invalid_argument("document has no sentence spans: " + doc.doc_id);
  RelationGraph graph(static_cast<int>(doc.entities.size()));
  RuleContext ctx(doc, config);
  link_next_operation(ctx, graph);
  link_operation_material(ctx, dicts, graph);
  link_attribute_relations(ctx, graph);
  return graph;
}

}  // namespace ee

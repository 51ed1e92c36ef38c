#ifndef EE_RULES_HPP
#define EE_RULES_HPP

#include <set>
#include <string>
#include <vector>

#include "ee/corpus.hpp"
#include "ee/relgraph.hpp"

namespace ee {

// Case-folded, whitespace-normalized surface-form lookup tables for the three
// Operation--Material labels that take specific materials.
struct DictionarySet {
  std::set<std::string> solvent;
  std::set<std::string> atmospheric;
  std::set<std::string> participant;
};

// Lowercases and collapses runs of whitespace to single spaces.
std::string normalize_surface(const std::string& surface);

bool match_dictionary(const std::string& surface,
                      const std::set<std::string>& dict);

// One surface form per line, '#' starts a comment.
std::set<std::string> load_dictionary(const std::string& path);
DictionarySet load_dictionaries(const std::string& dicts_dir);
void save_dictionary(const std::set<std::string>& dict,
                     const std::string& path, const std::string& comment);

// Collects Material surfaces attached by Solvent/Atmospheric/Participant
// gold edges in the given documents.
DictionarySet build_dictionaries(const std::vector<Document>& train_docs);

struct RuleConfig {
  // Relation labels whose emitted direction is the reverse of the written
  // rule. The shipped default flips Recipe_Precursor so that all
  // Operation--Material edges run Operation -> Material, matching the corpus
  // annotation convention.
  std::set<std::string> flip_direction = {"Recipe_Precursor"};
  // Unit labels a Number may attach to.
  std::set<std::string> number_of_targets = {"Property-Unit", "Condition-Unit",
                                             "Apparatus-Unit", "Amount-Unit"};
  // Restrict Apparatus_Attr_Of to same-sentence candidates.
  bool apparatus_attr_sentence_scoped = true;
};

// The deterministic rule-based extractor. Requires doc.sentences.
RelationGraph rule_extract(const Document& doc, const DictionarySet& dicts,
                           const RuleConfig& config = {});

}  // namespace ee

#endif  // EE_RULES_HPP

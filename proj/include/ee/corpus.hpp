#ifndef EE_CORPUS_HPP
#define EE_CORPUS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ee {

struct Fragment {
  int start = 0;
  int end = 0;
  bool operator==(const Fragment&) const = default;
};

// A gold entity mention from a standoff T-line. Fragments are sorted,
// non-overlapping character spans; all ordering logic uses the first
// fragment's start.
struct EntityMention {
  std::string id;
  std::string label;
  std::vector<Fragment> fragments;
  std::string surface;

  int start() const { return fragments.front().start; }
  int end() const { return fragments.front().end; }
  bool operator==(const EntityMention&) const = default;
};

// A gold relation from a standoff R-line; head/tail index into
// Document::entities.
struct RelationInstance {
  int head = -1;
  int tail = -1;
  std::string label;
  bool operator==(const RelationInstance&) const = default;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<EntityMention> entities;   // sorted by (start, end, id)
  std::vector<RelationInstance> relations;
  std::vector<Fragment> sentences;

  // Index of the sentence containing the entity's first fragment, -1 if none.
  int sentence_of(int entity_index) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line_no);
  int line_no() const { return line_no_; }

 private:
  int line_no_;
};

struct ParseStats {
  int skipped_lines = 0;  // E/A/# and other unhandled line types
};

// Parses brat standoff content (T and R lines) against the document text.
// Event ('E'), attribute ('A') and comment ('#') lines are counted and
// skipped. Entities come out sorted; relation indices refer to that order.
Document parse_brat(const std::string& text_content,
                    const std::string& ann_content,
                    const std::string& doc_id = "",
                    ParseStats* stats = nullptr);

// Rewrites event-style standoff (Operation events carrying relation-labelled
// arguments, R-lines that reference event ids) into plain T/R lines. The
// output is what parse_brat expects. Input that is already relation-style
// passes through unchanged.
std::string convert_events_to_relations(const std::string& ann_content);

// Serializes a Document back to standoff lines (T then R), suitable for
// re-parsing into an identical Document.
std::string to_standoff(const Document& doc);

struct SentenceOptions {
  std::vector<std::string> abbreviations = {
      "Fig", "fig", "et al", "e.g", "i.e", "vs", "ca", "approx",
      "Co",  "Ltd", "LTD",   "Inc", "Dr",  "No", "cf"};
  bool newline_is_boundary = true;
};

// Heuristic sentence splitter: boundaries after '.', '?', '!' followed by
// whitespace and an uppercase letter or digit. Spans cover all non-whitespace
// text and never overlap.
std::vector<Fragment> segment_sentences(const std::string& text,
                                        const SentenceOptions& opts = {});

enum class Split { train, dev, test };
std::string split_name(Split s);

struct Corpus {
  std::vector<Document> docs[3];  // indexed by Split

  std::vector<Document>& of(Split s) { return docs[static_cast<int>(s)]; }
  const std::vector<Document>& of(Split s) const {
    return docs[static_cast<int>(s)];
  }
};

struct CorpusLoadOptions {
  bool convert_events = true;  // resolve event-style annotations first
  SentenceOptions sentence_options;
};

// Loads <doc_id>.txt / <doc_id>.ann pairs for every id in the manifest
// ([train]/[dev]/[test] sections, one id per line).
Corpus load_corpus(const std::string& corpus_dir,
                   const std::string& manifest_path,
                   const CorpusLoadOptions& opts = {});

Document load_document(const std::string& txt_path, const std::string& ann_path,
                       const std::string& doc_id,
                       const CorpusLoadOptions& opts = {});

// Per-split class counts. Keys are class names, values indexed by Split.
struct CorpusStats {
  std::map<std::string, std::array<int, 3>> entity_counts;
  std::map<std::string, std::array<int, 3>> relation_counts;
};

CorpusStats corpus_stats(const Corpus& corpus);

std::string format_stats(const CorpusStats& stats);

}  // namespace ee

#endif  // EE_CORPUS_HPP

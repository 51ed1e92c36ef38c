#include "ee/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace ee {

namespace {

std::vector<std::string> split_lines(const std::string& content) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : content) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

int parse_int(const std::string& s, int line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("malformed offset '" + s + "'", line_no);
  return value;
}

// Numeric-aware id comparison so T2 sorts before T10.
bool id_less(const std::string& a, const std::string& b) {
  if (a.size() > 1 && b.size() > 1 && a[0] == b[0]) {
    int na = 0, nb = 0;
    auto ra = std::from_chars(a.data() + 1, a.data() + a.size(), na);
    auto rb = std::from_chars(b.data() + 1, b.data() + b.size(), nb);
    if (ra.ec == std::errc() && rb.ec == std::errc() && na != nb)
      return na < nb;
  }
  return a < b;
}

std::string strip_role_index(const std::string& role) {
  size_t end = role.size();
  while (end > 0 && std::isdigit(static_cast<unsigned char>(role[end - 1])))
    --end;
  return role.substr(0, end);
}

// Standoff offsets count Unicode codepoints; we store byte offsets
// internally. Index i of the returned vector is the byte position of
// codepoint i; one extra entry marks the end.
std::vector<int> codepoint_byte_index(const std::string& text) {
  std::vector<int> index;
  for (size_t b = 0; b < text.size(); ++b) {
    auto c = static_cast<unsigned char>(text[b]);
    if ((c & 0xC0) != 0x80) index.push_back(static_cast<int>(b));
  }
  index.push_back(static_cast<int>(text.size()));
  return index;
}

int byte_to_codepoint(const std::vector<int>& index, int byte_offset) {
  auto it = std::lower_bound(index.begin(), index.end(), byte_offset);
  return static_cast<int>(it - index.begin());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ParseError::ParseError(const std::string& msg, int line_no)
    : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
      line_no_(line_no) {}

int Document::sentence_of(int entity_index) const {
  int pos = entities[entity_index].start();
  for (size_t s = 0; s < sentences.size(); ++s) {
    if (pos >= sentences[s].start && pos < sentences[s].end)
      return static_cast<int>(s);
  }
  return -1;
}

Document parse_brat(const std::string& text_content,
                    const std::string& ann_content, const std::string& doc_id,
                    ParseStats* stats) {
  Document doc;
  doc.doc_id = doc_id;
  doc.text = text_content;
  const std::vector<int> cp_index = codepoint_byte_index(text_content);
  const int text_len = static_cast<int>(cp_index.size()) - 1;  // codepoints

  struct PendingRelation {
    std::string label, arg1, arg2;
    int line_no;
  };
  std::vector<PendingRelation> pending;
  int skipped = 0;

  auto lines = split_lines(ann_content);
  for (size_t li = 0; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    const int line_no = static_cast<int>(li) + 1;
    if (line.empty()) continue;
    auto fields = split_on(line, '\t');
    const std::string& id = fields[0];
    if (id[0] == 'T') {
      if (fields.size() < 3)
        throw ParseError("entity line needs 3 tab-separated fields", line_no);
      auto head = split_on(fields[1], ' ');
      if (head.size() < 3)
        throw ParseError("entity line needs label and offsets", line_no);
      EntityMention ent;
      ent.id = id;
      ent.label = head[0];
      // offsets: "start end" fragments separated by ';'
      std::string offsets;
      for (size_t i = 1; i < head.size(); ++i) {
        if (i > 1) offsets += ' ';
        offsets += head[i];
      }
      for (const std::string& frag : split_on(offsets, ';')) {
        auto se = split_on(frag, ' ');
        std::vector<std::string> nonempty;
        for (auto& p : se)
          if (!p.empty()) nonempty.push_back(p);
        if (nonempty.size() != 2)
          throw ParseError("malformed fragment '" + frag + "'", line_no);
        int cp_start = parse_int(nonempty[0], line_no);
        int cp_end = parse_int(nonempty[1], line_no);
        if (cp_start >= cp_end)
          throw ParseError("empty fragment in entity " + id, line_no);
        if (cp_end > text_len)
          throw ParseError("offset beyond text length in entity " + id,
                           line_no);
        // convert codepoint offsets to byte offsets
        ent.fragments.push_back({cp_index[cp_start], cp_index[cp_end]});
      }
      std::sort(ent.fragments.begin(), ent.fragments.end(),
                [](const Fragment& a, const Fragment& b) {
                  return a.start < b.start;
                });
      for (size_t i = 1; i < ent.fragments.size(); ++i) {
        if (ent.fragments[i].start < ent.fragments[i - 1].end)
          throw ParseError("overlapping fragments in entity " + id, line_no);
      }
      std::string surface;
      for (size_t i = 0; i < ent.fragments.size(); ++i) {
        if (i > 0) surface += ' ';
        surface += text_content.substr(ent.fragments[i].start,
                                       ent.fragments[i].end -
                                           ent.fragments[i].start);
      }
      ent.surface = fields[2];
      if (ent.surface != surface)
        throw ParseError("surface text does not match offsets in entity " + id,
                         line_no);
      doc.entities.push_back(std::move(ent));
    } else if (id[0] == 'R') {
      if (fields.size() < 2)
        throw ParseError("relation line needs 2 tab-separated fields", line_no);
      auto parts = split_on(fields[1], ' ');
      std::vector<std::string> nonempty;
      for (auto& p : parts)
        if (!p.empty()) nonempty.push_back(p);
      if (nonempty.size() != 3 || nonempty[1].rfind("Arg1:", 0) != 0 ||
          nonempty[2].rfind("Arg2:", 0) != 0)
        throw ParseError("relation line needs 'Label Arg1:.. Arg2:..'",
                         line_no);
      pending.push_back(
          {nonempty[0], nonempty[1].substr(5), nonempty[2].substr(5), line_no});
    } else {
      ++skipped;
    }
  }

  std::sort(doc.entities.begin(), doc.entities.end(),
            [](const EntityMention& a, const EntityMention& b) {
              if (a.start() != b.start()) return a.start() < b.start();
              if (a.end() != b.end()) return a.end() < b.end();
              return id_less(a.id, b.id);
            });

  std::unordered_map<std::string, int> index_of;
  for (size_t i = 0; i < doc.entities.size(); ++i)
    index_of[doc.entities[i].id] = static_cast<int>(i);

  for (const auto& rel : pending) {
    auto h = index_of.find(rel.arg1);
    auto t = index_of.find(rel.arg2);
    if (h == index_of.end())
      throw ParseError("dangling Arg reference '" + rel.arg1 + "'",
                       rel.line_no);
    if (t == index_of.end())
      throw ParseError("dangling Arg reference '" + rel.arg2 + "'",
                       rel.line_no);
    doc.relations.push_back({h->second, t->second, rel.label});
  }

  if (stats) stats->skipped_lines = skipped;
  return doc;
}

std::string convert_events_to_relations(const std::string& ann_content) {
  struct EventLine {
    std::string id;
    std::string trigger;                                  // Operation T-id
    std::vector<std::pair<std::string, std::string>> args;  // (role, T-id)
  };
  std::vector<std::string> entity_lines;
  std::vector<EventLine> events;
  std::unordered_map<std::string, std::string> trigger_of;
  struct RawRel {
    std::string label, arg1, arg2;
  };
  std::vector<RawRel> rels;

  auto lines = split_lines(ann_content);
  for (size_t li = 0; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.empty()) continue;
    auto fields = split_on(line, '\t');
    const std::string& id = fields[0];
    if (id[0] == 'T') {
      entity_lines.push_back(line);
    } else if (id[0] == 'E') {
      if (fields.size() < 2)
        throw ParseError("malformed event line", static_cast<int>(li) + 1);
      EventLine ev;
      ev.id = id;
      for (const std::string& tok : split_on(fields[1], ' ')) {
        if (tok.empty()) continue;
        auto colon = tok.find(':');
        if (colon == std::string::npos) continue;
        std::string role = strip_role_index(tok.substr(0, colon));
        std::string target = tok.substr(colon + 1);
        if (role == "Operation" && ev.trigger.empty()) {
          ev.trigger = target;
        } else {
          ev.args.emplace_back(role, target);
        }
      }
      if (ev.trigger.empty())
        throw ParseError("event without Operation trigger: " + id,
                         static_cast<int>(li) + 1);
      trigger_of[ev.id] = ev.trigger;
      events.push_back(std::move(ev));
    } else if (id[0] == 'R') {
      auto parts = split_on(fields[1], ' ');
      std::vector<std::string> nonempty;
      for (auto& p : parts)
        if (!p.empty()) nonempty.push_back(p);
      if (nonempty.size() != 3)
        throw ParseError("malformed relation line", static_cast<int>(li) + 1);
      rels.push_back(
          {nonempty[0], nonempty[1].substr(5), nonempty[2].substr(5)});
    }
    // A/# lines are dropped
  }

  auto resolve = [&](const std::string& ref) -> std::string {
    if (!ref.empty() && ref[0] == 'E') {
      auto it = trigger_of.find(ref);
      if (it == trigger_of.end())
        throw std::runtime_error("relation references unknown event " + ref);
      return it->second;
    }
    return ref;
  };

  std::ostringstream out;
  for (const auto& l : entity_lines) out << l << '\n';
  int r_num = 1;
  for (const auto& r : rels) {
    out << 'R' << r_num++ << '\t' << r.label << " Arg1:" << resolve(r.arg1)
        << " Arg2:" << resolve(r.arg2) << '\n';
  }
  for (const auto& ev : events) {
    for (const auto& [role, target] : ev.args) {
      out << 'R' << r_num++ << '\t' << role << " Arg1:" << ev.trigger
          << " Arg2:" << target << '\n';
    }
  }
  return out.str();
}

std::string to_standoff(const Document& doc) {
  const std::vector<int> cp_index = codepoint_byte_index(doc.text);
  std::ostringstream out;
  for (const auto& ent : doc.entities) {
    out << ent.id << '\t' << ent.label << ' ';
    for (size_t i = 0; i < ent.fragments.size(); ++i) {
      if (i > 0) out << ';';
      out << byte_to_codepoint(cp_index, ent.fragments[i].start) << ' '
          << byte_to_codepoint(cp_index, ent.fragments[i].end);
    }
    out << '\t' << ent.surface << '\n';
  }
  int r_num = 1;
  for (const auto& rel : doc.relations) {
    out << 'R' << r_num++ << '\t' << rel.label
        << " Arg1:" << doc.entities[rel.head].id
        << " Arg2:" << doc.entities[rel.tail].id << '\n';
  }
  return out.str();
}

std::vector<Fragment> segment_sentences(const std::string& text,
                                        const SentenceOptions& opts) {
  const int n = static_cast<int>(text.size());
  auto is_space = [&](int i) {
    return std::isspace(static_cast<unsigned char>(text[i])) != 0;
  };

  // boundary positions: index of first character after a sentence break
  std::vector<int> boundaries;
  for (int i = 0; i < n; ++i) {
    char c = text[i];
    if (opts.newline_is_boundary && c == '\n') {
      boundaries.push_back(i + 1);
      continue;
    }
    if (c != '.' && c != '?' && c != '!') continue;
    // require whitespace then uppercase or digit
    int j = i + 1;
    if (j >= n || !is_space(j)) continue;
    while (j < n && is_space(j)) ++j;
    if (j >= n) continue;
    unsigned char next = static_cast<unsigned char>(text[j]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    if (c == '.') {
      // abbreviation check: compare the text ending at the period
      bool abbrev = false;
      for (const auto& a : opts.abbreviations) {
        int len = static_cast<int>(a.size());
        if (i >= len && text.compare(i - len, len, a) == 0) {
          // must not be part of a longer word
          if (i == len ||
              !std::isalpha(static_cast<unsigned char>(text[i - len - 1]))) {
            abbrev = true;
            break;
          }
        }
      }
      if (abbrev) continue;
    }
    boundaries.push_back(i + 1);
  }
  boundaries.push_back(n);

  std::vector<Fragment> spans;
  int pos = 0;
  for (int b : boundaries) {
    int s = pos;
    while (s < b && is_space(s)) ++s;
    int e = b;
    while (e > s && is_space(e - 1)) --e;
    if (s < e) spans.push_back({s, e});
    pos = b;
  }
  if (spans.empty() && n > 0) spans.push_back({0, n});
  return spans;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Document load_document(const std::string& txt_path, const std::string& ann_path,
                       const std::string& doc_id,
                       const CorpusLoadOptions& opts) {
  std::string text = read_file(txt_path);
  std::string ann = read_file(ann_path);
  if (opts.convert_events) ann = convert_events_to_relations(ann);
  Document doc = parse_brat(text, ann, doc_id);
  doc.sentences = segment_sentences(text, opts.sentence_options);
  return doc;
}

Corpus load_corpus(const std::string& corpus_dir,
                   const std::string& manifest_path,
                   const CorpusLoadOptions& opts) {
  std::string manifest = read_file(manifest_path);
  Corpus corpus;
  int split = -1;
  for (const std::string& raw : split_lines(manifest)) {
    std::string line = raw;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line == "[train]") { split = 0; continue; }
    if (line == "[dev]") { split = 1; continue; }
    if (line == "[test]") { split = 2; continue; }
    if (split < 0)
      throw std::runtime_error("manifest entry before any [split] section: " +
                               line);
    std::string base = corpus_dir + "/" + line;
    corpus.docs[split].push_back(
        load_document(base + ".txt", base + ".ann", line, opts));
  }
  return corpus;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (int s = 0; s < 3; ++s) {
    for (const auto& doc : corpus.docs[s]) {
      for (const auto& ent : doc.entities) {
        auto& row = stats.entity_counts[ent.label];
        ++row[s];
      }
      for (const auto& rel : doc.relations) {
        auto& row = stats.relation_counts[rel.label];
        ++row[s];
      }
    }
  }
  return stats;
}

std::string format_stats(const CorpusStats& stats) {
  std::ostringstream out;
  auto emit = [&](const char* title,
                  const std::map<std::string, std::array<int, 3>>& table) {
    out << title << '\n';
    // widest name for alignment
    size_t w = 5;
    for (const auto& [name, _] : table) w = std::max(w, name.size());
    out << std::string(w, ' ') << "  train    dev   test\n";
    std::array<long, 3> total{0, 0, 0};
    for (const auto& [name, counts] : table) {
      out << name << std::string(w - name.size(), ' ');
      for (int s = 0; s < 3; ++s) {
        std::string v = std::to_string(counts[s]);
        out << std::string(7 - std::min<size_t>(6, v.size()), ' ') << v;
        total[s] += counts[s];
      }
      out << '\n';
    }
    out << "total" << std::string(w - 5, ' ');
    for (int s = 0; s < 3; ++s) {
      std::string v = std::to_string(total[s]);
      out << std::string(7 - std::min<size_t>(6, v.size()), ' ') << v;
    }
    out << '\n';
  };
  emit("Entities", stats.entity_counts);
  out << '\n';
  emit("Relations", stats.relation_counts);
  return out.str();
}

}  // namespace ee

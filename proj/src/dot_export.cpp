#include "ee/dot_export.hpp"

#include <sstream>

namespace ee {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

std::string graph_to_dot(const Document& doc, const RelationGraph& graph) {
  if (graph.n_nodes() != static_cast<int>(doc.entities.size()))
    throw std::invalid_argument("graph_to_dot: node count mismatch for " +
                                doc.doc_id);
  std::ostringstream out;
  out << "digraph \"" << escape(doc.doc_id) << "\" {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=box, fontsize=10];\n";
  for (size_t i = 0; i < doc.entities.size(); ++i) {
    const auto& e = doc.entities[i];
    out << "  n" << i << " [label=\"" << escape(e.surface) << "\\n("
        << escape(e.label) << ")\"];\n";
  }
  for (int i = 0; i < graph.n_nodes(); ++i)
    for (int j = 0; j < graph.n_nodes(); ++j) {
      if (i == j) continue;
      EdgeClass c = graph.at(i, j);
      if (c == kNoRelation) continue;
      out << "  n" << i << " -> n" << j << " [label=\""
          << escape(edge_class_name(c)) << "\"];\n";
    }
  out << "}\n";
  return out.str();
}

}  // namespace ee

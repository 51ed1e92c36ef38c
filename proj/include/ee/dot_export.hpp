#ifndef EE_DOT_EXPORT_HPP
#define EE_DOT_EXPORT_HPP

#include <string>

#include "ee/corpus.hpp"
#include "ee/relgraph.hpp"

namespace ee {

// Graphviz rendering of one document's relation graph: one node per entity
// (surface + entity label), one directed edge per labelled pair. Output is
// byte-stable: nodes in entity order, edges sorted by (head, tail).
std::string graph_to_dot(const Document& doc, const RelationGraph& graph);

}  // namespace ee

#endif  // EE_DOT_EXPORT_HPP

#ifndef EE_METRICS_HPP
#define EE_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "ee/corpus.hpp"
#include "ee/relgraph.hpp"

namespace ee {

struct ClassCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / (tp + fn); }
  double f_score() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

// Micro precision/recall/F per relation class plus pooled overall counts.
// NoRelation is never a class here.
struct MetricsReport {
  std::map<std::string, ClassCounts> per_class;
  ClassCounts overall;  // pooled tp/fp/fn over all classes
};

// Scores one document: a predicted edge is a true positive iff the identical
// (head, tail, label) triple exists in gold. Duplicate gold triples count
// once.
MetricsReport score_document(const std::vector<RelationInstance>& gold,
                             const RelationGraph& predicted);

// Pools counts across documents. Sides must be index-aligned.
MetricsReport score_split(const std::vector<Document>& docs,
                          const std::vector<RelationGraph>& predicted);

void merge_into(MetricsReport& acc, const MetricsReport& part);

// Per-class rows plus Overall, columns Prec./Recall/F-score at 3 decimals.
std::string report_table(const MetricsReport& report);
std::string report_csv(const MetricsReport& report);

}  // namespace ee

#endif  // EE_METRICS_HPP

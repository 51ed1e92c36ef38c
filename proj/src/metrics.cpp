#include "ee/metrics.hpp"

#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ee {

MetricsReport score_document(const std::vector<RelationInstance>& gold,
                             const RelationGraph& predicted) {
  MetricsReport report;
  // make every relation class present so reports have a stable shape
  for (const auto& name : relation_class_names()) report.per_class[name];

  std::set<std::tuple<int, int, std::string>> gold_set;
  for (const auto& rel : gold) gold_set.insert({rel.head, rel.tail, rel.label});

  std::set<std::tuple<int, int, std::string>> pred_set;
  for (int i = 0; i < predicted.n_nodes(); ++i) {
    for (int j = 0; j < predicted.n_nodes(); ++j) {
      if (i == j) continue;
      EdgeClass c = predicted.at(i, j);
      if (c != kNoRelation) pred_set.insert({i, j, edge_class_name(c)});
    }
  }

  for (const auto& triple : pred_set) {
    auto& counts = report.per_class[std::get<2>(triple)];
    if (gold_set.count(triple))
      ++counts.tp;
    else
      ++counts.fp;
  }
  for (const auto& triple : gold_set) {
    if (!pred_set.count(triple)) ++report.per_class[std::get<2>(triple)].fn;
  }
  for (const auto& [name, counts] : report.per_class) {
    report.overall.tp += counts.tp;
    report.overall.fp += counts.fp;
    report.overall.fn += counts.fn;
  }
  return report;
}

void merge_into(MetricsReport& acc, const MetricsReport& part) {
  for (const auto& [name, counts] : part.per_class) {
    auto& dst = acc.per_class[name];
    dst.tp += counts.tp;
    dst.fp += counts.fp;
    dst.fn += counts.fn;
  }
  acc.overall.tp += part.overall.tp;
  acc.overall.fp += part.overall.fp;
  acc.overall.fn += part.overall.fn;
}

MetricsReport score_split(const std::vector<Document>& docs,
                          const std::vector<RelationGraph>& predicted) {
  if (docs.size() != predicted.size())
    throw std::invalid_argument("document/graph count mismatch");
  MetricsReport report;
  for (const auto& name : relation_class_names()) report.per_class[name];
  for (size_t i = 0; i < docs.size(); ++i) {
    if (predicted[i].n_nodes() != static_cast<int>(docs[i].entities.size()))
      throw std::invalid_argument("graph node count mismatch for document " +
                                  docs[i].doc_id);
    merge_into(report, score_document(docs[i].relations, predicted[i]));
  }
  return report;
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream out;
  size_t w = 7;
  for (const auto& name : relation_class_names())
    w = std::max(w, name.size());
  out << std::left << std::setw(static_cast<int>(w)) << "Relation"
      << "   Prec.  Recall F-score\n";
  out << std::fixed << std::setprecision(3);
  auto row = [&](const std::string& name, const ClassCounts& c) {
    out << std::left << std::setw(static_cast<int>(w)) << name << std::right
        << std::setw(8) << c.precision() << std::setw(8) << c.recall()
        << std::setw(8) << c.f_score() << '\n';
  };
  for (const auto& name : relation_class_names()) {
    auto it = report.per_class.find(name);
    row(name, it != report.per_class.end() ? it->second : ClassCounts{});
  }
  row("Overall", report.overall);
  return out.str();
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "relation,tp,fp,fn,precision,recall,f\n" << std::fixed
      << std::setprecision(6);
  auto row = [&](const std::string& name, const ClassCounts& c) {
    out << name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
        << c.precision() << ',' << c.recall() << ',' << c.f_score() << '\n';
  };
  for (const auto& name : relation_class_names()) {
    auto it = report.per_class.find(name);
    row(name, it != report.per_class.end() ? it->second : ClassCounts{});
  }
  row("Overall", report.overall);
  return out.str();
}

}  // namespace ee

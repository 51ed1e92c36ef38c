#include "ee/relgraph.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace ee {

namespace {
const std::vector<std::string> kRelationNames = {
    "Next_Operation",    "Recipe_Precursor",     "Recipe_Target",
    "Participant_Material", "Solvent_Material",  "Atmospheric_Material",
    "Property_Of",       "Condition_Of",         "Number_Of",
    "Amount_Of",         "Descriptor_Of",        "Brand_Of",
    "Type_Of",           "Apparatus_Of",         "Apparatus_Attr_Of",
    "Coref_Of"};
const std::string kNoRelationName = "NoRelation";
}  // namespace

const std::vector<std::string>& relation_class_names() {
  return kRelationNames;
}

EdgeClass relation_class_id(const std::string& name) {
  static const std::unordered_map<std::string, EdgeClass> index = [] {
    std::unordered_map<std::string, EdgeClass> m;
    for (size_t i = 0; i < kRelationNames.size(); ++i)
      m[kRelationNames[i]] = static_cast<EdgeClass>(i + 1);
    return m;
  }();
  auto it = index.find(name);
  if (it == index.end())
    throw std::invalid_argument("unknown relation class: " + name);
  return it->second;
}

const std::string& edge_class_name(EdgeClass c) {
  if (c == kNoRelation) return kNoRelationName;
  if (c < 1 || c > kNumRelationClasses)
    throw std::invalid_argument("edge class out of range: " + std::to_string(c));
  return kRelationNames[c - 1];
}

void RelationGraph::check(int head, int tail) const {
  if (head < 0 || head >= n_ || tail < 0 || tail >= n_)
    throw std::out_of_range("node index out of range");
  if (head == tail) throw std::invalid_argument("self-edges are not allowed");
}

int RelationGraph::count_edges() const {
  if (n_ == 0) return 0;
  int count = 0;
  for (size_t i = 0; i < edges_.size(); ++i) {
    if (static_cast<int>(i / n_) == static_cast<int>(i % n_)) continue;
    if (edges_[i] != kNoRelation) ++count;
  }
  return count;
}

int entity_distance(int i, int j) {
  if (i < 0 || j < 0) throw std::out_of_range("node index out of range");
  return i > j ? i - j : j - i;
}

std::vector<Pair> pairs_at_distance(int n_nodes, int d1, int d2) {
  if (d1 <= 0) throw std::invalid_argument("d1 must be positive");
  std::vector<Pair> pairs;
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = 0; j < n_nodes; ++j) {
      if (i == j) continue;
      int d = entity_distance(i, j);
      if (d >= d1 && (d2 < 0 || d < d2)) pairs.push_back({i, j});
    }
  }
  return pairs;
}

EditSchedule build_schedule(int n_nodes, int d_max) {
  if (d_max < 1) throw std::invalid_argument("d_max must be >= 1");
  EditSchedule schedule;
  schedule.d_max = d_max;
  if (n_nodes < 2) return schedule;
  int rounds = std::min(d_max, n_nodes - 1);
  for (int d = 1; d <= rounds; ++d) {
    auto bucket = (d == d_max) ? pairs_at_distance(n_nodes, d_max, -1)
                               : pairs_at_distance(n_nodes, d, d + 1);
    schedule.buckets.push_back(std::move(bucket));
  }
  return schedule;
}

EditSchedule random_schedule(int n_nodes, int n_buckets, uint64_t seed) {
  if (n_buckets < 1) throw std::invalid_argument("n_buckets must be >= 1");
  EditSchedule schedule;
  schedule.d_max = n_buckets;
  if (n_nodes < 2) return schedule;
  auto pairs = pairs_at_distance(n_nodes, 1, -1);
  std::mt19937_64 rng(seed);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  schedule.buckets.resize(n_buckets);
  for (size_t i = 0; i < pairs.size(); ++i)
    schedule.buckets[i % n_buckets].push_back(pairs[i]);
  return schedule;
}

RelationGraph init_random_graph(int n_nodes, int n_edges, uint64_t seed) {
  long max_edges = static_cast<long>(n_nodes) * (n_nodes - 1);
  if (n_edges < 0 || n_edges > max_edges)
    throw std::invalid_argument("n_edges exceeds ordered pair count");
  auto pairs = pairs_at_distance(n_nodes, 1, -1);
  std::mt19937_64 rng(seed);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::uniform_int_distribution<int> cls(1, kNumRelationClasses);
  RelationGraph graph(n_nodes);
  for (int e = 0; e < n_edges; ++e)
    graph.set(pairs[e].head, pairs[e].tail, cls(rng));
  return graph;
}

std::string graph_to_json(const RelationGraph& graph,
                          const std::string& doc_id) {
  nlohmann::ordered_json j;
  j["doc_id"] = doc_id;
  j["n_nodes"] = graph.n_nodes();
  j["edges"] = nlohmann::json::array();
  for (int i = 0; i < graph.n_nodes(); ++i) {
    for (int k = 0; k < graph.n_nodes(); ++k) {
      if (i == k) continue;
      EdgeClass c = graph.at(i, k);
      if (c == kNoRelation) continue;
      j["edges"].push_back(
          {{"head", i}, {"tail", k}, {"label", edge_class_name(c)}});
    }
  }
  return j.dump();
}

RelationGraph graph_from_json(const std::string& json, std::string* doc_id) {
  auto j = nlohmann::json::parse(json);
  RelationGraph graph(j.at("n_nodes").get<int>());
  if (doc_id) *doc_id = j.at("doc_id").get<std::string>();
  for (const auto& e : j.at("edges")) {
    graph.set(e.at("head").get<int>(), e.at("tail").get<int>(),
              relation_class_id(e.at("label").get<std::string>()));
  }
  return graph;
}

}  // namespace ee

#pragma once

#include <map>
#include <string>
#include <vector>

#include "auvf/audit.hpp"
#include "auvf/image.hpp"
#include "auvf/rng.hpp"

namespace auvf {

struct Edge {
  int user, item;
};
inline bool operator<(const Edge& a, const Edge& b) {
  return a.user < b.user || (a.user == b.user && a.item < b.item);
}
inline bool operator==(const Edge& a, const Edge& b) {
  return a.user == b.user && a.item == b.item;
}

// Bipartite user-item interaction graph with implicit feedback
// (y_{u,i} = 1 for every stored edge). Edges keep record order; duplicates
// are dropped on construction. Edge reads on the system graph are audited;
// graphs built from an ObservedView are attacker-visible and exempt.
class InteractionGraph {
public:
  InteractionGraph() = default;
  InteractionGraph(std::vector<int> users, std::vector<int> items, std::vector<Edge> edges);

  const std::vector<int>& users() const { return users_; }
  const std::vector<int>& items() const { return items_; }

  const std::vector<Edge>& edges() const {
    note_read();
    return edges_;
  }
  size_t edge_count() const { return edges_.size(); }

  int degree_item(int item) const;  // distinct interacting users
  int degree_user(int user) const;
  const std::vector<int>& user_items(int user) const;
  const std::vector<int>& item_users(int item) const;
  bool has_edge(int user, int item) const;

  int user_index(int user) const;
  int item_index(int item) const;
  bool has_item(int item) const { return item_idx_.count(item) > 0; }
  bool has_user(int user) const { return user_idx_.count(user) > 0; }
  int n_users() const { return (int)users_.size(); }
  int n_items() const { return (int)items_.size(); }

  void set_attacker_visible(bool v) { attacker_visible_ = v; }

private:
  void note_read() const {
    if (!attacker_visible_) audit::note_raw_edge_read();
  }

  std::vector<int> users_, items_;
  std::vector<Edge> edges_;
  std::map<int, int> user_idx_, item_idx_;
  std::vector<std::vector<int>> by_user_, by_item_;
  bool attacker_visible_ = false;
};

struct Dataset {
  InteractionGraph graph;
  ImageStore images;
  std::map<int, int> item_attr;  // planted visual attribute (synthetic data only)
  std::string fingerprint;       // content hash of interactions + images
};

struct DatasetSplit {
  std::vector<Edge> train, test;
  double achieved_fraction = 0.0;
  bool warning_empty_test = false;
};

// Attacker-visible slice: observed users and their edges, with every edge to a
// cold-start item removed.
struct ObservedView {
  std::vector<int> observed_users;
  std::vector<Edge> edges;
  double p = 0.0;

  // induced graph for attacker-side modeling (marked attacker-visible)
  InteractionGraph to_graph() const;
  std::vector<int> observed_items() const;
};

// One `user<TAB>item` per line; images as `<item_id>.png` under image_dir.
Dataset load_interactions(const std::string& path, const std::string& image_dir);

// Planted-attribute synthetic data: users and items carry cluster labels and
// item images encode the cluster as a dominant color patch with the given
// strength. Interactions are denser inside matching clusters.
Dataset synth_dataset(int n_users, int n_items, double density,
                      double planted_attribute_strength, uint64_t seed,
                      int image_size = 64);

std::vector<int> select_cold_items(const InteractionGraph& graph, int K);

ObservedView observe_users(const InteractionGraph& graph, double p,
                           const std::vector<int>& cold_items, uint64_t seed);

DatasetSplit split_leave_one_out(const InteractionGraph& graph,
                                 double target_test_fraction, uint64_t seed);

constexpr int kSynthClusters = 4;
inline int synth_user_cluster(int user_id) { return user_id % kSynthClusters; }
inline int synth_item_cluster(int item_id) { return item_id % kSynthClusters; }

void save_interactions_tsv(const std::string& path, const std::vector<Edge>& edges);
void save_split_manifest(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split_manifest(const std::string& path, const InteractionGraph& graph);

}  // namespace auvf

#pragma once

#include <map>
#include <vector>

#include "auvf/data.hpp"
#include "auvf/nn.hpp"

namespace auvf {

// Embedding table keyed by entity index; view tag distinguishes the ID,
// visual, and fused spaces.
enum class EmbedView { Id, Visual, Fused };

struct EmbeddingTable {
  Tensor rows;  // [n, d]
  int layer = 0;
  EmbedView view = EmbedView::Id;

  int n() const { return rows.dim(0); }
  int d() const { return rows.dim(1); }
};

// Symmetric-normalized bipartite adjacency: coefficient 1/sqrt(|N_u||N_i|)
// on every edge, indexed both ways.
struct NormalizedAdjacency {
  int n_users = 0, n_items = 0;
  std::vector<std::vector<std::pair<int, double>>> user_nbrs;  // user -> (item, coeff)
  std::vector<std::vector<std::pair<int, double>>> item_nbrs;

  static NormalizedAdjacency build(const InteractionGraph& graph);
};

struct LayerPair {
  EmbeddingTable users, items;
};

// K rounds of LightGCN propagation; returns layers 0..K.
std::vector<LayerPair> lightgcn_propagate(const InteractionGraph& graph,
                                          const EmbeddingTable& user_init,
                                          const EmbeddingTable& item_init, int layers);

EmbeddingTable layer_average(const std::vector<EmbeddingTable>& per_layer);

// KNN-sparsified cosine affinity over item visual features.
struct AffinityGraph {
  int n = 0;
  int K = 0;
  // rows of the normalized affinity S_hat (and the pre-normalization sparse
  // similarities), stored as (col, value), col ascending
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<std::vector<std::pair<int, double>>> sparse_sims;
};

AffinityGraph build_affinity(const Tensor& features /*[n, d_f]*/, int K);

// item-feature propagation E <- S_hat E, `hops` times
Tensor enhance_visual(const AffinityGraph& affinity, const Tensor& raw, int hops);

// per-user aggregation of enhanced item visuals, Eq.-7 coefficients; the
// caller applies the d_f -> d projection
Tensor aggregate_user_visual(const InteractionGraph& graph, const Tensor& item_visual,
                             const std::vector<int>& item_order);

Tensor fuse(const Tensor& e_id, const Tensor& e_v);

struct PreferenceConfig {
  int dim = 64;
  int layers = 3;
  int affinity_k = 10;
  int hops = 1;
  int epochs = 200;
  double lr = 5e-2;
  double reg = 1e-4;
};

// Attacker-side surrogate: LightGCN over the observed graph fused with
// affinity-enhanced visual aggregates. embed_user() yields e_u.
class PreferenceModel {
public:
  static PreferenceModel train(const InteractionGraph& graph,
                               const Tensor& item_features /*[n_items, d_f]*/,
                               const PreferenceConfig& cfg, uint64_t seed);

  Tensor embed_user(int user_id) const;
  Tensor mean_user_embedding() const;  // over all trained users
  const std::vector<int>& user_ids() const { return user_ids_; }
  double score(int user_id, int item_id) const;
  bool has_item(int item_id) const { return item_index_.count(item_id) > 0; }

  std::map<std::string, Tensor> state() const;

private:
  std::vector<int> user_ids_, item_ids_;
  std::map<int, int> user_index_, item_index_;
  Tensor user_fused_;  // [n_users, d]
  Tensor item_final_;  // [n_items, d]
};

}  // namespace auvf

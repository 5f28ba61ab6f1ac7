#include "auvf/pref.hpp"

#include <algorithm>
#include <cmath>

namespace auvf {

using namespace nn;

NormalizedAdjacency NormalizedAdjacency::build(const InteractionGraph& graph) {
  NormalizedAdjacency adj;
  adj.n_users = graph.n_users();
  adj.n_items = graph.n_items();
  adj.user_nbrs.resize(adj.n_users);
  adj.item_nbrs.resize(adj.n_items);
  for (const Edge& e : graph.edges()) {
    const int ui = graph.user_index(e.user);
    const int ii = graph.item_index(e.item);
    const double du = graph.degree_user(e.user);
    const double di = graph.degree_item(e.item);
    const double c = 1.0 / std::sqrt(du * di);
    adj.user_nbrs[ui].push_back({ii, c});
    adj.item_nbrs[ii].push_back({ui, c});
  }
  return adj;
}

namespace {

void propagate_once(const NormalizedAdjacency& adj, const Tensor& users_in,
                    const Tensor& items_in, Tensor& users_out, Tensor& items_out) {
  const int d = users_in.dim(1);
  users_out = Tensor({adj.n_users, d});
  items_out = Tensor({adj.n_items, d});
  for (int u = 0; u < adj.n_users; ++u)
    for (auto& [i, c] : adj.user_nbrs[u])
      for (int k = 0; k < d; ++k) users_out.at(u, k) += c * items_in.at(i, k);
  for (int i = 0; i < adj.n_items; ++i)
    for (auto& [u, c] : adj.item_nbrs[i])
      for (int k = 0; k < d; ++k) items_out.at(i, k) += c * users_in.at(u, k);
}

// user-side aggregation as an autograd node (grad flows back to items)
Var propagate_users_var(const NormalizedAdjacency& adj, const Var& items) {
  const int d = items->val.dim(1);
  Tensor out({adj.n_users, d});
  for (int u = 0; u < adj.n_users; ++u)
    for (auto& [i, c] : adj.user_nbrs[u])
      for (int k = 0; k < d; ++k) out.at(u, k) += c * items->val.at(i, k);
  auto n = std::make_shared<Node>();
  n->val = std::move(out);
  n->prev = {items};
  n->requires_grad = items->requires_grad;
  if (n->requires_grad) {
    const NormalizedAdjacency* a = &adj;
    n->back = [a, d](Node& nd) {
      auto& it = nd.prev[0];
      it->ensure_grad();
      for (int u = 0; u < a->n_users; ++u)
        for (auto& [i, c] : a->user_nbrs[u])
          for (int k = 0; k < d; ++k) it->grad.at(i, k) += c * nd.grad.at(u, k);
    };
  }
  return n;
}

Var propagate_items_var(const NormalizedAdjacency& adj, const Var& users) {
  const int d = users->val.dim(1);
  Tensor out({adj.n_items, d});
  for (int i = 0; i < adj.n_items; ++i)
    for (auto& [u, c] : adj.item_nbrs[i])
      for (int k = 0; k < d; ++k) out.at(i, k) += c * users->val.at(u, k);
  auto n = std::make_shared<Node>();
  n->val = std::move(out);
  n->prev = {users};
  n->requires_grad = users->requires_grad;
  if (n->requires_grad) {
    const NormalizedAdjacency* a = &adj;
    n->back = [a, d](Node& nd) {
      auto& us = nd.prev[0];
      us->ensure_grad();
      for (int i = 0; i < a->n_items; ++i)
        for (auto& [u, c] : a->item_nbrs[i])
          for (int k = 0; k < d; ++k) us->grad.at(u, k) += c * nd.grad.at(i, k);
    };
  }
  return n;
}

// BPR score differences <e_u, e_{i+} - e_{i-}> for a batch of triples
Var bpr_diff(const Var& e_u, const Var& e_i, std::vector<std::pair<int, int>> pos,
             std::vector<int> negs) {
  const int d = e_u->val.dim(1);
  Tensor out({(int)pos.size()});
  for (size_t s = 0; s < pos.size(); ++s) {
    double v = 0.0;
    for (int j = 0; j < d; ++j)
      v += e_u->val.at(pos[s].first, j) *
           (e_i->val.at(pos[s].second, j) - e_i->val.at(negs[s], j));
    out[(int64_t)s] = v;
  }
  auto n = std::make_shared<Node>();
  n->val = std::move(out);
  n->prev = {e_u, e_i};
  n->requires_grad = e_u->requires_grad || e_i->requires_grad;
  if (n->requires_grad) {
    n->back = [pos = std::move(pos), negs = std::move(negs), d](Node& nd) {
      auto& e_u = nd.prev[0];
      auto& e_i = nd.prev[1];
      if (e_u->requires_grad) e_u->ensure_grad();
      if (e_i->requires_grad) e_i->ensure_grad();
      for (size_t s = 0; s < pos.size(); ++s) {
        const double g = nd.grad[(int64_t)s];
        const int u = pos[s].first, ip = pos[s].second, in = negs[s];
        if (e_u->requires_grad)
          for (int j = 0; j < d; ++j)
            e_u->grad.at(u, j) += g * (e_i->val.at(ip, j) - e_i->val.at(in, j));
        if (e_i->requires_grad)
          for (int j = 0; j < d; ++j) {
            e_i->grad.at(ip, j) += g * e_u->val.at(u, j);
            e_i->grad.at(in, j) -= g * e_u->val.at(u, j);
          }
      }
    };
  }
  return n;
}

}  // namespace

std::vector<LayerPair> lightgcn_propagate(const InteractionGraph& graph,
                                          const EmbeddingTable& user_init,
                                          const EmbeddingTable& item_init, int layers) {
  AUVF_CHECK(user_init.n() == graph.n_users(), "lightgcn: user table size mismatch");
  AUVF_CHECK(item_init.n() == graph.n_items(), "lightgcn: item table size mismatch");
  AUVF_CHECK(user_init.d() == item_init.d(), "lightgcn: dimension mismatch");

  NormalizedAdjacency adj = NormalizedAdjacency::build(graph);
  std::vector<LayerPair> out;
  out.push_back({user_init, item_init});
  out[0].users.layer = 0;
  out[0].items.layer = 0;
  for (int k = 1; k <= layers; ++k) {
    LayerPair next;
    next.users.layer = next.items.layer = k;
    next.users.view = next.items.view = EmbedView::Id;
    propagate_once(adj, out[k - 1].users.rows, out[k - 1].items.rows, next.users.rows,
                   next.items.rows);
    out.push_back(std::move(next));
  }
  return out;
}

EmbeddingTable layer_average(const std::vector<EmbeddingTable>& per_layer) {
  AUVF_CHECK(!per_layer.empty(), "layer_average: empty layer list");
  EmbeddingTable avg;
  avg.rows = per_layer[0].rows;
  avg.view = per_layer[0].view;
  for (size_t k = 1; k < per_layer.size(); ++k) {
    AUVF_CHECK(per_layer[k].rows.same_shape(avg.rows), "layer_average: shape mismatch");
    avg.rows.arr() += per_layer[k].rows.arr();
  }
  avg.rows.arr() /= (double)per_layer.size();
  return avg;
}

AffinityGraph build_affinity(const Tensor& features, int K) {
  const int n = features.dim(0), d = features.dim(1);
  AUVF_CHECK(K >= 1 && K < n, "build_affinity: need 1 <= K < n_items");

  std::vector<double> norms(n);
  for (int a = 0; a < n; ++a) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += features.at(a, j) * features.at(a, j);
    norms[a] = std::sqrt(s);
    AUVF_CHECK(norms[a] > 1e-12, "build_affinity: zero-norm feature for item index ", a);
  }

  AffinityGraph g;
  g.n = n;
  g.K = K;
  g.sparse_sims.resize(n);
  g.rows.resize(n);

  // row-wise top-K cosine similarities, diagonal excluded; ties broken by
  // ascending column index
  std::vector<double> row_sum(n, 0.0);
  for (int a = 0; a < n; ++a) {
    std::vector<std::pair<double, int>> sims;
    sims.reserve(n - 1);
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      double dp = 0.0;
      for (int j = 0; j < d; ++j) dp += features.at(a, j) * features.at(b, j);
      sims.push_back({dp / (norms[a] * norms[b]), b});
    }
    std::sort(sims.begin(), sims.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    sims.resize(K);
    std::sort(sims.begin(), sims.end(),
              [](const auto& x, const auto& y) { return x.second < y.second; });
    for (auto& [v, b] : sims) {
      g.sparse_sims[a].push_back({b, v});
      row_sum[a] += v;
    }
  }

  // S_hat = D^{-1/2} S_tilde D^{-1/2}, D from row sums; rows with no positive
  // mass are zeroed (D^{-1/2} undefined there)
  std::vector<double> dinv(n, 0.0);
  for (int a = 0; a < n; ++a)
    if (row_sum[a] > 1e-12) dinv[a] = 1.0 / std::sqrt(row_sum[a]);
  for (int a = 0; a < n; ++a) {
    if (dinv[a] == 0.0) continue;
    for (auto& [b, v] : g.sparse_sims[a]) {
      double w = dinv[a] * v * dinv[b];
      if (w != 0.0) g.rows[a].push_back({b, w});
    }
  }
  return g;
}

Tensor enhance_visual(const AffinityGraph& affinity, const Tensor& raw, int hops) {
  AUVF_CHECK(raw.dim(0) == affinity.n, "enhance_visual: table size mismatch");
  const int d = raw.dim(1);
  Tensor cur = raw;
  for (int h = 0; h < hops; ++h) {
    Tensor next({affinity.n, d});
    for (int a = 0; a < affinity.n; ++a)
      for (auto& [b, w] : affinity.rows[a])
        for (int j = 0; j < d; ++j) next.at(a, j) += w * cur.at(b, j);
    cur = std::move(next);
  }
  return cur;
}

Tensor aggregate_user_visual(const InteractionGraph& graph, const Tensor& item_visual,
                             const std::vector<int>& item_order) {
  AUVF_CHECK((int)item_order.size() == item_visual.dim(0),
             "aggregate_user_visual: item order size mismatch");
  std::map<int, int> item_row;
  for (size_t i = 0; i < item_order.size(); ++i) item_row[item_order[i]] = (int)i;

  const int d = item_visual.dim(1);
  Tensor out({graph.n_users(), d});
  for (int ui = 0; ui < graph.n_users(); ++ui) {
    const int user = graph.users()[ui];
    const auto& items = graph.user_items(user);
    if (items.empty()) continue;
    const double du = (double)items.size();
    for (int item : items) {
      auto it = item_row.find(item);
      AUVF_CHECK(it != item_row.end(), "aggregate_user_visual: item ", item,
                 " missing from visual table");
      const double c = 1.0 / std::sqrt(du * (double)graph.degree_item(item));
      for (int j = 0; j < d; ++j) out.at(ui, j) += c * item_visual.at(it->second, j);
    }
  }
  return out;
}

Tensor fuse(const Tensor& e_id, const Tensor& e_v) {
  AUVF_CHECK(e_id.same_shape(e_v), "fuse: dimension mismatch");
  Tensor out = e_id;
  out.arr() += e_v.arr();
  return out;
}

PreferenceModel PreferenceModel::train(const InteractionGraph& graph,
                                       const Tensor& item_features,
                                       const PreferenceConfig& cfg, uint64_t seed) {
  AUVF_CHECK(graph.edge_count() > 0, "train_preference: empty training split");
  const int n_users = graph.n_users(), n_items = graph.n_items();
  const int d = cfg.dim, d_f = item_features.dim(1);
  AUVF_CHECK(item_features.dim(0) == n_items, "train_preference: feature table mismatch");

  Rng rng(seed);
  ParamSet ps;
  Var e_user0 = ps.make("user0", {n_users, d}, rng, 0.1);
  Var e_item0 = ps.make("item0", {n_items, d}, rng, 0.1);
  Var proj = ps.make("vproj", {d_f, d}, rng, 0.1);

  NormalizedAdjacency adj = NormalizedAdjacency::build(graph);

  // enhanced-visual aggregate per user; raw features are frozen so this is
  // precomputed once, the trainable projection is applied per step
  const int affinity_k = std::min(cfg.affinity_k, n_items - 1);
  Tensor user_visual_raw;
  if (affinity_k >= 1) {
    AffinityGraph aff = build_affinity(item_features, affinity_k);
    Tensor enhanced = enhance_visual(aff, item_features, cfg.hops);
    user_visual_raw = aggregate_user_visual(graph, enhanced, graph.items());
  } else {
    user_visual_raw = aggregate_user_visual(graph, item_features, graph.items());
  }
  Var user_visual = constant(user_visual_raw);

  std::vector<std::pair<int, int>> pos;
  pos.reserve(graph.edge_count());
  for (const Edge& e : graph.edges())
    pos.push_back({graph.user_index(e.user), graph.item_index(e.item)});

  Adam opt(ps.all(), cfg.lr);

  auto forward_tables = [&]() -> std::pair<Var, Var> {
    std::vector<Var> user_layers{e_user0}, item_layers{e_item0};
    for (int k = 1; k <= cfg.layers; ++k) {
      user_layers.push_back(propagate_users_var(adj, item_layers[k - 1]));
      item_layers.push_back(propagate_items_var(adj, user_layers[k - 1]));
    }
    Var user_sum = user_layers[0], item_sum = item_layers[0];
    for (int k = 1; k <= cfg.layers; ++k) {
      user_sum = add(user_sum, user_layers[k]);
      item_sum = add(item_sum, item_layers[k]);
    }
    Var e_uid = scale(user_sum, 1.0 / (cfg.layers + 1));
    Var e_iid = scale(item_sum, 1.0 / (cfg.layers + 1));
    Var e_u = add(e_uid, matmul(user_visual, proj));
    return {e_u, e_iid};
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto [e_u, e_i] = forward_tables();
    std::vector<int> negs(pos.size());
    for (size_t s = 0; s < pos.size(); ++s) negs[s] = rng.uniform_int(n_items);

    Var diff = bpr_diff(e_u, e_i, pos, negs);
    Var loss = mean(softplus(neg(diff)));
    Var reg = scale(
        add(add(sum(square(e_user0)), sum(square(e_item0))), sum(square(proj))), cfg.reg);
    loss = add(loss, reg);
    AUVF_CHECK(std::isfinite(loss->val[0]),
               "train_preference: diverged (non-finite loss) at epoch ", epoch);

    opt.zero_grad();
    backward(loss);
    opt.step();
  }

  auto [final_u, final_i] = forward_tables();
  PreferenceModel model;
  model.user_ids_ = graph.users();
  model.item_ids_ = graph.items();
  for (int i = 0; i < n_users; ++i) model.user_index_[graph.users()[i]] = i;
  for (int i = 0; i < n_items; ++i) model.item_index_[graph.items()[i]] = i;
  model.user_fused_ = final_u->val;
  model.item_final_ = final_i->val;
  return model;
}

Tensor PreferenceModel::embed_user(int user_id) const {
  auto it = user_index_.find(user_id);
  AUVF_CHECK(it != user_index_.end(), "embed_user: unknown user ", user_id);
  const int d = user_fused_.dim(1);
  Tensor e({d});
  for (int j = 0; j < d; ++j) e[j] = user_fused_.at(it->second, j);
  return e;
}

Tensor PreferenceModel::mean_user_embedding() const {
  const int d = user_fused_.dim(1);
  Tensor e({d});
  for (int i = 0; i < user_fused_.dim(0); ++i)
    for (int j = 0; j < d; ++j) e[j] += user_fused_.at(i, j);
  if (user_fused_.dim(0) > 0) e.arr() /= (double)user_fused_.dim(0);
  return e;
}

double PreferenceModel::score(int user_id, int item_id) const {
  auto ui = user_index_.find(user_id);
  auto ii = item_index_.find(item_id);
  AUVF_CHECK(ui != user_index_.end(), "score: unknown user ", user_id);
  AUVF_CHECK(ii != item_index_.end(), "score: unknown item ", item_id);
  double s = 0.0;
  for (int j = 0; j < user_fused_.dim(1); ++j)
    s += user_fused_.at(ui->second, j) * item_final_.at(ii->second, j);
  return s;
}

std::map<std::string, Tensor> PreferenceModel::state() const {
  Tensor uids({(int)user_ids_.size()});
  for (size_t i = 0; i < user_ids_.size(); ++i) uids[i] = user_ids_[i];
  Tensor iids({(int)item_ids_.size()});
  for (size_t i = 0; i < item_ids_.size(); ++i) iids[i] = item_ids_[i];
  return {{"user_ids", uids},
          {"item_ids", iids},
          {"user_fused", user_fused_},
          {"item_final", item_final_}};
}

}  // namespace auvf

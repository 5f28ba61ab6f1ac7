#include "auvf/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "auvf/hash.hpp"

namespace fs = std::filesystem;

namespace auvf {

InteractionGraph::InteractionGraph(std::vector<int> users, std::vector<int> items,
                                   std::vector<Edge> edges)
    : users_(std::move(users)), items_(std::move(items)) {
  std::sort(users_.begin(), users_.end());
  std::sort(items_.begin(), items_.end());
  users_.erase(std::unique(users_.begin(), users_.end()), users_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  for (size_t i = 0; i < users_.size(); ++i) user_idx_[users_[i]] = (int)i;
  for (size_t i = 0; i < items_.size(); ++i) item_idx_[items_[i]] = (int)i;

  by_user_.resize(users_.size());
  by_item_.resize(items_.size());
  std::set<Edge> seen;
  edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    AUVF_CHECK(user_idx_.count(e.user), "edge references unknown user ", e.user);
    AUVF_CHECK(item_idx_.count(e.item), "edge references unknown item ", e.item);
    if (!seen.insert(e).second) continue;
    edges_.push_back(e);
    by_user_[user_idx_[e.user]].push_back(e.item);
    by_item_[item_idx_[e.item]].push_back(e.user);
  }
}

int InteractionGraph::degree_item(int item) const {
  note_read();
  return (int)by_item_[item_index(item)].size();
}

int InteractionGraph::degree_user(int user) const {
  note_read();
  return (int)by_user_[user_index(user)].size();
}

const std::vector<int>& InteractionGraph::user_items(int user) const {
  note_read();
  return by_user_[user_index(user)];
}

const std::vector<int>& InteractionGraph::item_users(int item) const {
  note_read();
  return by_item_[item_index(item)];
}

bool InteractionGraph::has_edge(int user, int item) const {
  note_read();
  const auto& v = by_user_[user_index(user)];
  return std::find(v.begin(), v.end(), item) != v.end();
}

int InteractionGraph::user_index(int user) const {
  auto it = user_idx_.find(user);
  AUVF_CHECK(it != user_idx_.end(), "unknown user ", user);
  return it->second;
}

int InteractionGraph::item_index(int item) const {
  auto it = item_idx_.find(item);
  AUVF_CHECK(it != item_idx_.end(), "unknown item ", item);
  return it->second;
}

InteractionGraph ObservedView::to_graph() const {
  std::vector<int> items;
  for (const Edge& e : edges) items.push_back(e.item);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  InteractionGraph g(observed_users, items, edges);
  g.set_attacker_visible(true);
  return g;
}

std::vector<int> ObservedView::observed_items() const {
  std::vector<int> items;
  for (const Edge& e : edges) items.push_back(e.item);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

Dataset load_interactions(const std::string& path, const std::string& image_dir) {
  std::ifstream in(path);
  AUVF_CHECK(in, "cannot open interaction file: ", path);

  std::vector<Edge> edges;
  std::vector<int> users, items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    long long u, i;
    if (!(ls >> u >> i)) fail("malformed interaction record at line ", lineno, ": ", line);
    std::string rest;
    if (ls >> rest) fail("malformed interaction record at line ", lineno, ": ", line);
    edges.push_back({(int)u, (int)i});
    users.push_back((int)u);
    items.push_back((int)i);
  }

  Dataset ds;
  ds.graph = InteractionGraph(users, items, edges);

  Hasher h;
  for (const Edge& e : ds.graph.edges()) h.update(&e, sizeof(e));
  for (int item : ds.graph.items()) {
    fs::path img = fs::path(image_dir) / (std::to_string(item) + ".png");
    AUVF_CHECK(fs::exists(img), "missing image file for item ", item, ": ", img.string());
    ItemImage im;
    im.item_id = item;
    im.pixels = read_png(img.string());
    h.update(im.pixels.data(), sizeof(double) * im.pixels.size());
    ds.images.put(std::move(im));
  }
  ds.fingerprint = h.hex();
  return ds;
}

namespace {

const double kClusterColors[kSynthClusters][3] = {
    {0.85, 0.20, 0.20},  // red
    {0.20, 0.80, 0.25},  // green
    {0.20, 0.30, 0.85},  // blue
    {0.85, 0.80, 0.20},  // yellow
};

Tensor render_item_image(int size, int visual_cluster, Rng& rng) {
  Tensor img({3, size, size});
  // muted background gradient
  double base[3] = {0.35 + 0.2 * rng.uniform(), 0.35 + 0.2 * rng.uniform(),
                    0.35 + 0.2 * rng.uniform()};
  for (int y = 0; y < size; ++y) {
    double shade = 0.85 + 0.3 * (double)y / size;
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = base[c] * shade;
  }
  // dominant color patch (~55% of the side), jittered position
  int pw = std::max(2, (int)(size * 0.55));
  int x0 = (int)((size - pw) * rng.uniform());
  int y0 = (int)((size - pw) * rng.uniform());
  const double* col = kClusterColors[visual_cluster];
  for (int y = y0; y < y0 + pw; ++y)
    for (int x = x0; x < x0 + pw; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
  // light texture noise
  for (int64_t i = 0; i < img.size(); ++i) {
    double v = img[i] + 0.02 * rng.gauss();
    img[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
  // quantize to 8 bit so in-memory pixels match PNG round trips exactly
  for (int64_t i = 0; i < img.size(); ++i)
    img[i] = std::round(img[i] * 255.0) / 255.0;
  return img;
}

}  // namespace

Dataset synth_dataset(int n_users, int n_items, double density,
                      double planted_attribute_strength, uint64_t seed, int image_size) {
  AUVF_CHECK(n_users > 0 && n_items > 0, "synth_dataset: counts must be positive");
  AUVF_CHECK(density > 0.0 && density <= 1.0, "synth_dataset: density must be in (0,1]");
  Rng rng(seed);

  // in-cluster interactions carry 75% of the probability mass
  const double in_mass = 0.75;
  const double p_in = density * kSynthClusters * in_mass;
  const double p_out = density * kSynthClusters * (1.0 - in_mass) / (kSynthClusters - 1);

  std::vector<Edge> edges;
  std::vector<int> users(n_users), items(n_items);
  for (int u = 0; u < n_users; ++u) users[u] = u;
  for (int i = 0; i < n_items; ++i) items[i] = i;

  for (int u = 0; u < n_users; ++u) {
    int cu = synth_user_cluster(u);
    bool any = false;
    for (int i = 0; i < n_items; ++i) {
      double p = (synth_item_cluster(i) == cu) ? p_in : p_out;
      if (rng.uniform() < p) {
        edges.push_back({u, i});
        any = true;
      }
    }
    if (!any) {
      // keep every user connected: one in-cluster edge
      int tries = 0;
      int i;
      do {
        i = rng.uniform_int(n_items);
      } while (synth_item_cluster(i) != cu && ++tries < 64);
      edges.push_back({u, i});
    }
  }

  Dataset ds;
  ds.graph = InteractionGraph(users, items, edges);

  Hasher h;
  for (const Edge& e : ds.graph.edges()) h.update(&e, sizeof(e));
  for (int i = 0; i < n_items; ++i) {
    int attr = (rng.uniform() < planted_attribute_strength)
                   ? synth_item_cluster(i)
                   : rng.uniform_int(kSynthClusters);
    ds.item_attr[i] = attr;
    ItemImage im;
    im.item_id = i;
    im.pixels = render_item_image(image_size, attr, rng);
    h.update(im.pixels.data(), sizeof(double) * im.pixels.size());
    ds.images.put(std::move(im));
  }
  ds.fingerprint = h.hex();
  return ds;
}

std::vector<int> select_cold_items(const InteractionGraph& graph, int K) {
  AUVF_CHECK(K <= graph.n_items(), "select_cold_items: K=", K, " exceeds item count ",
             graph.n_items());
  std::vector<std::pair<int, int>> deg_id;  // (degree, id)
  deg_id.reserve(graph.n_items());
  for (int item : graph.items()) deg_id.push_back({graph.degree_item(item), item});
  std::sort(deg_id.begin(), deg_id.end());
  std::vector<int> cold(K);
  for (int k = 0; k < K; ++k) cold[k] = deg_id[k].second;
  return cold;
}

ObservedView observe_users(const InteractionGraph& graph, double p,
                           const std::vector<int>& cold_items, uint64_t seed) {
  AUVF_CHECK(p >= 0.0 && p <= 1.0, "observe_users: p must be in [0,1]");
  Rng rng(seed);
  const int n = graph.n_users();
  const int m = (int)std::floor(p * n);
  std::vector<int> idx = rng.sample_without_replacement(n, m);
  std::sort(idx.begin(), idx.end());

  ObservedView view;
  view.p = p;
  view.observed_users.reserve(m);
  for (int i : idx) view.observed_users.push_back(graph.users()[i]);

  std::set<int> cold(cold_items.begin(), cold_items.end());
  std::set<int> obs(view.observed_users.begin(), view.observed_users.end());
  for (const Edge& e : graph.edges())
    if (obs.count(e.user) && !cold.count(e.item)) view.edges.push_back(e);
  return view;
}

DatasetSplit split_leave_one_out(const InteractionGraph& graph,
                                 double target_test_fraction, uint64_t seed) {
  AUVF_CHECK(target_test_fraction > 0.0 && target_test_fraction <= 0.5,
             "split_leave_one_out: fraction must be in (0, 0.5]");
  const auto& edges = graph.edges();
  const int total = (int)edges.size();
  const int target = (int)std::floor(target_test_fraction * total);

  // last edge index per user, record order
  std::map<int, int> last_idx;
  std::map<int, int> deg;
  for (int i = 0; i < total; ++i) {
    last_idx[edges[i].user] = i;
    deg[edges[i].user]++;
  }
  std::vector<int> eligible;
  for (auto& [u, d] : deg)
    if (d >= 2) eligible.push_back(u);

  Rng rng(seed);
  rng.shuffle(eligible);
  const int take = std::min<int>(target, (int)eligible.size());

  std::set<int> held;
  for (int k = 0; k < take; ++k) held.insert(last_idx[eligible[k]]);

  DatasetSplit split;
  for (int i = 0; i < total; ++i) {
    if (held.count(i))
      split.test.push_back(edges[i]);
    else
      split.train.push_back(edges[i]);
  }
  split.achieved_fraction = total ? (double)split.test.size() / total : 0.0;
  split.warning_empty_test = split.test.empty();
  return split;
}

void save_interactions_tsv(const std::string& path, const std::vector<Edge>& edges) {
  std::ofstream out(path);
  AUVF_CHECK(out, "cannot write ", path);
  for (const Edge& e : edges) out << e.user << '\t' << e.item << '\n';
}

void save_split_manifest(const std::string& path, const DatasetSplit& split) {
  std::ofstream out(path);
  AUVF_CHECK(out, "cannot write ", path);
  out << "# held-out (user, item) pairs\n";
  for (const Edge& e : split.test) out << e.user << '\t' << e.item << '\n';
}

DatasetSplit load_split_manifest(const std::string& path, const InteractionGraph& graph) {
  std::ifstream in(path);
  AUVF_CHECK(in, "cannot open split manifest: ", path);
  std::set<Edge> test;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Edge e{};
    AUVF_CHECK(static_cast<bool>(ls >> e.user >> e.item), "malformed manifest line: ", line);
    test.insert(e);
  }
  DatasetSplit split;
  for (const Edge& e : graph.edges()) {
    if (test.count(e))
      split.test.push_back(e);
    else
      split.train.push_back(e);
  }
  split.achieved_fraction =
      graph.edge_count() ? (double)split.test.size() / graph.edge_count() : 0.0;
  split.warning_empty_test = split.test.empty();
  return split;
}

}  // namespace auvf

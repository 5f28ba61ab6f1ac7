#pragma once

#include <map>
#include <string>
#include <vector>

#include "auvf/data.hpp"
#include "auvf/encoder.hpp"

namespace auvf {

enum class VictimKind { Mf, Vbpr, Dvbpr, Amr };

VictimKind victim_kind_from_string(const std::string& s);
std::string victim_kind_to_string(VictimKind k);

struct VictimConfig {
  int dim = 64;
  int feat_dim = 64;
  int epochs = 60;
  double lr = 0.05;
  double reg = 1e-3;
  double amr_eps = 0.05;  // max-norm ball on (normalized) features
};

// Visually-aware recommender under attack. Scores are
//   r(u,i) = beta_i + <gamma_u, gamma_i> [+ <theta_u, W (M) f_i>]
// with the visual term present for vbpr/dvbpr/amr; dvbpr is approximated by
// an additionally trainable feature head M. All parameter reads are audited.
class VictimModel {
public:
  static VictimModel train(VictimKind kind, const InteractionGraph& train_graph,
                           const Tensor& features /*[n_items, feat_dim]*/,
                           const VictimConfig& cfg, uint64_t seed);

  double score(int user, int item, const Tensor& feature) const;
  // convenience: uses the stored feature row for the item
  double score(int user, int item, const Tensor& features, int item_row) const;

  VictimKind kind() const { return kind_; }
  bool visual() const { return kind_ != VictimKind::Mf; }
  int dim() const { return dim_; }
  int feat_dim() const { return feat_dim_; }
  const std::vector<int>& user_ids() const { return user_ids_; }
  const std::vector<int>& item_ids() const { return item_ids_; }
  int user_index(int user) const;
  int item_index(int item) const;

  const std::vector<double>& loss_curve() const { return loss_curve_; }
  double max_adv_perturbation_seen() const { return max_adv_perturbation_; }

  // d r / d f for fixed user (visual kinds); zero tensor for mf
  Tensor feature_gradient(int user) const;

  std::map<std::string, Tensor> state() const;
  static VictimModel from_state(const std::map<std::string, Tensor>& state);

private:
  void param_read() const { audit::note_victim_param_read(); }

  VictimKind kind_ = VictimKind::Mf;
  int dim_ = 0, feat_dim_ = 0;
  std::vector<int> user_ids_, item_ids_;
  std::map<int, int> user_index_, item_index_;
  Tensor gamma_user_, gamma_item_, beta_item_, theta_user_, W_, M_;
  std::vector<double> loss_curve_;
  double max_adv_perturbation_ = 0.0;
};

// Two-stage serving: BPR-MF shortlist, victim re-rank. Interacted items are
// excluded from candidacy; ties broken by ascending item id.
std::vector<int> recommend_two_stage(const VictimModel& shortlister,
                                     const VictimModel& victim, int user, int k,
                                     int shortlist_size,
                                     const std::vector<int>& exclude_items,
                                     const Tensor& features);

// stage-1 only (exposed for tests)
std::vector<int> shortlist_stage(const VictimModel& shortlister, int user,
                                 int shortlist_size,
                                 const std::vector<int>& exclude_items);

}  // namespace auvf

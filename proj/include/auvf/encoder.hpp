#pragma once

#include <string>

#include "auvf/image.hpp"
#include "auvf/nn.hpp"

namespace auvf {

// Small convolutional image encoder, pretrained as an autoencoder on item
// images and frozen afterwards. Stands in for the large pretrained towers
// (victim feature extractor, semantic encoder, alignment extractor).
class FeatureEncoder {
public:
  FeatureEncoder() = default;

  // conv 3->16/2, conv 16->32/2, GAP, fc -> feat_dim
  static FeatureEncoder pretrain(const ImageStore& images,
                                 const std::vector<int>& item_ids, int feat_dim,
                                 int epochs, uint64_t seed);

  // frozen inference, no graph
  Tensor encode(const Tensor& pixels) const;
  // graph path: gradients flow into `pixels`, weights stay frozen
  nn::Var encode_var(const nn::Var& pixels) const;

  int feat_dim() const { return feat_dim_; }
  bool trained() const { return feat_dim_ > 0; }

  std::map<std::string, Tensor> state() const;
  static FeatureEncoder from_state(const std::map<std::string, Tensor>& state);

private:
  int feat_dim_ = 0;
  Tensor w1_, b1_, w2_, b2_, wfc_, bfc_;
};

// l2-normalized feature used by victims; defined once so training and
// evaluation agree on the item-feature convention.
Tensor item_feature(const FeatureEncoder& enc, const Tensor& pixels);

}  // namespace auvf

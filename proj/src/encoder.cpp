#include "auvf/encoder.hpp"

namespace auvf {

using namespace nn;

namespace {

// encoder trunk on a [3,H,W] input; returns [feat_dim]
Var encode_graph(const Var& px, const Var& w1, const Var& b1, const Var& w2,
                 const Var& b2, const Var& wfc, const Var& bfc) {
  Var h1 = relu(conv2d(px, w1, b1, 2, 1));   // [16,H/2,W/2]
  Var h2 = relu(conv2d(h1, w2, b2, 2, 1));   // [32,H/4,W/4]
  const int C = h2->val.dim(0);
  const int HW = h2->val.dim(1) * h2->val.dim(2);
  Var gap = mean_axis0(transpose2d(reshape(h2, {C, HW})));  // [C]
  Var f = linear(reshape(gap, {1, C}), wfc, bfc);           // [1,feat_dim]
  return reshape(f, {(int)f->val.size()});
}

}  // namespace

FeatureEncoder FeatureEncoder::pretrain(const ImageStore& images,
                                        const std::vector<int>& item_ids, int feat_dim,
                                        int epochs, uint64_t seed) {
  AUVF_CHECK(item_ids.size() >= 2, "pretrain_encoder: need at least 2 images");
  AUVF_CHECK(feat_dim > 0, "pretrain_encoder: feat_dim must be positive");

  const Tensor& probe = images.image(item_ids[0]).pixels;
  const int H = probe.dim(1), W = probe.dim(2);
  AUVF_CHECK(H % 4 == 0 && W % 4 == 0, "pretrain_encoder: image size must be divisible by 4");
  const int gh = H / 4, gw = W / 4;

  Rng rng(seed);
  ParamSet ps;
  Var w1 = ps.make("enc.w1", {16, 3, 3, 3}, rng, 0.15);
  Var b1 = ps.make_const("enc.b1", {16}, 0.0);
  Var w2 = ps.make("enc.w2", {32, 16, 3, 3}, rng, 0.08);
  Var b2 = ps.make_const("enc.b2", {32}, 0.0);
  Var wfc = ps.make("enc.wfc", {32, feat_dim}, rng, 0.15);
  Var bfc = ps.make_const("enc.bfc", {feat_dim}, 0.0);
  // decoder half, discarded after pretraining
  Var wd = ps.make("dec.w", {feat_dim, 32 * gh * gw}, rng, 0.05);
  Var bd = ps.make_const("dec.b", {32 * gh * gw}, 0.0);
  Var wu1 = ps.make("dec.wu1", {16, 32, 3, 3}, rng, 0.08);
  Var bu1 = ps.make_const("dec.bu1", {16}, 0.0);
  Var wu2 = ps.make("dec.wu2", {3, 16, 3, 3}, rng, 0.15);
  Var bu2 = ps.make_const("dec.bu2", {3}, 0.0);

  Adam opt(ps.all(), 2e-3);

  std::vector<int> order = item_ids;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (int id : order) {
      Var px = constant(images.image(id).pixels);
      Var f = encode_graph(px, w1, b1, w2, b2, wfc, bfc);
      Var g = relu(linear(reshape(f, {1, feat_dim}), wd, bd));
      Var grid = reshape(g, {32, gh, gw});
      Var u1 = relu(conv2d(upsample2(grid), wu1, bu1, 1, 1));
      Var rec = sigmoid(conv2d(upsample2(u1), wu2, bu2, 1, 1));
      Var loss = mse(rec, px);
      AUVF_CHECK(std::isfinite(loss->val[0]), "pretrain_encoder: non-finite loss");
      opt.zero_grad();
      backward(loss);
      opt.step();
    }
  }

  FeatureEncoder enc;
  enc.feat_dim_ = feat_dim;
  enc.w1_ = w1->val;
  enc.b1_ = b1->val;
  enc.w2_ = w2->val;
  enc.b2_ = b2->val;
  enc.wfc_ = wfc->val;
  enc.bfc_ = bfc->val;
  return enc;
}

Tensor FeatureEncoder::encode(const Tensor& pixels) const {
  AUVF_CHECK(trained(), "encoder not trained");
  Tensor h1 = conv2d_fwd(pixels, w1_, b1_, 2, 1);
  h1.arr() = h1.arr().max(0.0);
  Tensor h2 = conv2d_fwd(h1, w2_, b2_, 2, 1);
  h2.arr() = h2.arr().max(0.0);
  const int C = h2.dim(0);
  const int HW = h2.dim(1) * h2.dim(2);
  Tensor gap({C});
  for (int c = 0; c < C; ++c) gap[c] = h2.mat(C, HW).row(c).mean();
  Tensor f({feat_dim_});
  f.mat(1, feat_dim_).noalias() = gap.mat(1, C) * wfc_.mat(C, feat_dim_);
  f.arr() += bfc_.arr();
  return f;
}

nn::Var FeatureEncoder::encode_var(const nn::Var& pixels) const {
  AUVF_CHECK(trained(), "encoder not trained");
  return encode_graph(pixels, constant(w1_), constant(b1_), constant(w2_), constant(b2_),
                      constant(wfc_), constant(bfc_));
}

std::map<std::string, Tensor> FeatureEncoder::state() const {
  return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_},
          {"b2", b2_}, {"wfc", wfc_}, {"bfc", bfc_}};
}

FeatureEncoder FeatureEncoder::from_state(const std::map<std::string, Tensor>& state) {
  FeatureEncoder enc;
  enc.w1_ = state.at("w1");
  enc.b1_ = state.at("b1");
  enc.w2_ = state.at("w2");
  enc.b2_ = state.at("b2");
  enc.wfc_ = state.at("wfc");
  enc.bfc_ = state.at("bfc");
  enc.feat_dim_ = (int)enc.bfc_.size();
  return enc;
}

Tensor item_feature(const FeatureEncoder& enc, const Tensor& pixels) {
  Tensor f = enc.encode(pixels);
  double n = std::sqrt(f.arr().square().sum());
  if (n > 1e-12) f.arr() /= n;
  return f;
}

}  // namespace auvf

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "auvf/nn.hpp"
#include "auvf/rng.hpp"

using namespace auvf;
using namespace auvf::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gauss();
  return t;
}

// central finite differences against autograd for a scalar-valued graph
void gradcheck(const std::function<Var(const std::vector<Var>&)>& f,
               std::vector<Var> leaves, double tol = 1e-6, double h = 1e-6) {
  for (auto& l : leaves) {
    l->requires_grad = true;
    l->grad_ready = false;
  }
  Var out = f(leaves);
  backward(out);
  for (auto& l : leaves) {
    REQUIRE(l->grad_ready);
    for (int64_t i = 0; i < l->val.size(); ++i) {
      const double orig = l->val[i];
      l->val[i] = orig + h;
      const double fp = f(leaves)->val[0];
      l->val[i] = orig - h;
      const double fm = f(leaves)->val[0];
      l->val[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = l->grad[i];
      const double err = std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1.0});
      CAPTURE(i);
      CAPTURE(fd);
      CAPTURE(ad);
      CHECK(err < tol);
    }
  }
}

}  // namespace

TEST_CASE("elementwise and activation gradients") {
  Rng rng(7);
  auto a = leaf(random_tensor({3, 4}, rng), true);
  auto b = leaf(random_tensor({3, 4}, rng), true);
  gradcheck([](const std::vector<Var>& v) { return sum(mul(add(v[0], v[1]), v[0])); },
            {a, b});
  gradcheck([](const std::vector<Var>& v) { return sum(tanh_(v[0])); }, {a});
  gradcheck([](const std::vector<Var>& v) { return sum(sigmoid(v[0])); }, {a});
  gradcheck([](const std::vector<Var>& v) { return sum(leaky_relu(v[0], 0.2)); }, {a},
            1e-5);
  gradcheck(
      [](const std::vector<Var>& v) { return sum(pow_(add_scalar(square(v[0]), 1.0), 0.5)); },
      {a});
}

TEST_CASE("matmul, linear, softmax, reductions") {
  Rng rng(11);
  auto x = leaf(random_tensor({2, 3}, rng), true);
  auto W = leaf(random_tensor({3, 5}, rng), true);
  auto b = leaf(random_tensor({5}, rng), true);
  gradcheck(
      [](const std::vector<Var>& v) {
        return mean(square(linear(v[0], v[1], v[2])));
      },
      {x, W, b});
  gradcheck([](const std::vector<Var>& v) { return sum(mul(softmax_rows(v[0]), v[0])); },
            {x}, 1e-5);
  auto y = leaf(random_tensor({2, 3}, rng), true);
  gradcheck([](const std::vector<Var>& v) { return dot(v[0], v[1]); }, {x, y});
}

TEST_CASE("shape ops gradients") {
  Rng rng(13);
  auto x = leaf(random_tensor({4, 6}, rng), true);
  gradcheck(
      [](const std::vector<Var>& v) {
        auto t = transpose2d(v[0]);
        auto s = slice_cols(t, 1, 3);
        return sum(square(s));
      },
      {x});
  gradcheck(
      [](const std::vector<Var>& v) {
        auto p1 = slice_cols(v[0], 0, 2);
        auto p2 = slice_cols(v[0], 2, 6);
        return sum(square(concat_cols({p2, p1})));
      },
      {x});
  auto img = leaf(random_tensor({3, 4, 4}, rng), true);
  gradcheck(
      [](const std::vector<Var>& v) {
        auto a = slice_ch(v[0], 0, 1);
        auto b = slice_ch(v[0], 1, 3);
        return sum(square(concat_ch(b, a)));
      },
      {img});
}

TEST_CASE("conv2d gradient") {
  Rng rng(17);
  auto x = leaf(random_tensor({2, 5, 5}, rng), true);
  auto w = leaf(random_tensor({3, 2, 3, 3}, rng, 0.5), true);
  auto b = leaf(random_tensor({3}, rng, 0.1), true);
  gradcheck(
      [](const std::vector<Var>& v) {
        return mean(square(conv2d(v[0], v[1], v[2], 2, 1)));
      },
      {x, w, b}, 1e-5);
}

TEST_CASE("upsample and blur gradients") {
  Rng rng(19);
  auto x = leaf(random_tensor({2, 3, 3}, rng), true);
  gradcheck([](const std::vector<Var>& v) { return sum(square(upsample2(v[0]))); }, {x});
  Tensor k = gaussian_kernel(3, 1.0);
  gradcheck([k](const std::vector<Var>& v) { return sum(square(blur(v[0], k))); }, {x});
}

TEST_CASE("rowvec ops and mean_axis0") {
  Rng rng(23);
  auto x = leaf(random_tensor({4, 3}, rng), true);
  auto v = leaf(random_tensor({3}, rng), true);
  gradcheck(
      [](const std::vector<Var>& vs) {
        return sum(square(mul_rowvec(add_rowvec(vs[0], vs[1]), vs[1])));
      },
      {x, v});
  gradcheck([](const std::vector<Var>& vs) { return sum(square(mean_axis0(vs[0]))); }, {x});
}

TEST_CASE("cosine and stddev gradients") {
  Rng rng(29);
  auto a = leaf(random_tensor({6}, rng), true);
  auto b = leaf(random_tensor({6}, rng), true);
  gradcheck([](const std::vector<Var>& v) { return cosine(v[0], v[1]); }, {a, b}, 1e-5);
  gradcheck([](const std::vector<Var>& v) { return stddev(v[0]); }, {a}, 1e-5);
}

TEST_CASE("batchnorm training and inference modes") {
  Rng rng(31);
  ParamSet ps;
  BatchNorm bn;
  bn.init(ps, "bn", 3);

  // identity at init in inference mode
  Tensor x = random_tensor({3}, rng);
  Var y = bn.apply(leaf(x), false);
  for (int i = 0; i < 3; ++i) CHECK(y->val[i] == doctest::Approx(x[i]));

  // training mode normalizes the batch
  Tensor xb = random_tensor({8, 3}, rng, 2.0);
  Var yb = bn.apply(leaf(xb), true);
  for (int j = 0; j < 3; ++j) {
    double m = 0.0, v = 0.0;
    for (int i = 0; i < 8; ++i) m += yb->val.at(i, j);
    m /= 8;
    for (int i = 0; i < 8; ++i) v += (yb->val.at(i, j) - m) * (yb->val.at(i, j) - m);
    v /= 8;
    CHECK(std::fabs(m) < 1e-9);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
  }

  // gradcheck through training-mode normalization
  auto xb2 = leaf(random_tensor({5, 3}, rng), true);
  gradcheck(
      [&](const std::vector<Var>& v) {
        BatchNorm bn2;
        ParamSet ps2;
        bn2.init(ps2, "bn", 3);
        return sum(square(bn2.apply(v[0], true)));
      },
      {xb2}, 1e-5);
}

TEST_CASE("adam minimizes a quadratic") {
  Rng rng(37);
  ParamSet ps;
  Var w = ps.make("w", {4}, rng, 1.0);
  Tensor target = random_tensor({4}, rng);
  Adam opt(ps.all(), 0.05);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 300; ++it) {
    Var loss = l2sq(w, constant(target));
    if (it == 0) first = loss->val[0];
    last = loss->val[0];
    opt.zero_grad();
    backward(loss);
    opt.step();
  }
  CHECK(last < 1e-4 * first);
}

TEST_CASE("backward accumulates across shared subgraphs") {
  auto a = leaf(Tensor::from({2}, {1.0, 2.0}), true);
  Var s = sum(a);
  Var out = add(mul(s, s), s);  // f = s^2 + s, df/da_i = 2s + 1 = 7
  backward(out);
  CHECK(a->grad[0] == doctest::Approx(7.0));
  CHECK(a->grad[1] == doctest::Approx(7.0));
}

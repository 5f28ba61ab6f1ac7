#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "auvf/rng.hpp"
#include "auvf/tensor.hpp"

namespace auvf::nn {

// Reverse-mode autodiff over Tensor. Graphs are built per forward pass;
// parameters are persistent leaves shared across passes.
struct Node {
  Tensor val;
  Tensor grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<std::shared_ptr<Node>> prev;
  std::function<void(Node&)> back;  // scatter node.grad into prev[i]->grad

  void ensure_grad() {
    if (!grad_ready) {
      grad = Tensor(val.shape());
      grad_ready = true;
    }
  }
};

using Var = std::shared_ptr<Node>;

Var leaf(Tensor v, bool requires_grad = false);
inline Var constant(Tensor v) { return leaf(std::move(v), false); }
Var constant_like(const Var& a, double fill);

// scalar root required; accumulates into leaf grads
void backward(const Var& root);

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh_(const Var& a);
Var sigmoid(const Var& a);
Var exp_(const Var& a);
Var softplus(const Var& a);  // log(1 + exp(x)), numerically stable
Var square(const Var& a);
Var pow_(const Var& a, double p);  // entries must stay in the domain of x^p

// ---- shape ----
Var reshape(const Var& a, std::vector<int> shape);
Var transpose2d(const Var& a);
Var slice_cols(const Var& a, int c0, int c1);
Var concat_cols(const std::vector<Var>& parts);
Var concat_ch(const Var& a, const Var& b);   // [c1,h,w] + [c2,h,w]
Var slice_ch(const Var& a, int c0, int c1);  // channels [c0,c1)

// ---- reductions / linear algebra ----
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);  // full-tensor inner product -> [1]
Var matmul(const Var& a, const Var& b);
Var add_rowvec(const Var& x, const Var& v);  // [n,d] + [d]
Var mul_rowvec(const Var& x, const Var& v);
Var sub_rowvec(const Var& x, const Var& v);
Var mean_axis0(const Var& x);  // [n,d] -> [d]
Var softmax_rows(const Var& x);
Var linear(const Var& x, const Var& W, const Var& b);  // [n,in]x[in,out]+[out]

// ---- image ops ([C,H,W]) ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample2(const Var& x);
Var blur(const Var& x, const Tensor& kernel);

// ---- composed helpers ----
Var mse(const Var& a, const Var& b);
Var l2sq(const Var& a, const Var& b);           // sum of squared differences
Var cosine(const Var& a, const Var& b, double eps = 1e-12);
Var stddev(const Var& a, double eps = 1e-12);   // population std as [1]

// ---- parameters ----
class ParamSet {
public:
  Var make(const std::string& name, std::vector<int> shape, Rng& rng, double stddev);
  Var make_const(const std::string& name, std::vector<int> shape, double fill);
  Var add_existing(const std::string& name, Var v);
  const std::vector<Var>& all() const { return params_; }
  const std::vector<std::string>& names() const { return names_; }
  Var find(const std::string& name) const;
  void zero_grad();
  void freeze();  // turn off requires_grad on every parameter
  int64_t count() const;

private:
  std::vector<Var> params_;
  std::vector<std::string> names_;
};

struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
  int64_t t = 0;
  std::vector<Var> params;
  std::vector<Tensor> m, v;

  explicit Adam(std::vector<Var> ps, double lr_ = 1e-3);
  void step();
  void zero_grad();
};

// batch-norm over axis 0 of [N,D]. With N == 1 in training mode the batch
// statistics are degenerate, so running statistics are used and not updated.
struct BatchNorm {
  Var gamma, beta;
  Tensor run_mean, run_var;
  double momentum = 0.1, eps = 1e-5;

  void init(ParamSet& ps, const std::string& prefix, int dim);
  Var apply(const Var& x, bool training);
};

}  // namespace auvf::nn

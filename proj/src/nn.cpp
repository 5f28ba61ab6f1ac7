#include "auvf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace auvf::nn {

Var leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->requires_grad = requires_grad;
  return n;
}

Var constant_like(const Var& a, double fill) {
  return leaf(Tensor::full(a->val.shape(), fill), false);
}

namespace {

Var make_op(Tensor val, std::vector<Var> prev, std::function<void(Node&)> back) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->prev = std::move(prev);
  bool rg = false;
  for (auto& p : n->prev) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) n->back = std::move(back);
  return n;
}

void accum(const Var& p, const Tensor& g) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  p->grad.arr() += g.arr();
}

}  // namespace

void backward(const Var& root) {
  AUVF_CHECK(root->val.size() == 1, "backward: root must be scalar");
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->prev.size()) {
      Node* c = n->prev[i++].get();
      if (c->requires_grad && !seen.count(c)) {
        seen.insert(c);
        stack.push_back({c, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->back && n->grad_ready) n->back(*n);
  }
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
  AUVF_CHECK(a->val.same_shape(b->val), "add: shape mismatch");
  Tensor out = a->val;
  out.arr() += b->val.arr();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    accum(n.prev[0], n.grad);
    accum(n.prev[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  AUVF_CHECK(a->val.same_shape(b->val), "sub: shape mismatch");
  Tensor out = a->val;
  out.arr() -= b->val.arr();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    accum(n.prev[0], n.grad);
    if (n.prev[1]->requires_grad) {
      Tensor g = n.grad;
      g.arr() = -g.arr();
      accum(n.prev[1], g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  AUVF_CHECK(a->val.same_shape(b->val), "mul: shape mismatch");
  Tensor out = a->val;
  out.arr() *= b->val.arr();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (n.prev[0]->requires_grad) {
      Tensor g = n.grad;
      g.arr() *= n.prev[1]->val.arr();
      accum(n.prev[0], g);
    }
    if (n.prev[1]->requires_grad) {
      Tensor g = n.grad;
      g.arr() *= n.prev[0]->val.arr();
      accum(n.prev[1], g);
    }
  });
}

Var scale(const Var& a, double c) {
  Tensor out = a->val;
  out.arr() *= c;
  return make_op(std::move(out), {a}, [c](Node& n) {
    Tensor g = n.grad;
    g.arr() *= c;
    accum(n.prev[0], g);
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = a->val;
  out.arr() += c;
  return make_op(std::move(out), {a}, [](Node& n) { accum(n.prev[0], n.grad); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  Tensor out = a->val;
  out.arr() = out.arr().max(0.0);
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor g = n.grad;
    for (int64_t i = 0; i < g.size(); ++i)
      if (n.prev[0]->val[i] <= 0.0) g[i] = 0.0;
    accum(n.prev[0], g);
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a->val;
  for (int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return make_op(std::move(out), {a}, [slope](Node& n) {
    Tensor g = n.grad;
    for (int64_t i = 0; i < g.size(); ++i)
      if (n.prev[0]->val[i] < 0.0) g[i] *= slope;
    accum(n.prev[0], g);
  });
}

Var tanh_(const Var& a) {
  Tensor out = a->val;
  out.arr() = out.arr().tanh();
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor g = n.grad;
    g.arr() *= 1.0 - n.val.arr().square();
    accum(n.prev[0], g);
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a->val;
  out.arr() = 1.0 / (1.0 + (-out.arr()).exp());
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor g = n.grad;
    g.arr() *= n.val.arr() * (1.0 - n.val.arr());
    accum(n.prev[0], g);
  });
}

Var exp_(const Var& a) {
  Tensor out = a->val;
  out.arr() = out.arr().exp();
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor g = n.grad;
    g.arr() *= n.val.arr();
    accum(n.prev[0], g);
  });
}

Var softplus(const Var& a) {
  Tensor out = a->val;
  for (int64_t i = 0; i < out.size(); ++i) {
    const double t = out[i];
    out[i] = std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t)));
  }
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor g = n.grad;
    for (int64_t i = 0; i < g.size(); ++i)
      g[i] *= 1.0 / (1.0 + std::exp(-n.prev[0]->val[i]));
    accum(n.prev[0], g);
  });
}

Var square(const Var& a) { return mul(a, a); }

Var pow_(const Var& a, double p) {
  Tensor out = a->val;
  out.arr() = out.arr().pow(p);
  return make_op(std::move(out), {a}, [p](Node& n) {
    Tensor g = n.grad;
    g.arr() *= p * n.prev[0]->val.arr().pow(p - 1.0);
    accum(n.prev[0], g);
  });
}

// ---- shape ----

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a->val.reshaped(std::move(shape));
  return make_op(std::move(out), {a}, [](Node& n) {
    accum(n.prev[0], n.grad.reshaped(n.prev[0]->val.shape()));
  });
}

Var transpose2d(const Var& a) {
  const int r = a->val.dim(0), c = a->val.dim(1);
  Tensor out({c, r});
  out.mat(c, r) = a->val.mat(r, c).transpose();
  return make_op(std::move(out), {a}, [r, c](Node& n) {
    Tensor g({r, c});
    g.mat(r, c) = n.grad.mat(c, r).transpose();
    accum(n.prev[0], g);
  });
}

Var slice_cols(const Var& a, int c0, int c1) {
  const int r = a->val.dim(0), c = a->val.dim(1);
  AUVF_CHECK(0 <= c0 && c0 < c1 && c1 <= c, "slice_cols: bad range");
  Tensor out({r, c1 - c0});
  out.mat(r, c1 - c0) = a->val.mat(r, c).middleCols(c0, c1 - c0);
  return make_op(std::move(out), {a}, [r, c, c0, c1](Node& n) {
    Tensor g({r, c});
    g.mat(r, c).middleCols(c0, c1 - c0) = n.grad.mat(r, c1 - c0);
    accum(n.prev[0], g);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  AUVF_CHECK(!parts.empty(), "concat_cols: empty");
  const int r = parts[0]->val.dim(0);
  int c = 0;
  for (auto& p : parts) {
    AUVF_CHECK(p->val.dim(0) == r, "concat_cols: row mismatch");
    c += p->val.dim(1);
  }
  Tensor out({r, c});
  int off = 0;
  for (auto& p : parts) {
    out.mat(r, c).middleCols(off, p->val.dim(1)) = p->val.mat(r, p->val.dim(1));
    off += p->val.dim(1);
  }
  return make_op(std::move(out), parts, [r, c](Node& n) {
    int off = 0;
    for (auto& p : n.prev) {
      const int pc = p->val.dim(1);
      if (p->requires_grad) {
        Tensor g({r, pc});
        g.mat(r, pc) = n.grad.mat(r, c).middleCols(off, pc);
        accum(p, g);
      }
      off += pc;
    }
  });
}

Var concat_ch(const Var& a, const Var& b) {
  AUVF_CHECK(a->val.dim(1) == b->val.dim(1) && a->val.dim(2) == b->val.dim(2),
             "concat_ch: spatial mismatch");
  const int c1 = a->val.dim(0), c2 = b->val.dim(0);
  const int h = a->val.dim(1), w = a->val.dim(2);
  Tensor out({c1 + c2, h, w});
  std::copy(a->val.data(), a->val.data() + a->val.size(), out.data());
  std::copy(b->val.data(), b->val.data() + b->val.size(), out.data() + a->val.size());
  return make_op(std::move(out), {a, b}, [c1, c2, h, w](Node& n) {
    if (n.prev[0]->requires_grad) {
      Tensor g({c1, h, w});
      std::copy(n.grad.data(), n.grad.data() + g.size(), g.data());
      accum(n.prev[0], g);
    }
    if (n.prev[1]->requires_grad) {
      Tensor g({c2, h, w});
      std::copy(n.grad.data() + (int64_t)c1 * h * w, n.grad.data() + n.grad.size(), g.data());
      accum(n.prev[1], g);
    }
  });
}

Var slice_ch(const Var& a, int c0, int c1) {
  const int C = a->val.dim(0), h = a->val.dim(1), w = a->val.dim(2);
  AUVF_CHECK(0 <= c0 && c0 < c1 && c1 <= C, "slice_ch: bad range");
  Tensor out({c1 - c0, h, w});
  std::copy(a->val.data() + (int64_t)c0 * h * w, a->val.data() + (int64_t)c1 * h * w,
            out.data());
  return make_op(std::move(out), {a}, [C, h, w, c0, c1](Node& n) {
    Tensor g({C, h, w});
    std::copy(n.grad.data(), n.grad.data() + n.grad.size(), g.data() + (int64_t)c0 * h * w);
    accum(n.prev[0], g);
  });
}

// ---- reductions / linear algebra ----

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(a->val.sum());
  return make_op(std::move(out), {a}, [](Node& n) {
    Tensor g(n.prev[0]->val.shape());
    g.fill(n.grad[0]);
    accum(n.prev[0], g);
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / (double)a->val.size()); }

Var dot(const Var& a, const Var& b) {
  AUVF_CHECK(a->val.size() == b->val.size(), "dot: size mismatch");
  Tensor out = Tensor::scalar((a->val.arr() * b->val.arr()).sum());
  return make_op(std::move(out), {a, b}, [](Node& n) {
    const double g = n.grad[0];
    if (n.prev[0]->requires_grad) {
      Tensor t = n.prev[1]->val.reshaped(n.prev[0]->val.shape());
      t.arr() *= g;
      accum(n.prev[0], t);
    }
    if (n.prev[1]->requires_grad) {
      Tensor t = n.prev[0]->val.reshaped(n.prev[1]->val.shape());
      t.arr() *= g;
      accum(n.prev[1], t);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  const int m = a->val.dim(0), k = a->val.dim(1);
  AUVF_CHECK(b->val.dim(0) == k, "matmul: inner dim mismatch");
  const int p = b->val.dim(1);
  Tensor out({m, p});
  out.mat(m, p).noalias() = a->val.mat(m, k) * b->val.mat(k, p);
  return make_op(std::move(out), {a, b}, [m, k, p](Node& n) {
    if (n.prev[0]->requires_grad) {
      Tensor g({m, k});
      g.mat(m, k).noalias() = n.grad.mat(m, p) * n.prev[1]->val.mat(k, p).transpose();
      accum(n.prev[0], g);
    }
    if (n.prev[1]->requires_grad) {
      Tensor g({k, p});
      g.mat(k, p).noalias() = n.prev[0]->val.mat(m, k).transpose() * n.grad.mat(m, p);
      accum(n.prev[1], g);
    }
  });
}

Var add_rowvec(const Var& x, const Var& v) {
  const int n = x->val.dim(0), d = x->val.dim(1);
  AUVF_CHECK(v->val.size() == d, "add_rowvec: dim mismatch");
  Tensor out = x->val;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) += v->val[j];
  return make_op(std::move(out), {x, v}, [n, d](Node& nd) {
    accum(nd.prev[0], nd.grad);
    if (nd.prev[1]->requires_grad) {
      Tensor g(nd.prev[1]->val.shape());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) g[j] += nd.grad.at(i, j);
      accum(nd.prev[1], g);
    }
  });
}

Var sub_rowvec(const Var& x, const Var& v) { return add_rowvec(x, neg(v)); }

Var mul_rowvec(const Var& x, const Var& v) {
  const int n = x->val.dim(0), d = x->val.dim(1);
  AUVF_CHECK(v->val.size() == d, "mul_rowvec: dim mismatch");
  Tensor out = x->val;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) *= v->val[j];
  return make_op(std::move(out), {x, v}, [n, d](Node& nd) {
    if (nd.prev[0]->requires_grad) {
      Tensor g = nd.grad;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) g.at(i, j) *= nd.prev[1]->val[j];
      accum(nd.prev[0], g);
    }
    if (nd.prev[1]->requires_grad) {
      Tensor g(nd.prev[1]->val.shape());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) g[j] += nd.grad.at(i, j) * nd.prev[0]->val.at(i, j);
      accum(nd.prev[1], g);
    }
  });
}

Var mean_axis0(const Var& x) {
  const int n = x->val.dim(0), d = x->val.dim(1);
  Tensor out({d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[j] += x->val.at(i, j);
  out.arr() /= (double)n;
  return make_op(std::move(out), {x}, [n, d](Node& nd) {
    Tensor g({n, d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) g.at(i, j) = nd.grad[j] / (double)n;
    accum(nd.prev[0], g);
  });
}

Var softmax_rows(const Var& x) {
  const int n = x->val.dim(0), d = x->val.dim(1);
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < d; ++j) mx = std::max(mx, x->val.at(i, j));
    double z = 0.0;
    for (int j = 0; j < d; ++j) z += std::exp(x->val.at(i, j) - mx);
    for (int j = 0; j < d; ++j) out.at(i, j) = std::exp(x->val.at(i, j) - mx) / z;
  }
  return make_op(std::move(out), {x}, [n, d](Node& nd) {
    Tensor g({n, d});
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += nd.grad.at(i, j) * nd.val.at(i, j);
      for (int j = 0; j < d; ++j)
        g.at(i, j) = nd.val.at(i, j) * (nd.grad.at(i, j) - s);
    }
    accum(nd.prev[0], g);
  });
}

Var linear(const Var& x, const Var& W, const Var& b) {
  return add_rowvec(matmul(x, W), b);
}

// ---- image ops ----

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  Tensor out = conv2d_fwd(x->val, w->val, b ? b->val : Tensor{}, stride, pad);
  std::vector<Var> prev = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  const int H = x->val.dim(1), W_ = x->val.dim(2);
  return make_op(std::move(out), std::move(prev), [stride, pad, H, W_](Node& n) {
    const Var& x = n.prev[0];
    const Var& w = n.prev[1];
    if (x->requires_grad)
      accum(x, conv2d_bwd_x(n.grad, w->val, stride, pad, H, W_));
    if (w->requires_grad)
      accum(w, conv2d_bwd_w(n.grad, x->val, stride, pad, w->val.shape()));
    if (n.prev.size() > 2 && n.prev[2]->requires_grad)
      accum(n.prev[2], conv2d_bwd_b(n.grad));
  });
}

Var upsample2(const Var& x) {
  return make_op(upsample2_fwd(x->val), {x},
                 [](Node& n) { accum(n.prev[0], upsample2_bwd(n.grad)); });
}

Var blur(const Var& x, const Tensor& kernel) {
  Tensor k = kernel;
  return make_op(blur_fwd(x->val, k), {x},
                 [k](Node& n) { accum(n.prev[0], blur_bwd(n.grad, k)); });
}

// ---- composed ----

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }
Var l2sq(const Var& a, const Var& b) { return sum(square(sub(a, b))); }

Var cosine(const Var& a, const Var& b, double eps) {
  Var num = dot(a, b);
  Var den = mul(pow_(add_scalar(dot(a, a), eps), 0.5), pow_(add_scalar(dot(b, b), eps), 0.5));
  return mul(num, pow_(den, -1.0));
}

Var stddev(const Var& a, double eps) {
  Var m = mean(a);
  Var mfull = reshape(matmul(reshape(m, {1, 1}),
                             constant(Tensor::full({1, (int)a->val.size()}, 1.0))),
                      a->val.shape());
  Var centered = sub(a, mfull);
  return pow_(add_scalar(mean(square(centered)), eps), 0.5);
}

// ---- parameters ----

Var ParamSet::make(const std::string& name, std::vector<int> shape, Rng& rng,
                   double stddev) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.gauss(0.0, stddev);
  Var v = leaf(std::move(t), true);
  params_.push_back(v);
  names_.push_back(name);
  return v;
}

Var ParamSet::make_const(const std::string& name, std::vector<int> shape, double fill) {
  Var v = leaf(Tensor::full(std::move(shape), fill), true);
  params_.push_back(v);
  names_.push_back(name);
  return v;
}

Var ParamSet::add_existing(const std::string& name, Var v) {
  params_.push_back(v);
  names_.push_back(name);
  return v;
}

Var ParamSet::find(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return params_[i];
  fail("ParamSet: no parameter named ", name);
}

void ParamSet::zero_grad() {
  for (auto& p : params_) {
    if (p->grad_ready) p->grad.fill(0.0);
  }
}

void ParamSet::freeze() {
  for (auto& p : params_) p->requires_grad = false;
}

int64_t ParamSet::count() const {
  int64_t n = 0;
  for (auto& p : params_) n += p->val.size();
  return n;
}

Adam::Adam(std::vector<Var> ps, double lr_) : lr(lr_), params(std::move(ps)) {
  for (auto& p : params) {
    m.emplace_back(p->val.shape());
    v.emplace_back(p->val.shape());
  }
}

void Adam::step() {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, (double)t);
  const double bc2 = 1.0 - std::pow(beta2, (double)t);
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p->grad_ready) continue;
    auto g = p->grad.arr();
    if (weight_decay > 0.0) g += weight_decay * p->val.arr();
    m[i].arr() = beta1 * m[i].arr() + (1.0 - beta1) * g;
    v[i].arr() = beta2 * v[i].arr() + (1.0 - beta2) * g.square();
    p->val.arr() -= lr * (m[i].arr() / bc1) / ((v[i].arr() / bc2).sqrt() + eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params)
    if (p->grad_ready) p->grad.fill(0.0);
}

// ---- batch norm ----

void BatchNorm::init(ParamSet& ps, const std::string& prefix, int dim) {
  gamma = ps.make_const(prefix + ".gamma", {dim}, 1.0);
  beta = ps.make_const(prefix + ".beta", {dim}, 0.0);
  run_mean = Tensor({dim});
  run_var = Tensor::full({dim}, 1.0);
}

Var BatchNorm::apply(const Var& x, bool training) {
  const bool is_vec = x->val.ndim() == 1;
  Var xb = is_vec ? reshape(x, {1, (int)x->val.size()}) : x;
  const int N = xb->val.dim(0), D = xb->val.dim(1);
  AUVF_CHECK(D == (int)gamma->val.size(), "BatchNorm: dim mismatch");

  Var y;
  if (training && N > 1) {
    Var mu = mean_axis0(xb);
    Var centered = sub_rowvec(xb, mu);
    Var var = mean_axis0(square(centered));
    Var inv_std = pow_(add_scalar(var, eps), -0.5);
    y = mul_rowvec(centered, inv_std);
    // update running statistics (biased variance, matching normalization)
    for (int j = 0; j < D; ++j) {
      run_mean[j] = (1.0 - momentum) * run_mean[j] + momentum * mu->val[j];
      run_var[j] = (1.0 - momentum) * run_var[j] + momentum * var->val[j];
    }
  } else {
    Tensor inv_std({D});
    for (int j = 0; j < D; ++j) inv_std[j] = 1.0 / std::sqrt(run_var[j] + eps);
    y = mul_rowvec(sub_rowvec(xb, constant(run_mean)), constant(inv_std));
  }
  y = add_rowvec(mul_rowvec(y, gamma), beta);
  return is_vec ? reshape(y, x->val.shape()) : y;
}

}  // namespace auvf::nn

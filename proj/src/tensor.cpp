#include "auvf/tensor.hpp"

namespace auvf {

namespace {

// im2col: x [IC,H,W] -> cols [IC*kh*kw, OH*OW]
MatRM im2col(const Tensor& x, int kh, int kw, int stride, int pad, int OH, int OW) {
  const int IC = x.dim(0), H = x.dim(1), W = x.dim(2);
  MatRM cols(IC * kh * kw, OH * OW);
  cols.setZero();
  for (int ic = 0; ic < IC; ++ic) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (ic * kh + ky) * kw + kx;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            cols(row, oy * OW + ox) = x.at(ic, iy, ix);
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(Tensor& x, const MatRM& cols, int kh, int kw, int stride, int pad,
                int OH, int OW) {
  const int IC = x.dim(0), H = x.dim(1), W = x.dim(2);
  for (int ic = 0; ic < IC; ++ic) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (ic * kh + ky) * kw + kx;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            x.at(ic, iy, ix) += cols(row, oy * OW + ox);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  AUVF_CHECK(x.ndim() == 3 && w.ndim() == 4, "conv2d: bad ranks");
  const int IC = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int OC = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  AUVF_CHECK(w.dim(1) == IC, "conv2d: channel mismatch");
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  AUVF_CHECK(OH > 0 && OW > 0, "conv2d: output collapsed");

  MatRM cols = im2col(x, kh, kw, stride, pad, OH, OW);
  Tensor out({OC, OH, OW});
  out.mat(OC, OH * OW).noalias() = w.mat(OC, IC * kh * kw) * cols;
  if (b.size()) {
    AUVF_CHECK(b.size() == OC, "conv2d: bias size");
    for (int oc = 0; oc < OC; ++oc)
      out.mat(OC, OH * OW).row(oc).array() += b[oc];
  }
  return out;
}

Tensor conv2d_bwd_x(const Tensor& gout, const Tensor& w, int stride, int pad, int H, int W) {
  const int OC = gout.dim(0), OH = gout.dim(1), OW = gout.dim(2);
  const int IC = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  MatRM gcols = w.mat(OC, IC * kh * kw).transpose() * gout.mat(OC, OH * OW);
  Tensor gx({IC, H, W});
  col2im_add(gx, gcols, kh, kw, stride, pad, OH, OW);
  return gx;
}

Tensor conv2d_bwd_w(const Tensor& gout, const Tensor& x, int stride, int pad,
                    const std::vector<int>& wshape) {
  const int OC = gout.dim(0), OH = gout.dim(1), OW = gout.dim(2);
  const int kh = wshape[2], kw = wshape[3];
  MatRM cols = im2col(x, kh, kw, stride, pad, OH, OW);
  Tensor gw(wshape);
  gw.mat(OC, (int)(gw.size() / OC)).noalias() = gout.mat(OC, OH * OW) * cols.transpose();
  return gw;
}

Tensor conv2d_bwd_b(const Tensor& gout) {
  const int OC = gout.dim(0), OH = gout.dim(1), OW = gout.dim(2);
  Tensor gb({OC});
  for (int oc = 0; oc < OC; ++oc) gb[oc] = gout.mat(OC, OH * OW).row(oc).sum();
  return gb;
}

Tensor upsample2_fwd(const Tensor& x) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor out({C, 2 * H, 2 * W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y)
      for (int xx = 0; xx < 2 * W; ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
  return out;
}

Tensor upsample2_bwd(const Tensor& gout) {
  const int C = gout.dim(0), H = gout.dim(1) / 2, W = gout.dim(2) / 2;
  Tensor gx({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y)
      for (int xx = 0; xx < 2 * W; ++xx) gx.at(c, y / 2, xx / 2) += gout.at(c, y, xx);
  return gx;
}

Tensor blur_fwd(const Tensor& x, const Tensor& kernel) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int k = kernel.dim(0), r = k / 2;
  Tensor out({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        double s = 0.0;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = y - r + ky;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = xx - r + kx;
            if (ix < 0 || ix >= W) continue;
            s += kernel.at(ky, kx) * x.at(c, iy, ix);
          }
        }
        out.at(c, y, xx) = s;
      }
  return out;
}

Tensor blur_bwd(const Tensor& gout, const Tensor& kernel) {
  // correlation adjoint = correlation with the flipped kernel
  const int k = kernel.dim(0);
  Tensor flipped({k, k});
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) flipped.at(y, x) = kernel.at(k - 1 - y, k - 1 - x);
  return blur_fwd(gout, flipped);
}

Tensor gaussian_kernel(int window, double sigma) {
  AUVF_CHECK(window >= 1 && window % 2 == 1, "gaussian_kernel: window must be odd");
  Tensor k({window, window});
  const int r = window / 2;
  double sum = 0.0;
  for (int y = 0; y < window; ++y)
    for (int x = 0; x < window; ++x) {
      double dy = y - r, dx = x - r;
      double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k.at(y, x) = v;
      sum += v;
    }
  k.arr() /= sum;
  return k;
}

}  // namespace auvf

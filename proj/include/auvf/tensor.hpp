#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "auvf/common.hpp"

namespace auvf {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense double tensor, flat row-major storage.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.setZero(count(shape_));
  }
  Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    data_.setConstant(count(shape_), fill);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor({1}, v); }
  static Tensor from(std::vector<int> shape, std::initializer_list<double> vals) {
    Tensor t(std::move(shape));
    AUVF_CHECK((int64_t)vals.size() == t.size(), "Tensor::from: value count mismatch");
    int64_t i = 0;
    for (double v : vals) t.data_[i++] = v;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return (int)shape_.size(); }
  int dim(int i) const { return shape_[i]; }
  int64_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }

  double& at(int i, int j) { return data_[(int64_t)i * shape_[1] + j]; }
  double at(int i, int j) const { return data_[(int64_t)i * shape_[1] + j]; }
  double& at(int c, int y, int x) {
    return data_[((int64_t)c * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const {
    return data_[((int64_t)c * shape_[1] + y) * shape_[2] + x];
  }

  Eigen::Map<Eigen::ArrayXd> arr() { return {data_.data(), data_.size()}; }
  Eigen::Map<const Eigen::ArrayXd> arr() const { return {data_.data(), data_.size()}; }
  Eigen::Map<MatRM> mat(int rows, int cols) {
    AUVF_CHECK((int64_t)rows * cols == size(), "mat: size mismatch");
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const MatRM> mat(int rows, int cols) const {
    AUVF_CHECK((int64_t)rows * cols == size(), "mat: size mismatch");
    return {data_.data(), rows, cols};
  }

  Tensor reshaped(std::vector<int> shape) const {
    AUVF_CHECK(count(shape) == size(), "reshape: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  void fill(double v) { data_.setConstant(v); }
  bool all_finite() const { return data_.allFinite(); }
  double sum() const { return data_.sum(); }
  double mean() const { return size() ? data_.mean() : 0.0; }
  double min() const { return data_.minCoeff(); }
  double max() const { return data_.maxCoeff(); }
  double stddev() const {
    if (size() == 0) return 0.0;
    double m = mean();
    return std::sqrt((data_.array() - m).square().mean());
  }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      AUVF_CHECK(d >= 0, "negative dimension");
      n *= d;
    }
    return n;
  }

private:
  std::vector<int> shape_;
  Eigen::VectorXd data_;
};

// ---- convolution kernels (shared by autograd ops and plain inference) ----

// x: [IC,H,W], w: [OC,IC,kh,kw], b: [OC] (may be empty) -> [OC,OH,OW]
Tensor conv2d_fwd(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor conv2d_bwd_x(const Tensor& gout, const Tensor& w, int stride, int pad, int H, int W);
Tensor conv2d_bwd_w(const Tensor& gout, const Tensor& x, int stride, int pad,
                    const std::vector<int>& wshape);
Tensor conv2d_bwd_b(const Tensor& gout);

// nearest-neighbor 2x upsample of [C,H,W]
Tensor upsample2_fwd(const Tensor& x);
Tensor upsample2_bwd(const Tensor& gout);

// depthwise correlation with a fixed [k,k] kernel, zero padding k/2 (same size)
Tensor blur_fwd(const Tensor& x, const Tensor& kernel);
Tensor blur_bwd(const Tensor& gout, const Tensor& kernel);

Tensor gaussian_kernel(int window, double sigma);

}  // namespace auvf

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <utility>

#include "resdehaze/common.hpp"

namespace resdehaze {

template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;

struct Shape {
  int c = 0;
  int h = 0;
  int w = 0;

  int size() const { return c * h * w; }
  bool operator==(const Shape& o) const { return c == o.c && h == o.h && w == o.w; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

// Dense C x H x W buffer, plane-major (channel planes contiguous, rows within a
// plane contiguous). Images are (3,H,W), transmission maps (1,H,W), per-channel
// scalars such as the atmospheric light (3,1,1). Convolution weights are stored
// flattened as (out_c, in_c*k*k, 1) so a plane row maps directly onto a GEMM row.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;
  Tensor(int c, int h, int w) : shape_{c, h, w}, data_(ArrayX<S>::Zero(c * h * w)) {}
  Tensor(Shape s, ArrayX<S> data) : shape_(s), data_(std::move(data)) {
    require(static_cast<int>(data_.size()) == shape_.size(),
            "tensor data size does not match shape " + shape_.str());
  }

  static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }
  static Tensor constant(int c, int h, int w, S v) {
    Tensor t(c, h, w);
    t.data_.setConstant(v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  int size() const { return shape_.size(); }
  int plane_size() const { return shape_.h * shape_.w; }
  bool empty() const { return size() == 0; }

  S& operator()(int ci, int y, int x) { return data_[(ci * shape_.h + y) * shape_.w + x]; }
  S operator()(int ci, int y, int x) const { return data_[(ci * shape_.h + y) * shape_.w + x]; }
  S& operator[](int i) { return data_[i]; }
  S operator[](int i) const { return data_[i]; }

  ArrayX<S>& array() { return data_; }
  const ArrayX<S>& array() const { return data_; }
  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  Eigen::Map<ArrayX<S>> plane(int ci) {
    return Eigen::Map<ArrayX<S>>(data_.data() + ci * plane_size(), plane_size());
  }
  Eigen::Map<const ArrayX<S>> plane(int ci) const {
    return Eigen::Map<const ArrayX<S>>(data_.data() + ci * plane_size(), plane_size());
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const { return data_.isFinite().all(); }

  template <typename T>
  Tensor<T> cast() const {
    return Tensor<T>(shape_, data_.template cast<T>());
  }

 private:
  Shape shape_{0, 0, 0};
  ArrayX<S> data_;
};

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const std::string& what) {
  require(a.same_shape(b), what + ": shape mismatch " + a.shape().str() + " vs " +
                               b.shape().str());
}

template <typename S>
void require_finite(const Tensor<S>& t, const std::string& what) {
  require(t.all_finite(), what + ": non-finite values");
}

}  // namespace resdehaze

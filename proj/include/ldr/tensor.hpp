#pragma once

// Dense row-major tensors. float is the training scalar; double is used by
// the gradient checks.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ldr/common.hpp"

namespace ldr {

template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    require(numel(shape) == int64_t(data.size()), "tensor data does not match shape");
  }

  static int64_t numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      require(d >= 0, "negative tensor dimension");
      n *= d;
    }
    return n;
  }

  static TensorT zeros(std::vector<int> s) {
    TensorT t;
    t.data.assign(size_t(numel(s)), T(0));
    t.shape = std::move(s);
    return t;
  }

  static TensorT full(std::vector<int> s, T v) {
    TensorT t = zeros(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t size() const { return int64_t(data.size()); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }

  T& operator[](int64_t i) { return data[size_t(i)]; }
  const T& operator[](int64_t i) const { return data[size_t(i)]; }

  // NHWC accessors for the common 4-d case.
  T& at4(int b, int y, int x, int c) {
    return data[size_t(((int64_t(b) * dim(1) + y) * dim(2) + x) * dim(3) + c)];
  }
  const T& at4(int b, int y, int x, int c) const {
    return data[size_t(((int64_t(b) * dim(1) + y) * dim(2) + x) * dim(3) + c)];
  }
  T& at2(int r, int c) { return data[size_t(int64_t(r) * dim(1) + c)]; }
  const T& at2(int r, int c) const { return data[size_t(int64_t(r) * dim(1) + c)]; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.reserve(data.size());
    for (T v : data) out.data.push_back(U(v));
    return out;
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
std::string shape_str(const TensorT<T>& t) {
  std::string s = "[";
  for (size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

}  // namespace ldr

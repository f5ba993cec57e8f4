#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dcpose/error.hpp"

namespace dcpose {

struct Shape4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::size_t numel() const { return std::size_t(n) * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

// Dense NCHW tensor of doubles.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, double fill = 0.0);
  explicit Tensor4(Shape4 s, double fill = 0.0) : Tensor4(s.n, s.c, s.h, s.w, fill) {}

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  double operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((std::size_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  // Contiguous H*W plane for (n, c).
  std::span<double> plane(int n, int c) {
    return {data_.data() + index(n, c, 0, 0), std::size_t(shape_.h) * shape_.w};
  }
  std::span<const double> plane(int n, int c) const {
    return {data_.data() + index(n, c, 0, 0), std::size_t(shape_.h) * shape_.w};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

  Tensor4& operator+=(const Tensor4& o);
  Tensor4& operator*=(double s);

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(const Tensor4& a, const Tensor4& b);
Tensor4 operator*(double s, Tensor4 a);

// Concatenate along the channel axis.
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
// Channels [begin, begin+count) of x.
Tensor4 slice_channels(const Tensor4& x, int begin, int count);

double max_abs_diff(const Tensor4& a, const Tensor4& b);

}  // namespace dcpose

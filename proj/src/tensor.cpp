#include "dcpose/tensor.hpp"

#include <sstream>

namespace dcpose {

std::string Shape4::str() const {
  std::ostringstream os;
  os << "[" << n << "," << c << "," << h << "," << w << "]";
  return os.str();
}

Tensor4::Tensor4(int n, int c, int h, int w, double fill) : shape_{n, c, h, w} {
  require(n >= 0 && c >= 0 && h >= 0 && w >= 0, "negative tensor dimension");
  data_.assign(shape_.numel(), fill);
}

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor4& Tensor4::operator+=(const Tensor4& o) {
  require(shape_ == o.shape_, "tensor add: shape mismatch " + shape_.str() + " vs " + o.shape_.str());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor4& Tensor4::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) {
  a += b;
  return a;
}

Tensor4 operator-(const Tensor4& a, const Tensor4& b) {
  require(a.shape() == b.shape(), "tensor sub: shape mismatch");
  Tensor4 out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.vec()[i] = a.vec()[i] - b.vec()[i];
  return out;
}

Tensor4 operator*(double s, Tensor4 a) {
  a *= s;
  return a;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
          "concat_channels: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor4 out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c) std::ranges::copy(a.plane(n, c), out.plane(n, c).begin());
    for (int c = 0; c < b.c(); ++c) std::ranges::copy(b.plane(n, c), out.plane(n, a.c() + c).begin());
  }
  return out;
}

Tensor4 slice_channels(const Tensor4& x, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.c(), "slice_channels: out of range");
  Tensor4 out(x.n(), count, x.h(), x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < count; ++c) std::ranges::copy(x.plane(n, begin + c), out.plane(n, c).begin());
  return out;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  require(a.shape() == b.shape(), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.vec()[i] - b.vec()[i]));
  return m;
}

}  // namespace dcpose

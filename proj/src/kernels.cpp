#include "dcpose/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace dcpose {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Valid output columns [x_begin, x_end) for a horizontal tap shift dx.
inline void valid_range(int dx, int W, int& x_begin, int& x_end) {
  x_begin = std::clamp(-dx, 0, W);
  x_end = std::clamp(W - dx, 0, W);
}

// Unfold the channels [c0, c0+cin) of batch item n into a (cin*k*k, h*w)
// column matrix. Row index is (ci*k + ky)*k + kx, matching the weight layout.
void im2col(const Tensor4& x, int n, int c0, int cin, int k, int dil, int pad, RowMat& cols) {
  const int H = x.h(), W = x.w();
  cols.resize(Eigen::Index(cin) * k * k, Eigen::Index(H) * W);
  for (int ci = 0; ci < cin; ++ci) {
    const double* src = x.plane(n, c0 + ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.row((ci * k + ky) * k + kx).data();
        const int dy = ky * dil - pad, dx = kx * dil - pad;
        int xb, xe;
        valid_range(dx, W, xb, xe);
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          double* dst = row + std::size_t(y) * W;
          if (sy < 0 || sy >= H || xb >= xe) {
            std::fill(dst, dst + W, 0.0);
            continue;
          }
          const double* srow = src + std::size_t(sy) * W + dx;
          std::fill(dst, dst + xb, 0.0);
          std::copy(srow + xb, srow + xe, dst + xb);
          std::fill(dst + xe, dst + W, 0.0);
        }
      }
    }
  }
}

void col2im_add(const RowMat& cols, Tensor4& dx, int n, int c0, int cin, int k, int dil, int pad) {
  const int H = dx.h(), W = dx.w();
  for (int ci = 0; ci < cin; ++ci) {
    double* dst = dx.plane(n, c0 + ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.row((ci * k + ky) * k + kx).data();
        const int dy = ky * dil - pad, ddx = kx * dil - pad;
        int xb, xe;
        valid_range(ddx, W, xb, xe);
        if (xb >= xe) continue;
        for (int y = std::max(0, -dy); y < std::min(H, H - dy); ++y) {
          double* drow = dst + std::size_t(y + dy) * W + ddx;
          const double* r = row + std::size_t(y) * W;
          for (int xx = xb; xx < xe; ++xx) drow[xx] += r[xx];
        }
      }
    }
  }
}

void check_conv_input(const Tensor4& x, const ConvParams& p) {
  p.validate();
  require(x.c() == p.in_channels(), "conv2d: input has " + std::to_string(x.c()) + " channels, params expect " +
                                        std::to_string(p.in_channels()));
}

// Precomputed bilinear footprint of one sample point.
struct Footprint {
  int y0 = 0, x0 = 0;
  double ly = 0, lx = 0;
  bool inside = false;
};

Footprint footprint(double y, double x, int H, int W) {
  Footprint f;
  if (!(y > -1.0 && y < H && x > -1.0 && x < W)) return f;
  const double fy = std::floor(y), fx = std::floor(x);
  f.y0 = int(fy);
  f.x0 = int(fx);
  f.ly = y - fy;
  f.lx = x - fx;
  f.inside = true;
  return f;
}

inline double tap(const double* plane, int H, int W, int y, int x) {
  return (y >= 0 && y < H && x >= 0 && x < W) ? plane[std::size_t(y) * W + x] : 0.0;
}

inline double interpolate(const double* plane, int H, int W, const Footprint& f) {
  if (!f.inside) return 0.0;
  const double v00 = tap(plane, H, W, f.y0, f.x0), v01 = tap(plane, H, W, f.y0, f.x0 + 1);
  const double v10 = tap(plane, H, W, f.y0 + 1, f.x0), v11 = tap(plane, H, W, f.y0 + 1, f.x0 + 1);
  return (1 - f.ly) * ((1 - f.lx) * v00 + f.lx * v01) + f.ly * ((1 - f.lx) * v10 + f.lx * v11);
}

inline void scatter(double* plane, int H, int W, int y, int x, double v) {
  if (y >= 0 && y < H && x >= 0 && x < W) plane[std::size_t(y) * W + x] += v;
}

}  // namespace

ConvParams ConvParams::zeros(int in_ch, int out_ch, int kernel, int dilation, int groups) {
  require(groups >= 1 && in_ch % groups == 0 && out_ch % groups == 0,
          "conv: channels not divisible by groups");
  require(kernel % 2 == 1, "conv: kernel size must be odd");
  ConvParams p;
  p.weight = Tensor4(out_ch, in_ch / groups, kernel, kernel);
  p.bias.assign(std::size_t(out_ch), 0.0);
  p.dilation = dilation;
  p.groups = groups;
  return p;
}

ConvParams ConvParams::zeros_like() const {
  ConvParams g = *this;
  g.weight.fill(0.0);
  std::fill(g.bias.begin(), g.bias.end(), 0.0);
  return g;
}

void ConvParams::validate() const {
  require(groups >= 1 && weight.n() % groups == 0, "conv: out channels not divisible by groups");
  require(weight.h() == weight.w() && weight.h() % 2 == 1, "conv: kernel must be square and odd");
  require(dilation >= 1, "conv: dilation must be >= 1");
  require(bias.size() == std::size_t(weight.n()), "conv: bias length mismatch");
}

Tensor4 conv2d(const Tensor4& x, const ConvParams& p) {
  check_conv_input(x, p);
  const int G = p.groups, cin_g = p.weight.c(), cout_g = p.out_channels() / G, k = p.kernel();
  const int HW = x.h() * x.w();
  Tensor4 y(x.n(), p.out_channels(), x.h(), x.w());
  RowMat cols;
  for (int n = 0; n < x.n(); ++n) {
    for (int g = 0; g < G; ++g) {
      ConstRowMap Wg(p.weight.vec().data() + std::size_t(g) * cout_g * cin_g * k * k, cout_g, cin_g * k * k);
      RowMap Yg(y.plane(n, g * cout_g).data(), cout_g, HW);
      if (k == 1) {
        ConstRowMap Xg(x.plane(n, g * cin_g).data(), cin_g, HW);
        Yg.noalias() = Wg * Xg;
      } else {
        im2col(x, n, g * cin_g, cin_g, k, p.dilation, p.padding(), cols);
        Yg.noalias() = Wg * cols;
      }
      for (int o = 0; o < cout_g; ++o) Yg.row(o).array() += p.bias[std::size_t(g * cout_g + o)];
    }
  }
  return y;
}

Tensor4 conv2d_backward(const Tensor4& x, const ConvParams& p, const Tensor4& dy, ConvParams* grad) {
  check_conv_input(x, p);
  require(dy.shape() == Shape4{x.n(), p.out_channels(), x.h(), x.w()}, "conv2d_backward: dy shape mismatch");
  const int G = p.groups, cin_g = p.weight.c(), cout_g = p.out_channels() / G, k = p.kernel();
  const int HW = x.h() * x.w(), K = cin_g * k * k;
  Tensor4 dx(x.shape());
  RowMat cols, dcols;
  for (int n = 0; n < x.n(); ++n) {
    for (int g = 0; g < G; ++g) {
      const std::size_t woff = std::size_t(g) * cout_g * K;
      ConstRowMap Wg(p.weight.vec().data() + woff, cout_g, K);
      ConstRowMap dYg(dy.plane(n, g * cout_g).data(), cout_g, HW);
      if (k == 1) {
        ConstRowMap Xg(x.plane(n, g * cin_g).data(), cin_g, HW);
        RowMap dXg(dx.plane(n, g * cin_g).data(), cin_g, HW);
        dXg.noalias() += Wg.transpose() * dYg;
        if (grad) RowMap(grad->weight.vec().data() + woff, cout_g, K).noalias() += dYg * Xg.transpose();
      } else {
        im2col(x, n, g * cin_g, cin_g, k, p.dilation, p.padding(), cols);
        dcols.noalias() = Wg.transpose() * dYg;
        col2im_add(dcols, dx, n, g * cin_g, cin_g, k, p.dilation, p.padding());
        if (grad) RowMap(grad->weight.vec().data() + woff, cout_g, K).noalias() += dYg * cols.transpose();
      }
      if (grad)
        for (int o = 0; o < cout_g; ++o) grad->bias[std::size_t(g * cout_g + o)] += dYg.row(o).sum();
    }
  }
  return dx;
}

Tensor4 relu(Tensor4 x) {
  for (auto& v : x.vec()) v = v > 0.0 ? v : 0.0;
  return x;
}

Tensor4 relu_backward(const Tensor4& pre, Tensor4 dy) {
  require(pre.shape() == dy.shape(), "relu_backward: shape mismatch");
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(pre.vec()[i] > 0.0)) dy.vec()[i] = 0.0;
  return dy;
}

Tensor4 sigmoid(Tensor4 x) {
  for (auto& v : x.vec()) v = 1.0 / (1.0 + std::exp(-v));
  return x;
}

Tensor4 sigmoid_backward(const Tensor4& out, Tensor4 dy) {
  require(out.shape() == dy.shape(), "sigmoid_backward: shape mismatch");
  for (std::size_t i = 0; i < dy.size(); ++i) dy.vec()[i] *= out.vec()[i] * (1.0 - out.vec()[i]);
  return dy;
}

ResidualBlock ResidualBlock::zeros_like() const {
  ResidualBlock b{conv1.zeros_like(), conv2.zeros_like(), std::nullopt};
  if (skip) b.skip = skip->zeros_like();
  return b;
}

ResidualStack make_residual_stack(int in_ch, int hidden_ch, int out_ch, int depth, int groups) {
  require(depth >= 1, "residual stack: depth must be >= 1");
  ResidualStack s;
  for (int i = 0; i < depth; ++i) {
    const int cin = i == 0 ? in_ch : out_ch;
    ResidualBlock b{ConvParams::zeros(cin, hidden_ch, 3, 1, groups), ConvParams::zeros(hidden_ch, out_ch, 3, 1, groups),
                    std::nullopt};
    if (cin != out_ch) b.skip = ConvParams::zeros(cin, out_ch, 1, 1, groups);
    s.push_back(std::move(b));
  }
  return s;
}

ResidualStack zeros_like(const ResidualStack& s) {
  ResidualStack g;
  g.reserve(s.size());
  for (const auto& b : s) g.push_back(b.zeros_like());
  return g;
}

Tensor4 residual_stack(const Tensor4& x, const ResidualStack& stack, ResidualCache* cache) {
  require(!stack.empty(), "residual_stack: empty parameter list");
  if (cache) cache->blocks.clear();
  Tensor4 cur = x;
  for (const auto& b : stack) {
    Tensor4 pre1 = conv2d(cur, b.conv1);
    Tensor4 hidden = relu(pre1);
    Tensor4 pre_out = conv2d(hidden, b.conv2);
    if (b.skip) {
      pre_out += conv2d(cur, *b.skip);
    } else {
      require(cur.shape() == pre_out.shape(), "residual_stack: identity skip needs matching channels");
      pre_out += cur;
    }
    Tensor4 out = relu(pre_out);
    if (cache) cache->blocks.push_back({std::move(cur), std::move(pre1), std::move(hidden), std::move(pre_out)});
    cur = std::move(out);
  }
  return cur;
}

Tensor4 residual_stack_backward(const ResidualCache& cache, const ResidualStack& stack, const Tensor4& dy,
                                ResidualStack* grad) {
  require(cache.blocks.size() == stack.size(), "residual_stack_backward: cache does not match stack");
  Tensor4 d = dy;
  for (std::size_t i = stack.size(); i-- > 0;) {
    const auto& b = stack[i];
    const auto& c = cache.blocks[i];
    ResidualBlock* gb = grad ? &(*grad)[i] : nullptr;
    Tensor4 dpre = relu_backward(c.pre_out, std::move(d));
    Tensor4 dhidden = conv2d_backward(c.hidden, b.conv2, dpre, gb ? &gb->conv2 : nullptr);
    Tensor4 dpre1 = relu_backward(c.pre1, std::move(dhidden));
    Tensor4 dx = conv2d_backward(c.input, b.conv1, dpre1, gb ? &gb->conv1 : nullptr);
    if (b.skip) {
      dx += conv2d_backward(c.input, *b.skip, dpre, gb ? &*gb->skip : nullptr);
    } else {
      dx += dpre;
    }
    d = std::move(dx);
  }
  return d;
}

double bilinear_sample(const Tensor4& x, int n, int ch, double y, double xcoord) {
  require(n >= 0 && n < x.n() && ch >= 0 && ch < x.c(), "bilinear_sample: index out of range");
  return interpolate(x.plane(n, ch).data(), x.h(), x.w(), footprint(y, xcoord, x.h(), x.w()));
}

namespace {

void check_deform_inputs(const Tensor4& x, const DeformInputs& in, const ConvParams& p) {
  p.validate();
  require(p.groups == 1, "deform_conv_v2: grouped weights are not supported");
  require(x.c() == p.in_channels(), "deform_conv_v2: input channel mismatch");
  const int taps = p.kernel() * p.kernel();
  require(in.offsets.shape() == Shape4{x.n(), 2 * taps, x.h(), x.w()},
          "deform_conv_v2: offsets must have shape " + Shape4{x.n(), 2 * taps, x.h(), x.w()}.str() + ", got " +
              in.offsets.shape().str());
  require(in.masks.shape() == Shape4{x.n(), taps, x.h(), x.w()},
          "deform_conv_v2: masks must have shape " + Shape4{x.n(), taps, x.h(), x.w()}.str() + ", got " +
              in.masks.shape().str());
}

// Footprints for every (tap, pixel) of batch item n.
std::vector<Footprint> sample_points(const DeformInputs& in, int n, int k, int dil, int pad, int H, int W) {
  std::vector<Footprint> pts(std::size_t(k) * k * H * W);
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      const int t = ky * k + kx;
      const double* oy = in.offsets.plane(n, 2 * t).data();
      const double* ox = in.offsets.plane(n, 2 * t + 1).data();
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const std::size_t pix = std::size_t(y) * W + x;
          const double sy = y - pad + ky * dil + oy[pix];
          const double sx = x - pad + kx * dil + ox[pix];
          pts[std::size_t(t) * H * W + pix] = footprint(sy, sx, H, W);
        }
      }
    }
  }
  return pts;
}

}  // namespace

Tensor4 deform_conv_v2(const Tensor4& x, const DeformInputs& in, const ConvParams& p) {
  check_deform_inputs(x, in, p);
  const int k = p.kernel(), taps = k * k, H = x.h(), W = x.w(), HW = H * W, C = x.c();
  Tensor4 y(x.n(), p.out_channels(), H, W);
  RowMat cols(Eigen::Index(C) * taps, HW);
  ConstRowMap Wm(p.weight.vec().data(), p.out_channels(), C * taps);
  for (int n = 0; n < x.n(); ++n) {
    const auto pts = sample_points(in, n, k, p.dilation, p.padding(), H, W);
    for (int c = 0; c < C; ++c) {
      const double* plane = x.plane(n, c).data();
      for (int t = 0; t < taps; ++t) {
        const double* mask = in.masks.plane(n, t).data();
        double* row = cols.row(c * taps + t).data();
        const Footprint* fp = pts.data() + std::size_t(t) * HW;
        for (int pix = 0; pix < HW; ++pix) row[pix] = mask[pix] * interpolate(plane, H, W, fp[pix]);
      }
    }
    RowMap Y(y.plane(n, 0).data(), p.out_channels(), HW);
    Y.noalias() = Wm * cols;
    for (int o = 0; o < p.out_channels(); ++o) Y.row(o).array() += p.bias[std::size_t(o)];
  }
  return y;
}

DeformGrads deform_conv_v2_backward(const Tensor4& x, const DeformInputs& in, const ConvParams& p,
                                    const Tensor4& dy, ConvParams* grad) {
  check_deform_inputs(x, in, p);
  require(dy.shape() == Shape4{x.n(), p.out_channels(), x.h(), x.w()}, "deform_conv_v2_backward: dy shape mismatch");
  const int k = p.kernel(), taps = k * k, H = x.h(), W = x.w(), HW = H * W, C = x.c();
  DeformGrads g{Tensor4(x.shape()), Tensor4(in.offsets.shape()), Tensor4(in.masks.shape())};
  RowMat cols(Eigen::Index(C) * taps, HW), dcols;
  ConstRowMap Wm(p.weight.vec().data(), p.out_channels(), C * taps);
  for (int n = 0; n < x.n(); ++n) {
    const auto pts = sample_points(in, n, k, p.dilation, p.padding(), H, W);
    ConstRowMap dY(dy.plane(n, 0).data(), p.out_channels(), HW);
    dcols.noalias() = Wm.transpose() * dY;
    for (int c = 0; c < C; ++c) {
      const double* plane = x.plane(n, c).data();
      double* dplane = g.dx.plane(n, c).data();
      for (int t = 0; t < taps; ++t) {
        const double* mask = in.masks.plane(n, t).data();
        double* dmask = g.dmasks.plane(n, t).data();
        double* doy = g.doffsets.plane(n, 2 * t).data();
        double* dox = g.doffsets.plane(n, 2 * t + 1).data();
        double* row = cols.row(c * taps + t).data();
        const double* drow = dcols.row(c * taps + t).data();
        const Footprint* fp = pts.data() + std::size_t(t) * HW;
        for (int pix = 0; pix < HW; ++pix) {
          const Footprint& f = fp[pix];
          if (!f.inside) {
            row[pix] = 0.0;
            continue;
          }
          const double v00 = tap(plane, H, W, f.y0, f.x0), v01 = tap(plane, H, W, f.y0, f.x0 + 1);
          const double v10 = tap(plane, H, W, f.y0 + 1, f.x0), v11 = tap(plane, H, W, f.y0 + 1, f.x0 + 1);
          const double val = (1 - f.ly) * ((1 - f.lx) * v00 + f.lx * v01) + f.ly * ((1 - f.lx) * v10 + f.lx * v11);
          row[pix] = mask[pix] * val;
          const double gd = drow[pix];
          dmask[pix] += gd * val;
          const double gm = gd * mask[pix];
          scatter(dplane, H, W, f.y0, f.x0, gm * (1 - f.ly) * (1 - f.lx));
          scatter(dplane, H, W, f.y0, f.x0 + 1, gm * (1 - f.ly) * f.lx);
          scatter(dplane, H, W, f.y0 + 1, f.x0, gm * f.ly * (1 - f.lx));
          scatter(dplane, H, W, f.y0 + 1, f.x0 + 1, gm * f.ly * f.lx);
          doy[pix] += gm * ((1 - f.lx) * (v10 - v00) + f.lx * (v11 - v01));
          dox[pix] += gm * ((1 - f.ly) * (v01 - v00) + f.ly * (v11 - v10));
        }
      }
    }
    if (grad) {
      RowMap(grad->weight.vec().data(), p.out_channels(), C * taps).noalias() += dY * cols.transpose();
      for (int o = 0; o < p.out_channels(); ++o) grad->bias[std::size_t(o)] += dY.row(o).sum();
    }
  }
  return g;
}

}  // namespace dcpose

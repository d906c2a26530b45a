#include "iex/ops.hpp"

#include <cmath>

namespace iex {
namespace {

struct ConvDims {
  bool batched;
  int b, cin, h, w;     // input
  int cout, k;          // kernel
  int oh, ow;           // output spatial
};

void check_spatial(const Tensor& x, const char* op) {
  if (x.rank() != 3 && x.rank() != 4)
    throw ConfigError(std::string(op) + ": expected (C,H,W) or (B,C,H,W) input, got " +
                      shape_str(x.shape()));
}

ConvDims conv_dims(const Tensor& x, const LayerParams& p, int stride, const char* op) {
  check_spatial(x, op);
  ConvDims d;
  d.batched = x.rank() == 4;
  d.b = d.batched ? x.dim(0) : 1;
  d.cin = x.dim(d.batched ? 1 : 0);
  d.h = x.dim(d.batched ? 2 : 1);
  d.w = x.dim(d.batched ? 3 : 2);
  if (p.w.rank() != 4 || p.w.dim(2) != p.w.dim(3))
    throw ConfigError(std::string(op) + ": weights must be (Cout,Cin,k,k), got " +
                      shape_str(p.w.shape()));
  d.cout = p.w.dim(0);
  d.k = p.w.dim(2);
  if (p.w.dim(1) != d.cin)
    throw ConfigError(std::string(op) + ": input " + shape_str(x.shape()) +
                      " does not match weights " + shape_str(p.w.shape()));
  if (p.b.size() != d.cout)
    throw ConfigError(std::string(op) + ": bias " + shape_str(p.b.shape()) + " vs weights " +
                      shape_str(p.w.shape()));
  if (stride < 1 || d.h < d.k || d.w < d.k)
    throw ConfigError(std::string(op) + ": kernel " + std::to_string(d.k) + " stride " +
                      std::to_string(stride) + " does not fit input " + shape_str(x.shape()));
  d.oh = (d.h - d.k) / stride + 1;
  d.ow = (d.w - d.k) / stride + 1;
  return d;
}

// Gather conv windows: result (Cin*k*k) x (B*OH*OW), column index (b,oh,ow).
MatrixRM im2col(const float* xd, int b, int cin, int h, int w, int k, int s, int oh, int ow) {
  MatrixRM col(cin * k * k, static_cast<Eigen::Index>(b) * oh * ow);
  for (int bi = 0; bi < b; ++bi) {
    for (int c = 0; c < cin; ++c) {
      const float* xc = xd + (static_cast<std::ptrdiff_t>(bi) * cin + c) * h * w;
      for (int u = 0; u < k; ++u) {
        for (int v = 0; v < k; ++v) {
          float* crow = col.data() + static_cast<std::ptrdiff_t>((c * k + u) * k + v) * col.cols();
          for (int i = 0; i < oh; ++i) {
            const float* src = xc + (i * s + u) * w + v;
            float* dst = crow + (static_cast<std::ptrdiff_t>(bi) * oh + i) * ow;
            for (int j = 0; j < ow; ++j) dst[j] = src[j * s];
          }
        }
      }
    }
  }
  return col;
}

// Scatter-add of conv windows, the transpose of im2col.
void col2im_add(const MatrixRM& col, float* xd, int b, int cin, int h, int w, int k, int s,
                int oh, int ow) {
  for (int bi = 0; bi < b; ++bi) {
    for (int c = 0; c < cin; ++c) {
      float* xc = xd + (static_cast<std::ptrdiff_t>(bi) * cin + c) * h * w;
      for (int u = 0; u < k; ++u) {
        for (int v = 0; v < k; ++v) {
          const float* crow =
              col.data() + static_cast<std::ptrdiff_t>((c * k + u) * k + v) * col.cols();
          for (int i = 0; i < oh; ++i) {
            float* dst = xc + (i * s + u) * w + v;
            const float* src = crow + (static_cast<std::ptrdiff_t>(bi) * oh + i) * ow;
            for (int j = 0; j < ow; ++j) dst[j * s] += src[j];
          }
        }
      }
    }
  }
}

std::vector<int> spatial_shape(bool batched, int b, int c, int h, int w) {
  return batched ? std::vector<int>{b, c, h, w} : std::vector<int>{c, h, w};
}

}  // namespace

Tensor conv2d(const Tensor& x, const LayerParams& p, int stride) {
  const ConvDims d = conv_dims(x, p, stride, "conv2d");
  const MatrixRM col = im2col(x.data(), d.b, d.cin, d.h, d.w, d.k, stride, d.oh, d.ow);
  ConstMapMat wm(p.w.data(), d.cout, static_cast<Eigen::Index>(d.cin) * d.k * d.k);
  MatrixRM y = wm * col;  // (Cout x B*OH*OW)
  Tensor out(spatial_shape(d.batched, d.b, d.cout, d.oh, d.ow));
  const Eigen::Index plane = static_cast<Eigen::Index>(d.oh) * d.ow;
  for (int bi = 0; bi < d.b; ++bi) {
    for (int co = 0; co < d.cout; ++co) {
      MapVec dst(out.data() + (static_cast<std::ptrdiff_t>(bi) * d.cout + co) * plane, plane);
      dst = y.row(co).segment(static_cast<Eigen::Index>(bi) * plane, plane).transpose();
      dst.array() += p.b[co];
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& x, LayerParams& p, int stride, const Tensor& gy,
                       bool need_gx) {
  const ConvDims d = conv_dims(x, p, stride, "conv2d_backward");
  const std::vector<int> want = spatial_shape(d.batched, d.b, d.cout, d.oh, d.ow);
  if (gy.shape() != want)
    throw ConfigError("conv2d_backward: upstream grad " + shape_str(gy.shape()) + " vs expected " +
                      shape_str(want));
  // Regather gy into (Cout x B*OH*OW).
  MatrixRM gym(d.cout, static_cast<Eigen::Index>(d.b) * d.oh * d.ow);
  const Eigen::Index plane = static_cast<Eigen::Index>(d.oh) * d.ow;
  for (int bi = 0; bi < d.b; ++bi)
    for (int co = 0; co < d.cout; ++co)
      gym.row(co).segment(static_cast<Eigen::Index>(bi) * plane, plane) =
          ConstMapVec(gy.data() + (static_cast<std::ptrdiff_t>(bi) * d.cout + co) * plane, plane)
              .transpose();

  const MatrixRM col = im2col(x.data(), d.b, d.cin, d.h, d.w, d.k, stride, d.oh, d.ow);
  MapMat gwm(p.gw.data(), d.cout, static_cast<Eigen::Index>(d.cin) * d.k * d.k);
  gwm.noalias() += gym * col.transpose();
  MapVec gbv(p.gb.data(), d.cout);
  gbv.noalias() += gym.rowwise().sum();

  Tensor gx;
  if (need_gx) {
    gx = Tensor(x.shape());
    ConstMapMat wm(p.w.data(), d.cout, static_cast<Eigen::Index>(d.cin) * d.k * d.k);
    const MatrixRM gcol = wm.transpose() * gym;
    col2im_add(gcol, gx.data(), d.b, d.cin, d.h, d.w, d.k, stride, d.oh, d.ow);
  }
  return gx;
}

namespace {

struct DeconvDims {
  bool batched;
  int b, cin, h, w;  // input
  int cout, k;
  int oh, ow;  // output spatial (the conv-input geometry being inverted)
};

DeconvDims deconv_dims(const Tensor& x, const LayerParams& p, int stride, int out_h, int out_w,
                       const char* op) {
  check_spatial(x, op);
  DeconvDims d;
  d.batched = x.rank() == 4;
  d.b = d.batched ? x.dim(0) : 1;
  d.cin = x.dim(d.batched ? 1 : 0);
  d.h = x.dim(d.batched ? 2 : 1);
  d.w = x.dim(d.batched ? 3 : 2);
  if (p.w.rank() != 4 || p.w.dim(2) != p.w.dim(3))
    throw ConfigError(std::string(op) + ": weights must be (Cin,Cout,k,k), got " +
                      shape_str(p.w.shape()));
  if (p.w.dim(0) != d.cin)
    throw ConfigError(std::string(op) + ": input " + shape_str(x.shape()) +
                      " does not match weights " + shape_str(p.w.shape()));
  d.cout = p.w.dim(1);
  d.k = p.w.dim(2);
  if (p.b.size() != d.cout)
    throw ConfigError(std::string(op) + ": bias " + shape_str(p.b.shape()) + " vs weights " +
                      shape_str(p.w.shape()));
  if (stride < 1) throw ConfigError(std::string(op) + ": stride must be >= 1");
  const int lo_h = (d.h - 1) * stride + d.k;
  const int lo_w = (d.w - 1) * stride + d.k;
  d.oh = out_h < 0 ? lo_h : out_h;
  d.ow = out_w < 0 ? lo_w : out_w;
  if (d.oh < lo_h || d.oh >= lo_h + stride || d.ow < lo_w || d.ow >= lo_w + stride)
    throw ConfigError(std::string(op) + ": target " + std::to_string(d.oh) + "x" +
                      std::to_string(d.ow) + " is not a conv-input geometry for input " +
                      shape_str(x.shape()) + " kernel " + std::to_string(d.k) + " stride " +
                      std::to_string(stride));
  return d;
}

}  // namespace

Tensor deconv2d(const Tensor& x, const LayerParams& p, int stride, int out_h, int out_w) {
  const DeconvDims d = deconv_dims(x, p, stride, out_h, out_w, "deconv2d");
  Tensor out(spatial_shape(d.batched, d.b, d.cout, d.oh, d.ow));
  ConstMapMat wm(p.w.data(), d.cin, static_cast<Eigen::Index>(d.cout) * d.k * d.k);
  // Per sample: columns of (Cout*k*k x h*w) are the conv windows of the output.
  const Eigen::Index in_plane = static_cast<Eigen::Index>(d.h) * d.w;
  for (int bi = 0; bi < d.b; ++bi) {
    ConstMapMat xm(x.data() + static_cast<std::ptrdiff_t>(bi) * d.cin * in_plane, d.cin, in_plane);
    const MatrixRM colv = wm.transpose() * xm;
    col2im_add(colv, out.data() + static_cast<std::ptrdiff_t>(bi) * d.cout * d.oh * d.ow, 1,
               d.cout, d.oh, d.ow, d.k, stride, d.h, d.w);
  }
  const Eigen::Index out_plane = static_cast<Eigen::Index>(d.oh) * d.ow;
  for (int bi = 0; bi < d.b; ++bi)
    for (int co = 0; co < d.cout; ++co)
      MapVec(out.data() + (static_cast<std::ptrdiff_t>(bi) * d.cout + co) * out_plane, out_plane)
          .array() += p.b[co];
  return out;
}

Tensor deconv2d_backward(const Tensor& x, LayerParams& p, int stride, const Tensor& gy) {
  const bool batched = x.rank() == 4;
  const int goh = gy.dim(batched ? 2 : 1);
  const int gow = gy.dim(batched ? 3 : 2);
  const DeconvDims d = deconv_dims(x, p, stride, goh, gow, "deconv2d_backward");
  const std::vector<int> want = spatial_shape(d.batched, d.b, d.cout, d.oh, d.ow);
  if (gy.shape() != want)
    throw ConfigError("deconv2d_backward: upstream grad " + shape_str(gy.shape()) +
                      " vs expected " + shape_str(want));

  Tensor gx(x.shape());
  MapMat gwm(p.gw.data(), d.cin, static_cast<Eigen::Index>(d.cout) * d.k * d.k);
  ConstMapMat wm(p.w.data(), d.cin, static_cast<Eigen::Index>(d.cout) * d.k * d.k);
  const Eigen::Index in_plane = static_cast<Eigen::Index>(d.h) * d.w;
  for (int bi = 0; bi < d.b; ++bi) {
    const MatrixRM gcol =
        im2col(gy.data() + static_cast<std::ptrdiff_t>(bi) * d.cout * d.oh * d.ow, 1, d.cout, d.oh,
               d.ow, d.k, stride, d.h, d.w);
    ConstMapMat xm(x.data() + static_cast<std::ptrdiff_t>(bi) * d.cin * in_plane, d.cin, in_plane);
    gwm.noalias() += xm * gcol.transpose();
    MapMat gxm(gx.data() + static_cast<std::ptrdiff_t>(bi) * d.cin * in_plane, d.cin, in_plane);
    gxm.noalias() += wm * gcol;
  }
  const Eigen::Index out_plane = static_cast<Eigen::Index>(d.oh) * d.ow;
  for (int bi = 0; bi < d.b; ++bi)
    for (int co = 0; co < d.cout; ++co)
      p.gb[co] +=
          ConstMapVec(gy.data() + (static_cast<std::ptrdiff_t>(bi) * d.cout + co) * out_plane,
                      out_plane)
              .sum();
  return gx;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  y.array() = x.array().max(0.0f);
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& gy) {
  if (!x.same_shape(gy))
    throw ConfigError("relu_backward: " + shape_str(x.shape()) + " vs " + shape_str(gy.shape()));
  Tensor gx(x.shape());
  gx.array() = (x.array() > 0.0f).select(gy.array(), 0.0f);
  return gx;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  y.array() = 1.0f / (1.0f + (-x.array()).exp());
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& gy) {
  if (!y.same_shape(gy))
    throw ConfigError("sigmoid_backward: " + shape_str(y.shape()) + " vs " + shape_str(gy.shape()));
  Tensor gx(y.shape());
  gx.array() = gy.array() * y.array() * (1.0f - y.array());
  return gx;
}

namespace {

Tensor maxpool2_impl(const Tensor& x, std::vector<Eigen::Index>* argmax) {
  check_spatial(x, "maxpool2");
  const bool batched = x.rank() == 4;
  const int b = batched ? x.dim(0) : 1;
  const int c = x.dim(batched ? 1 : 0);
  const int h = x.dim(batched ? 2 : 1);
  const int w = x.dim(batched ? 3 : 2);
  if (h % 2 != 0 || w % 2 != 0)
    throw ConfigError("maxpool2: spatial dims must be even, got " + shape_str(x.shape()));
  const int oh = h / 2, ow = w / 2;
  Tensor y(spatial_shape(batched, b, c, oh, ow));
  if (argmax) argmax->assign(static_cast<std::size_t>(y.size()), 0);
  const float* xd = x.data();
  float* yd = y.data();
  Eigen::Index yi = 0;
  for (int p = 0; p < b * c; ++p) {
    const float* plane = xd + static_cast<std::ptrdiff_t>(p) * h * w;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j, ++yi) {
        // First maximal element in row-major window order wins ties.
        Eigen::Index best = static_cast<Eigen::Index>(p) * h * w + (2 * i) * w + 2 * j;
        float bv = xd[best];
        const Eigen::Index cand[3] = {best + 1, best + w, best + w + 1};
        for (const Eigen::Index idx : cand) {
          if (xd[idx] > bv) {
            bv = xd[idx];
            best = idx;
          }
        }
        yd[yi] = bv;
        if (argmax) (*argmax)[static_cast<std::size_t>(yi)] = best;
      }
    }
    (void)plane;
  }
  return y;
}

}  // namespace

Tensor maxpool2(const Tensor& x) { return maxpool2_impl(x, nullptr); }

Tensor maxpool2(const Tensor& x, std::vector<Eigen::Index>& argmax) {
  return maxpool2_impl(x, &argmax);
}

Tensor maxpool2_backward(const std::vector<Eigen::Index>& argmax,
                         const std::vector<int>& x_shape, const Tensor& gy) {
  if (static_cast<Eigen::Index>(argmax.size()) != gy.size())
    throw ConfigError("maxpool2_backward: argmax size " + std::to_string(argmax.size()) +
                      " vs grad " + shape_str(gy.shape()));
  Tensor gx(x_shape);
  for (Eigen::Index i = 0; i < gy.size(); ++i) gx[argmax[static_cast<std::size_t>(i)]] += gy[i];
  return gx;
}

namespace {

struct DenseDims {
  bool batched;
  Eigen::Index b, in, out;
};

DenseDims dense_dims(const Tensor& x, const LayerParams& p, const char* op) {
  if (x.rank() != 1 && x.rank() != 2)
    throw ConfigError(std::string(op) + ": expected (n) or (B,n) input, got " +
                      shape_str(x.shape()));
  DenseDims d;
  d.batched = x.rank() == 2;
  d.b = d.batched ? x.dim(0) : 1;
  d.in = x.dim(d.batched ? 1 : 0);
  if (p.w.rank() != 2 || p.w.dim(1) != d.in)
    throw ConfigError(std::string(op) + ": input " + shape_str(x.shape()) +
                      " does not match weights " + shape_str(p.w.shape()));
  d.out = p.w.dim(0);
  if (p.b.size() != d.out)
    throw ConfigError(std::string(op) + ": bias " + shape_str(p.b.shape()) + " vs weights " +
                      shape_str(p.w.shape()));
  return d;
}

}  // namespace

Tensor dense(const Tensor& x, const LayerParams& p) {
  const DenseDims d = dense_dims(x, p, "dense");
  Tensor y(d.batched ? std::vector<int>{static_cast<int>(d.b), static_cast<int>(d.out)}
                     : std::vector<int>{static_cast<int>(d.out)});
  ConstMapMat xm(x.data(), d.b, d.in);
  ConstMapMat wm(p.w.data(), d.out, d.in);
  MapMat ym(y.data(), d.b, d.out);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += ConstMapVec(p.b.data(), d.out).transpose();
  return y;
}

Tensor dense_backward(const Tensor& x, LayerParams& p, const Tensor& gy) {
  const DenseDims d = dense_dims(x, p, "dense_backward");
  const Eigen::Index gb = gy.rank() == 2 ? gy.dim(0) : 1;
  const Eigen::Index gn = gy.dim(gy.rank() == 2 ? 1 : 0);
  if (gb != d.b || gn != d.out)
    throw ConfigError("dense_backward: upstream grad " + shape_str(gy.shape()) + " vs output (" +
                      std::to_string(d.b) + "," + std::to_string(d.out) + ")");
  ConstMapMat xm(x.data(), d.b, d.in);
  ConstMapMat gym(gy.data(), d.b, d.out);
  MapMat gwm(p.gw.data(), d.out, d.in);
  gwm.noalias() += gym.transpose() * xm;
  MapVec(p.gb.data(), d.out).noalias() += gym.colwise().sum().transpose();
  Tensor gx(x.shape());
  MapMat gxm(gx.data(), d.b, d.in);
  ConstMapMat wm(p.w.data(), d.out, d.in);
  gxm.noalias() = gym * wm;
  return gx;
}

namespace {

void check_one_hot(const Tensor& a, Eigen::Index b, Eigen::Index l) {
  const float* ad = a.data();
  for (Eigen::Index r = 0; r < b; ++r) {
    int ones = 0;
    for (Eigen::Index j = 0; j < l; ++j) {
      const float v = ad[r * l + j];
      if (v == 1.0f)
        ++ones;
      else if (v != 0.0f)
        throw InputError("multiplicative_fusion: action vector is not one-hot (entry " +
                         std::to_string(v) + ")");
    }
    if (ones != 1)
      throw InputError("multiplicative_fusion: action vector has " + std::to_string(ones) +
                       " entries equal to 1");
  }
}

}  // namespace

Tensor multiplicative_fusion(const Tensor& hs, const Tensor& a, const LayerParams& ws,
                             const LayerParams& wa, FusionCache* cache) {
  if (hs.rank() != a.rank() || (hs.rank() != 1 && hs.rank() != 2))
    throw ConfigError("multiplicative_fusion: state " + shape_str(hs.shape()) + " vs action " +
                      shape_str(a.shape()));
  const bool batched = hs.rank() == 2;
  const Eigen::Index b = batched ? hs.dim(0) : 1;
  const Eigen::Index h = hs.dim(batched ? 1 : 0);
  const Eigen::Index l = a.dim(batched ? 1 : 0);
  if (batched && a.dim(0) != b)
    throw ConfigError("multiplicative_fusion: batch mismatch " + shape_str(hs.shape()) + " vs " +
                      shape_str(a.shape()));
  const Eigen::Index k = ws.w.dim(0);
  if (ws.w.rank() != 2 || ws.w.dim(1) != h || wa.w.rank() != 2 || wa.w.dim(1) != l ||
      wa.w.dim(0) != k)
    throw ConfigError("multiplicative_fusion: Ws " + shape_str(ws.w.shape()) + " Wa " +
                      shape_str(wa.w.shape()) + " for state " + shape_str(hs.shape()) +
                      " action " + shape_str(a.shape()));
  check_one_hot(a, b, l);

  const std::vector<int> out_shape =
      batched ? std::vector<int>{static_cast<int>(b), static_cast<int>(k)}
              : std::vector<int>{static_cast<int>(k)};
  Tensor u(out_shape), v(out_shape), y(out_shape);
  MapMat(u.data(), b, k).noalias() = ConstMapMat(hs.data(), b, h) * ConstMapMat(ws.w.data(), k, h).transpose();
  MapMat(v.data(), b, k).noalias() = ConstMapMat(a.data(), b, l) * ConstMapMat(wa.w.data(), k, l).transpose();
  y.array() = u.array() * v.array();
  if (cache) {
    cache->u = std::move(u);
    cache->v = std::move(v);
  }
  return y;
}

Tensor multiplicative_fusion_backward(const Tensor& hs, const Tensor& a, LayerParams& ws,
                                      LayerParams& wa, const FusionCache& cache,
                                      const Tensor& gy) {
  const bool batched = hs.rank() == 2;
  const Eigen::Index b = batched ? hs.dim(0) : 1;
  const Eigen::Index h = hs.dim(batched ? 1 : 0);
  const Eigen::Index l = a.dim(batched ? 1 : 0);
  const Eigen::Index k = ws.w.dim(0);
  if (!gy.same_shape(cache.u))
    throw ConfigError("multiplicative_fusion_backward: grad " + shape_str(gy.shape()) +
                      " vs cached " + shape_str(cache.u.shape()));
  Tensor gu(gy.shape()), gv(gy.shape());
  gu.array() = gy.array() * cache.v.array();
  gv.array() = gy.array() * cache.u.array();
  MapMat(ws.gw.data(), k, h).noalias() +=
      ConstMapMat(gu.data(), b, k).transpose() * ConstMapMat(hs.data(), b, h);
  MapMat(wa.gw.data(), k, l).noalias() +=
      ConstMapMat(gv.data(), b, k).transpose() * ConstMapMat(a.data(), b, l);
  Tensor ghs(hs.shape());
  MapMat(ghs.data(), b, h).noalias() =
      ConstMapMat(gu.data(), b, k) * ConstMapMat(ws.w.data(), k, h);
  return ghs;
}

}  // namespace iex

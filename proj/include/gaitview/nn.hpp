#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gaitview/common.hpp"

namespace gaitview {

// Minimal feed-forward building blocks with hand-written backward passes.
// Forward pushes whatever backward needs onto a per-layer cache stack;
// backward pops it. The stack discipline lets weight-shared layers run on
// several streams per step (multi-view heads, repeated generator passes):
// call backward in exact reverse order of the forwards. Parameter
// gradients accumulate across pops. Layers are templated on the scalar so
// training runs in float32 while finite-difference checks run in float64.

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// T frames of N x C node features.
template <typename S>
struct FeatureSeq {
  std::vector<Mat<S>> f;

  int frames() const { return static_cast<int>(f.size()); }
  int nodes() const { return f.empty() ? 0 : static_cast<int>(f[0].rows()); }
  int channels() const { return f.empty() ? 0 : static_cast<int>(f[0].cols()); }

  static FeatureSeq zeros_like(const FeatureSeq& o) {
    FeatureSeq z;
    z.f.assign(o.f.size(), Mat<S>::Zero(o.nodes(), o.channels()));
    return z;
  }
};

// C channel planes of H x W.
template <typename S>
struct Image {
  std::vector<Mat<S>> ch;

  int channels() const { return static_cast<int>(ch.size()); }
  int height() const { return ch.empty() ? 0 : static_cast<int>(ch[0].rows()); }
  int width() const { return ch.empty() ? 0 : static_cast<int>(ch[0].cols()); }

  static Image zeros(int c, int h, int w) {
    Image im;
    im.ch.assign(static_cast<std::size_t>(c), Mat<S>::Zero(h, w));
    return im;
  }
};

template <typename S>
struct ParamRef {
  std::string name;
  Mat<S>* value;
  Mat<S>* grad;
};

template <typename S>
using ParamList = std::vector<ParamRef<S>>;

template <typename S>
inline void zero_grads(const ParamList<S>& params) {
  for (const auto& p : params) p.grad->setZero();
}

template <typename S>
inline long param_count(const ParamList<S>& params) {
  long n = 0;
  for (const auto& p : params) n += static_cast<long>(p.value->size());
  return n;
}

namespace detail {
template <typename S>
inline void he_uniform(Mat<S>& w, long fan_in, long fan_out, Rng rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      w(i, j) = static_cast<S>(rng.uniform(-limit, limit));
}

template <typename T>
inline T pop(std::vector<T>& stack, const char* who) {
  if (stack.empty())
    throw ContractError(std::string(who) + ": backward without matching forward");
  T top = std::move(stack.back());
  stack.pop_back();
  return top;
}
}  // namespace detail

// ------------------------------------------------------------------ Linear

template <typename S>
class Linear {
public:
  Linear() = default;
  Linear(int in, int out, Rng rng) {
    w_ = Mat<S>::Zero(in, out);
    b_ = Mat<S>::Zero(1, out);
    detail::he_uniform(w_, in, out, rng);
    gw_ = Mat<S>::Zero(in, out);
    gb_ = Mat<S>::Zero(1, out);
  }

  Mat<S> forward(const Mat<S>& x) {
    stack_.push_back(x);
    Mat<S> y = x * w_;
    y.rowwise() += b_.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& gy) {
    const Mat<S> x = detail::pop(stack_, "linear");
    gw_.noalias() += x.transpose() * gy;
    gb_.row(0) += gy.colwise().sum();
    return gy * w_.transpose();
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
  }

  const Mat<S>& weight() const { return w_; }
  void clear_cache() { stack_.clear(); }

private:
  Mat<S> w_, b_, gw_, gb_;
  std::vector<Mat<S>> stack_;
};

// ----------------------------------------------------------- TemporalConv
//
// 1D convolution over the frame axis, applied independently at every node:
// y[t] = sum_k x[t*stride + k - pad] * W_k + b. Zero padding keeps length
// at stride 1; stride 2 halves even-length sequences.

template <typename S>
class TemporalConv {
public:
  TemporalConv() = default;
  TemporalConv(int in, int out, int kernel, int stride, Rng rng)
      : in_(in), out_(out), kernel_(kernel), stride_(stride),
        pad_((kernel - 1) / 2) {
    if (kernel % 2 != 1) throw ContractError("temporal kernel must be odd");
    for (int k = 0; k < kernel; ++k) {
      w_.push_back(Mat<S>::Zero(in, out));
      detail::he_uniform(w_.back(), in * kernel, out, rng.split(static_cast<std::uint64_t>(k)));
      gw_.push_back(Mat<S>::Zero(in, out));
    }
    b_ = Mat<S>::Zero(1, out);
    gb_ = Mat<S>::Zero(1, out);
  }

  int out_frames(int t_in) const {
    return (t_in + 2 * pad_ - kernel_) / stride_ + 1;
  }

  FeatureSeq<S> forward(const FeatureSeq<S>& x) {
    const int t_in = x.frames();
    const int t_out = out_frames(t_in);
    if (t_out < 1) throw ContractError("temporal conv: sequence too short");
    FeatureSeq<S> y;
    y.f.reserve(static_cast<std::size_t>(t_out));
    for (int t = 0; t < t_out; ++t) {
      Mat<S> acc = Mat<S>::Zero(x.nodes(), out_);
      acc.rowwise() += b_.row(0);
      for (int k = 0; k < kernel_; ++k) {
        const int u = t * stride_ + k - pad_;
        if (u < 0 || u >= t_in) continue;
        acc.noalias() +=
            x.f[static_cast<std::size_t>(u)] * w_[static_cast<std::size_t>(k)];
      }
      y.f.push_back(std::move(acc));
    }
    stack_.push_back(x);
    return y;
  }

  FeatureSeq<S> backward(const FeatureSeq<S>& gy) {
    const FeatureSeq<S> x = detail::pop(stack_, "temporal conv");
    FeatureSeq<S> gx = FeatureSeq<S>::zeros_like(x);
    const int t_in = x.frames();
    for (int t = 0; t < gy.frames(); ++t) {
      const auto& g = gy.f[static_cast<std::size_t>(t)];
      gb_.row(0) += g.colwise().sum();
      for (int k = 0; k < kernel_; ++k) {
        const int u = t * stride_ + k - pad_;
        if (u < 0 || u >= t_in) continue;
        gw_[static_cast<std::size_t>(k)].noalias() +=
            x.f[static_cast<std::size_t>(u)].transpose() * g;
        gx.f[static_cast<std::size_t>(u)].noalias() +=
            g * w_[static_cast<std::size_t>(k)].transpose();
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t k = 0; k < w_.size(); ++k)
      out.push_back({prefix + ".w" + std::to_string(k), &w_[k], &gw_[k]});
    out.push_back({prefix + ".b", &b_, &gb_});
  }
  void clear_cache() { stack_.clear(); }

private:
  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
  std::vector<Mat<S>> w_, gw_;
  Mat<S> b_, gb_;
  std::vector<FeatureSeq<S>> stack_;
};

// ----------------------------------------------------------------- Conv2d
//
// KxK convolution with zero padding, im2col under the hood. Output size
// is floor((H + 2p - K)/stride) + 1, which lands on the ceiling halving
// schedule (34 -> 17 -> 9 -> 5) used by the transform heads.

template <typename S>
class Conv2d {
public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad, bool relu, Rng rng)
      : in_(in), out_(out), k_(kernel), stride_(stride), pad_(pad), relu_(relu) {
    w_ = Mat<S>::Zero(out, in * kernel * kernel);
    detail::he_uniform(w_, in * kernel * kernel, out, rng);
    gw_ = Mat<S>::Zero(out, in * kernel * kernel);
    b_ = Mat<S>::Zero(out, 1);
    gb_ = Mat<S>::Zero(out, 1);
  }

  int out_dim(int d) const { return (d + 2 * pad_ - k_) / stride_ + 1; }

  Image<S> forward(const Image<S>& x) {
    Cache cache;
    cache.h_in = x.height();
    cache.w_in = x.width();
    const int oh = out_dim(cache.h_in), ow = out_dim(cache.w_in);
    if (oh < 1 || ow < 1) throw ContractError("conv2d: output collapsed");
    cache.cols = Mat<S>::Zero(in_ * k_ * k_, oh * ow);
    for (int c = 0; c < in_; ++c) {
      const auto& plane = x.ch[static_cast<std::size_t>(c)];
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          const int row = (c * k_ + ki) * k_ + kj;
          for (int oi = 0; oi < oh; ++oi) {
            const int si = oi * stride_ + ki - pad_;
            if (si < 0 || si >= cache.h_in) continue;
            for (int oj = 0; oj < ow; ++oj) {
              const int sj = oj * stride_ + kj - pad_;
              if (sj < 0 || sj >= cache.w_in) continue;
              cache.cols(row, oi * ow + oj) = plane(si, sj);
            }
          }
        }
    }
    Mat<S> flat = w_ * cache.cols;
    flat.colwise() += b_.col(0);
    Image<S> y = Image<S>::zeros(out_, oh, ow);
    for (int c = 0; c < out_; ++c)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj)
          y.ch[static_cast<std::size_t>(c)](oi, oj) = flat(c, oi * ow + oj);
    if (relu_) {
      cache.pre = y;
      for (auto& plane : y.ch) plane = plane.cwiseMax(S(0));
    }
    stack_.push_back(std::move(cache));
    return y;
  }

  Image<S> backward(const Image<S>& gy_in) {
    const Cache cache = detail::pop(stack_, "conv2d");
    Image<S> gy = gy_in;
    if (relu_)
      for (int c = 0; c < out_; ++c)
        gy.ch[static_cast<std::size_t>(c)] =
            (cache.pre.ch[static_cast<std::size_t>(c)].array() > S(0))
                .select(gy.ch[static_cast<std::size_t>(c)],
                        Mat<S>::Zero(gy.height(), gy.width()));
    const int oh = gy.height(), ow = gy.width();
    Mat<S> gflat(out_, oh * ow);
    for (int c = 0; c < out_; ++c)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj)
          gflat(c, oi * ow + oj) = gy.ch[static_cast<std::size_t>(c)](oi, oj);
    gw_.noalias() += gflat * cache.cols.transpose();
    gb_.col(0) += gflat.rowwise().sum();
    const Mat<S> gcols = w_.transpose() * gflat;
    Image<S> gx = Image<S>::zeros(in_, cache.h_in, cache.w_in);
    for (int c = 0; c < in_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          const int row = (c * k_ + ki) * k_ + kj;
          for (int oi = 0; oi < oh; ++oi) {
            const int si = oi * stride_ + ki - pad_;
            if (si < 0 || si >= cache.h_in) continue;
            for (int oj = 0; oj < ow; ++oj) {
              const int sj = oj * stride_ + kj - pad_;
              if (sj < 0 || sj >= cache.w_in) continue;
              gx.ch[static_cast<std::size_t>(c)](si, sj) +=
                  gcols(row, oi * ow + oj);
            }
          }
        }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
  }
  void clear_cache() { stack_.clear(); }

private:
  struct Cache {
    Mat<S> cols;
    Image<S> pre;
    int h_in = 0, w_in = 0;
  };
  int in_ = 0, out_ = 0, k_ = 3, stride_ = 1, pad_ = 1;
  bool relu_ = false;
  Mat<S> w_, gw_, b_, gb_;
  std::vector<Cache> stack_;
};

// ---------------------------------------------------------------- pooling

// Adaptive average pooling to a fixed output grid (PyTorch-style regions).
template <typename S>
class AdaptiveAvgPool2d {
public:
  AdaptiveAvgPool2d(int oh, int ow) : oh_(oh), ow_(ow) {}

  Image<S> forward(const Image<S>& x) {
    stack_.push_back({x.channels(), x.height(), x.width()});
    Image<S> y = Image<S>::zeros(x.channels(), oh_, ow_);
    for (int c = 0; c < x.channels(); ++c)
      for (int oi = 0; oi < oh_; ++oi)
        for (int oj = 0; oj < ow_; ++oj) {
          const auto [i0, i1] = range(oi, x.height(), oh_);
          const auto [j0, j1] = range(oj, x.width(), ow_);
          y.ch[static_cast<std::size_t>(c)](oi, oj) =
              x.ch[static_cast<std::size_t>(c)]
                  .block(i0, j0, i1 - i0, j1 - j0)
                  .mean();
        }
    return y;
  }

  Image<S> backward(const Image<S>& gy) {
    const auto [c_in, h, w] = detail::pop(stack_, "adaptive pool");
    Image<S> gx = Image<S>::zeros(c_in, h, w);
    for (int c = 0; c < c_in; ++c)
      for (int oi = 0; oi < oh_; ++oi)
        for (int oj = 0; oj < ow_; ++oj) {
          const auto [i0, i1] = range(oi, h, oh_);
          const auto [j0, j1] = range(oj, w, ow_);
          const S g = gy.ch[static_cast<std::size_t>(c)](oi, oj) /
                      static_cast<S>((i1 - i0) * (j1 - j0));
          gx.ch[static_cast<std::size_t>(c)]
              .block(i0, j0, i1 - i0, j1 - j0)
              .array() += g;
        }
    return gx;
  }

  void clear_cache() { stack_.clear(); }

private:
  static std::pair<int, int> range(int o, int in, int out) {
    return {(o * in) / out, ((o + 1) * in + out - 1) / out};
  }
  struct Dims {
    int c, h, w;
  };
  int oh_, ow_;
  std::vector<Dims> stack_;
};

// Mean over frames and nodes -> one feature row.
template <typename S>
class GlobalAvgPool {
public:
  Mat<S> forward(const FeatureSeq<S>& x) {
    stack_.push_back({x.frames(), x.nodes()});
    Mat<S> acc = Mat<S>::Zero(1, x.channels());
    for (const auto& fr : x.f) acc.row(0) += fr.colwise().sum();
    return acc / static_cast<S>(x.frames() * x.nodes());
  }
  FeatureSeq<S> backward(const Mat<S>& g) {
    const auto [t, n] = detail::pop(stack_, "global pool");
    FeatureSeq<S> gx;
    const Mat<S> per = Mat<S>::Ones(n, 1) * (g / static_cast<S>(t * n));
    gx.f.assign(static_cast<std::size_t>(t), per);
    return gx;
  }

  void clear_cache() { stack_.clear(); }

private:
  struct Dims {
    int t, n;
  };
  std::vector<Dims> stack_;
};

// Mean over frames only -> N x C (the pose encoders end with this).
template <typename S>
class FrameMeanPool {
public:
  Mat<S> forward(const FeatureSeq<S>& x) {
    stack_.push_back(x.frames());
    Mat<S> acc = Mat<S>::Zero(x.nodes(), x.channels());
    for (const auto& fr : x.f) acc += fr;
    return acc / static_cast<S>(x.frames());
  }
  FeatureSeq<S> backward(const Mat<S>& g) {
    const int t = detail::pop(stack_, "frame mean pool");
    FeatureSeq<S> gx;
    gx.f.assign(static_cast<std::size_t>(t), g / static_cast<S>(t));
    return gx;
  }

  void clear_cache() { stack_.clear(); }

private:
  std::vector<int> stack_;
};

// ------------------------------------------------------------------- Adam

template <typename S>
class Adam {
public:
  Adam(ParamList<S> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Mat<S>& g = *params_[i].grad;
      m_[i] = static_cast<S>(b1_) * m_[i] + static_cast<S>(1.0 - b1_) * g;
      v_[i] = (static_cast<S>(b2_) * v_[i].array() +
               static_cast<S>(1.0 - b2_) * g.array().square())
                  .matrix();
      const auto mhat = m_[i].array() / static_cast<S>(bc1);
      const auto vhat = v_[i].array() / static_cast<S>(bc2);
      params_[i].value->array() -=
          static_cast<S>(lr_) * mhat / (vhat.sqrt() + static_cast<S>(eps_));
    }
  }

  void zero_grads() { gaitview::zero_grads(params_); }
  const ParamList<S>& params() const { return params_; }

private:
  ParamList<S> params_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

}  // namespace gaitview

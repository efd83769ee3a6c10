#pragma once

#include <array>
#include <string>
#include <vector>

#include "gaitview/blocks.hpp"
#include "gaitview/camera.hpp"
#include "gaitview/dataset.hpp"

namespace gaitview {

// Cross-view pose generation: a generator that encodes the source sequence
// (GCN stack) and target view (FC stack), forms a pairwise interaction map,
// and emits a lower and an upper triangular 3x3 factor through two
// parameter-independent CNN branches. Their product is full rank by
// construction: triangular structure is masked in, diagonals are clamped
// away from zero, so |det Q| >= delta^6 for any parameters. A conditional
// discriminator scores sequences against the (source pose, target view)
// condition.

struct GeneratorConfig {
  int width_div = 1;        // scales the published schedules; ratios fixed
  double diag_floor = 1e-3; // delta
  double init_scale = 0.1;  // raw head output is scaled onto the identity
  bool qgan_mode = false;   // single head emits Q directly (ablation)
  int input_channels = 3;
  int temporal_kernel = 9;

  int gcn_out() const { return std::max(1, 128 / width_div); }
  int fc_hidden() const { return std::max(1, 64 / width_div); }
  int fc_out() const { return std::max(1, 128 / width_div); }
  int map_channels() const { return std::max(1, 64 / width_div); }
  std::vector<int> cnn_channels() const {
    return {std::max(1, 128 / width_div), std::max(1, 256 / width_div),
            std::max(1, 512 / width_div)};
  }

  void validate() const {
    if (diag_floor <= 0.0) throw ConfigError("lugan: diag_floor must be > 0");
    if (init_scale <= 0.0) throw ConfigError("lugan: init_scale must be > 0");
    if (width_div < 1) throw ConfigError("lugan: width_div must be >= 1");
  }
};

// Dataset-level coordinate statistics: one fixed affine shared by every
// sequence, so position and scale differences stay visible to the encoders
// and the discriminator (a per-sequence standardization would hide exactly
// what the transform must learn).
struct CoordStats {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double scale = 1.0;

  static CoordStats from_records(const std::vector<GaitSample>& records) {
    double sx = 0, sy = 0, sxx = 0, syy = 0;
    long n = 0;
    for (const auto& r : records)
      for (const auto& fr : r.sequence.coords) {
        sx += fr.col(0).sum();
        sy += fr.col(1).sum();
        sxx += fr.col(0).squaredNorm();
        syy += fr.col(1).squaredNorm();
        n += fr.rows();
      }
    if (n == 0) throw DataError("coord stats: empty dataset");
    CoordStats s;
    s.mean_x = sx / n;
    s.mean_y = sy / n;
    const double var =
        (sxx / n - s.mean_x * s.mean_x + syy / n - s.mean_y * s.mean_y) / 2.0;
    s.scale = std::sqrt(std::max(var, 1e-12));
    return s;
  }
};

// Raw homogeneous coordinates of a sequence as (x, y, 1) features.
template <typename S>
FeatureSeq<S> pose_coords(const PoseSequence& seq) {
  FeatureSeq<S> out;
  out.f.reserve(seq.coords.size());
  for (const auto& fr : seq.coords) out.f.push_back(fr.template cast<S>());
  return out;
}

// Encoder/discriminator input features: fixed-standardized (x, y) plus the
// confidence channel.
template <typename S>
FeatureSeq<S> standardize_coords(const FeatureSeq<S>& coords,
                                 const Eigen::MatrixXd& confidence,
                                 const CoordStats& st) {
  FeatureSeq<S> out;
  out.f.reserve(coords.f.size());
  for (int t = 0; t < coords.frames(); ++t) {
    const auto& fr = coords.f[static_cast<std::size_t>(t)];
    Mat<S> m(fr.rows(), 3);
    for (Eigen::Index i = 0; i < fr.rows(); ++i) {
      m(i, 0) = static_cast<S>((fr(i, 0) - st.mean_x) / st.scale);
      m(i, 1) = static_cast<S>((fr(i, 1) - st.mean_y) / st.scale);
      m(i, 2) = static_cast<S>(confidence(t, i));
    }
    out.f.push_back(std::move(m));
  }
  return out;
}

// Gradient w.r.t. raw coords given the gradient w.r.t. standardized (x, y).
template <typename S>
FeatureSeq<S> standardize_coords_backward(const FeatureSeq<S>& gfeat,
                                          const CoordStats& st) {
  FeatureSeq<S> g;
  g.f.reserve(gfeat.f.size());
  for (const auto& fr : gfeat.f) {
    Mat<S> m = Mat<S>::Zero(fr.rows(), 3);
    m.col(0) = fr.col(0) / static_cast<S>(st.scale);
    m.col(1) = fr.col(1) / static_cast<S>(st.scale);
    g.f.push_back(std::move(m));
  }
  return g;
}

// Apply a 3x3 transform to (x, y, 1) coords and renormalize; keeps w == 1.
template <typename S>
FeatureSeq<S> apply_q(const Mat<S>& q, const FeatureSeq<S>& coords,
                      double w_min = kHomogeneousWMin) {
  FeatureSeq<S> out;
  out.f.reserve(coords.f.size());
  for (int t = 0; t < coords.frames(); ++t) {
    const Mat<S> u = coords.f[static_cast<std::size_t>(t)] * q.transpose();
    Mat<S> m(u.rows(), 3);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const S w = u(i, 2);
      if (std::abs(static_cast<double>(w)) <= w_min)
        throw DegenerateDepthError(t, static_cast<long>(i),
                                   static_cast<double>(w));
      m(i, 0) = u(i, 0) / w;
      m(i, 1) = u(i, 1) / w;
      m(i, 2) = S(1);
    }
    out.f.push_back(std::move(m));
  }
  return out;
}

// Backward of apply_q into the transform: gout carries gradients w.r.t.
// the normalized (x, y) outputs.
template <typename S>
Mat<S> apply_q_backward(const Mat<S>& q, const FeatureSeq<S>& coords,
                        const FeatureSeq<S>& gout) {
  Mat<S> gq = Mat<S>::Zero(3, 3);
  for (int t = 0; t < coords.frames(); ++t) {
    const auto& p = coords.f[static_cast<std::size_t>(t)];
    const Mat<S> u = p * q.transpose();
    const auto& g = gout.f[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const S w = u(i, 2);
      const S gx = g(i, 0), gy = g(i, 1);
      gq.row(0) += (gx / w) * p.row(i);
      gq.row(1) += (gy / w) * p.row(i);
      gq.row(2) -= ((gx * u(i, 0) + gy * u(i, 1)) / (w * w)) * p.row(i);
    }
  }
  return gq;
}

// ------------------------------------------------------------ sub-encoders

// Seven GCN blocks (no temporal downsampling) then a mean over frames.
template <typename S>
class PoseEncoder {
public:
  PoseEncoder() = default;
  PoseEncoder(const GeneratorConfig& cfg, const Eigen::MatrixXd& adjacency,
              Rng rng) {
    const auto specs = encoder_block_specs(cfg.input_channels, cfg.width_div,
                                           cfg.temporal_kernel);
    for (std::size_t i = 0; i < specs.size(); ++i)
      blocks_.emplace_back(specs[i], std::vector<Eigen::MatrixXd>{adjacency},
                           HgcAggregate::sum,
                           rng.split(static_cast<std::uint64_t>(i)));
  }

  Mat<S> forward(const FeatureSeq<S>& x) {
    FeatureSeq<S> h = x;
    for (auto& b : blocks_) h = b.forward(h);
    return pool_.forward(h);
  }

  FeatureSeq<S> backward(const Mat<S>& g) {
    FeatureSeq<S> gh = pool_.backward(g);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
      gh = it->backward(gh);
    return gh;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".b" + std::to_string(i + 1), out);
  }

  void clear_cache() {
    for (auto& b : blocks_) b.clear_cache();
    pool_.clear_cache();
  }

private:
  std::vector<Block<S>> blocks_;
  FrameMeanPool<S> pool_;
};

// (sin b, cos b) -> FC -> ReLU -> FC; periodic in the angle by
// construction.
template <typename S>
class ViewEncoder {
public:
  ViewEncoder() = default;
  ViewEncoder(const GeneratorConfig& cfg, Rng rng)
      : fc1_(2, cfg.fc_hidden(), rng.split("fc1")),
        fc2_(cfg.fc_hidden(), cfg.fc_out(), rng.split("fc2")) {}

  Mat<S> forward(double beta_degrees) {
    const double b = beta_degrees * M_PI / 180.0;
    Mat<S> in(1, 2);
    in << static_cast<S>(std::sin(b)), static_cast<S>(std::cos(b));
    Mat<S> h = fc1_.forward(in);
    pre_.push_back(h);
    h = h.cwiseMax(S(0));
    return fc2_.forward(h);
  }

  void backward(const Mat<S>& g) {
    Mat<S> gh = fc2_.backward(g);
    const Mat<S> pre = detail::pop(pre_, "view encoder");
    gh = (pre.array() > S(0)).select(gh, Mat<S>::Zero(gh.rows(), gh.cols()));
    fc1_.backward(gh);
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    fc1_.collect(prefix + ".fc1", out);
    fc2_.collect(prefix + ".fc2", out);
  }

  void clear_cache() {
    fc1_.clear_cache();
    fc2_.clear_cache();
    pre_.clear();
  }

private:
  Linear<S> fc1_, fc2_;
  std::vector<Mat<S>> pre_;
};

// Pairwise interaction map over stacked node features F (2N x C):
// channel c at (i, j) = w1_c . F_i + w2_c . F_j + b_c, giving M x 2N x 2N.
template <typename S>
class PairMap {
public:
  PairMap() = default;
  PairMap(int in_channels, int map_channels, Rng rng)
      : c_(in_channels), m_(map_channels) {
    w1_ = Mat<S>::Zero(in_channels, map_channels);
    w2_ = Mat<S>::Zero(in_channels, map_channels);
    detail::he_uniform(w1_, 2 * in_channels, map_channels, rng.split("w1"));
    detail::he_uniform(w2_, 2 * in_channels, map_channels, rng.split("w2"));
    gw1_ = Mat<S>::Zero(in_channels, map_channels);
    gw2_ = Mat<S>::Zero(in_channels, map_channels);
    b_ = Mat<S>::Zero(1, map_channels);
    gb_ = Mat<S>::Zero(1, map_channels);
  }

  Image<S> forward(const Mat<S>& f) {
    stack_.push_back(f);
    const Mat<S> u = f * w1_;  // 2N x M
    const Mat<S> v = f * w2_;
    const int n2 = static_cast<int>(f.rows());
    Image<S> map = Image<S>::zeros(m_, n2, n2);
    for (int c = 0; c < m_; ++c) {
      map.ch[static_cast<std::size_t>(c)] =
          u.col(c) * Mat<S>::Ones(1, n2) + Mat<S>::Ones(n2, 1) * v.col(c).transpose();
      map.ch[static_cast<std::size_t>(c)].array() += b_(0, c);
    }
    return map;
  }

  Mat<S> backward(const Image<S>& gmap) {
    const Mat<S> f = detail::pop(stack_, "pair map");
    const int n2 = static_cast<int>(f.rows());
    Mat<S> gu(n2, m_), gv(n2, m_);
    for (int c = 0; c < m_; ++c) {
      gu.col(c) = gmap.ch[static_cast<std::size_t>(c)].rowwise().sum();
      gv.col(c) = gmap.ch[static_cast<std::size_t>(c)].colwise().sum().transpose();
      gb_(0, c) += gmap.ch[static_cast<std::size_t>(c)].sum();
    }
    gw1_.noalias() += f.transpose() * gu;
    gw2_.noalias() += f.transpose() * gv;
    return gu * w1_.transpose() + gv * w2_.transpose();
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    out.push_back({prefix + ".w1", &w1_, &gw1_});
    out.push_back({prefix + ".w2", &w2_, &gw2_});
    out.push_back({prefix + ".b", &b_, &gb_});
  }

  // symmetric pair weights => transposed map under (i, j) swap
  void tie_symmetric() { w2_ = w1_; }

  void clear_cache() { stack_.clear(); }

private:
  int c_ = 0, m_ = 0;
  Mat<S> w1_, w2_, gw1_, gw2_, b_, gb_;
  std::vector<Mat<S>> stack_;
};

// CNN stack: three stride-2 convolutions down the published channel
// schedule, adaptive reduction to 3x3, then 1x1 to a single plane.
template <typename S>
class CnnHead {
public:
  CnnHead() = default;
  CnnHead(const GeneratorConfig& cfg, Rng rng) : pool_(3, 3) {
    const auto ch = cfg.cnn_channels();
    int in = cfg.map_channels();
    for (std::size_t i = 0; i < ch.size(); ++i) {
      convs_.emplace_back(in, ch[i], 3, 2, 1, true,
                          rng.split(static_cast<std::uint64_t>(i)));
      in = ch[i];
    }
    final_ = Conv2d<S>(in, 1, 1, 1, 0, false, rng.split("final"));
  }

  Mat<S> forward(const Image<S>& map) {
    Image<S> h = map;
    for (auto& c : convs_) h = c.forward(h);
    h = pool_.forward(h);
    h = final_.forward(h);
    return h.ch[0];  // 3x3
  }

  Image<S> backward(const Mat<S>& g) {
    Image<S> gh;
    gh.ch = {g};
    gh = final_.backward(gh);
    gh = pool_.backward(gh);
    for (auto it = convs_.rbegin(); it != convs_.rend(); ++it)
      gh = it->backward(gh);
    return gh;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t i = 0; i < convs_.size(); ++i)
      convs_[i].collect(prefix + ".conv" + std::to_string(i + 1), out);
    final_.collect(prefix + ".final", out);
  }

  void clear_cache() {
    for (auto& c : convs_) c.clear_cache();
    pool_.clear_cache();
    final_.clear_cache();
  }

private:
  std::vector<Conv2d<S>> convs_;
  AdaptiveAvgPool2d<S> pool_;
  Conv2d<S> final_;
};

// --------------------------------------------------------------- generator

template <typename S>
struct GeneratedTransform {
  Mat<S> lower;  // 3x3, exactly zero above the diagonal
  Mat<S> upper;  // 3x3, exactly zero below it
  Mat<S> q;      // lower * upper (or the direct head in qgan mode)
};

template <typename S>
class LuganGenerator {
public:
  LuganGenerator() = default;
  LuganGenerator(const GeneratorConfig& cfg, const Eigen::MatrixXd& adjacency,
                 Rng rng)
      : cfg_(cfg),
        enc_(cfg, adjacency, rng.split("enc")),
        venc_(cfg, rng.split("view")),
        pair_(cfg.gcn_out(), cfg.map_channels(), rng.split("pair")),
        head_l_(cfg, rng.split("headL")),
        head_u_(cfg, rng.split("headU")) {
    cfg.validate();
  }

  const GeneratorConfig& config() const { return cfg_; }

  // x: standardized input features; beta: target view in degrees.
  GeneratedTransform<S> forward(const FeatureSeq<S>& x, double beta_degrees) {
    const Mat<S> pose_feat = enc_.forward(x);          // N x C
    const Mat<S> view_feat = venc_.forward(beta_degrees);  // 1 x C
    const int n = static_cast<int>(pose_feat.rows());
    Mat<S> f(2 * n, pose_feat.cols());
    f.topRows(n) = pose_feat;
    f.bottomRows(n) = Mat<S>::Ones(n, 1) * view_feat;
    const Image<S> map = pair_.forward(f);

    GeneratedTransform<S> out;
    Cache cache;
    cache.n = n;
    const S s = static_cast<S>(cfg_.init_scale);
    if (cfg_.qgan_mode) {
      cache.raw_l = head_l_.forward(map);
      out.q = Mat<S>::Identity(3, 3) + s * cache.raw_l;
      out.lower = out.upper = Mat<S>::Identity(3, 3);
    } else {
      cache.raw_l = head_l_.forward(map);
      cache.raw_u = head_u_.forward(map);
      Mat<S> lower = Mat<S>::Identity(3, 3);
      Mat<S> upper = Mat<S>::Identity(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          if (j <= i) lower(i, j) += s * cache.raw_l(i, j);
          if (j >= i) upper(i, j) += s * cache.raw_u(i, j);
        }
      clamp_diag(lower, cache.lower_clamped);
      clamp_diag(upper, cache.upper_clamped);
      out.lower = lower;
      out.upper = upper;
      out.q = lower * upper;
      cache.lower = lower;
      cache.upper = upper;
    }
    stack_.push_back(std::move(cache));
    return out;
  }

  // gq: gradient w.r.t. the emitted q. Returns the gradient w.r.t. the
  // standardized input features.
  FeatureSeq<S> backward(const Mat<S>& gq) {
    const Cache cache = detail::pop(stack_, "generator");
    const S s = static_cast<S>(cfg_.init_scale);
    Mat<S> gmap3_l = Mat<S>::Zero(3, 3);
    Mat<S> gmap3_u = Mat<S>::Zero(3, 3);
    if (cfg_.qgan_mode) {
      gmap3_l = s * gq;
    } else {
      Mat<S> glower = gq * cache.upper.transpose();
      Mat<S> gupper = cache.lower.transpose() * gq;
      for (int i = 0; i < 3; ++i) {
        if (cache.lower_clamped[static_cast<std::size_t>(i)]) glower(i, i) = S(0);
        if (cache.upper_clamped[static_cast<std::size_t>(i)]) gupper(i, i) = S(0);
      }
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          if (j <= i) gmap3_l(i, j) = s * glower(i, j);
          if (j >= i) gmap3_u(i, j) = s * gupper(i, j);
        }
    }
    Image<S> gmap = head_l_.backward(gmap3_l);
    if (!cfg_.qgan_mode) {
      const Image<S> gmap_u = head_u_.backward(gmap3_u);
      for (int c = 0; c < gmap.channels(); ++c)
        gmap.ch[static_cast<std::size_t>(c)] +=
            gmap_u.ch[static_cast<std::size_t>(c)];
    }
    const Mat<S> gf = pair_.backward(gmap);
    const int n = cache.n;
    venc_.backward(gf.bottomRows(n).colwise().sum());
    return enc_.backward(gf.topRows(n));
  }

  void collect(ParamList<S>& out) {
    enc_.collect("g.enc", out);
    venc_.collect("g.view", out);
    pair_.collect("g.pair", out);
    head_l_.collect(cfg_.qgan_mode ? "g.headQ" : "g.headL", out);
    if (!cfg_.qgan_mode) head_u_.collect("g.headU", out);
  }

  ParamList<S> params() {
    ParamList<S> out;
    collect(out);
    return out;
  }

  void clear_cache() {
    stack_.clear();
    enc_.clear_cache();
    venc_.clear_cache();
    pair_.clear_cache();
    head_l_.clear_cache();
    head_u_.clear_cache();
  }

private:
  struct Cache {
    int n = 0;
    Mat<S> raw_l, raw_u, lower, upper;
    std::array<bool, 3> lower_clamped{false, false, false};
    std::array<bool, 3> upper_clamped{false, false, false};
  };

  void clamp_diag(Mat<S>& m, std::array<bool, 3>& clamped) const {
    const S floor = static_cast<S>(cfg_.diag_floor);
    for (int i = 0; i < 3; ++i) {
      const S d = m(i, i);
      const S sign = d < S(0) ? S(-1) : S(1);  // sign(0) = +1
      if (std::abs(static_cast<double>(d)) < static_cast<double>(floor)) {
        m(i, i) = sign * floor;
        clamped[static_cast<std::size_t>(i)] = true;
      }
    }
  }

  GeneratorConfig cfg_;
  PoseEncoder<S> enc_;
  ViewEncoder<S> venc_;
  PairMap<S> pair_;
  CnnHead<S> head_l_, head_u_;
  std::vector<Cache> stack_;
};

// Compose the spec-level ViewTransform (float64 oracle type) from learned
// triangular factors: q = lower * upper, |det q| >= delta^6.
template <typename S>
inline ViewTransform compose_full_rank(const GeneratedTransform<S>& f) {
  ViewTransform vt;
  vt.lower = f.lower.template cast<double>();
  vt.upper = f.upper.template cast<double>();
  vt.q = vt.lower * vt.upper;
  vt.has_factors = true;
  vt.residual = 0.0;
  vt.validate();
  return vt;
}

// qgan-mode transforms carry no factors (and no determinant bound).
template <typename S>
inline ViewTransform transform_from_q(const Mat<S>& q) {
  ViewTransform vt;
  vt.q = q.template cast<double>();
  vt.has_factors = false;
  vt.residual = 0.0;
  vt.validate();
  return vt;
}

// ----------------------------------------------------------- discriminator

template <typename S>
class LuganDiscriminator {
public:
  LuganDiscriminator() = default;
  LuganDiscriminator(const GeneratorConfig& cfg,
                     const Eigen::MatrixXd& adjacency, Rng rng)
      : cfg_(cfg),
        enc_input_(cfg, adjacency, rng.split("enc_in")),
        enc_cond_(cfg, adjacency, rng.split("enc_cond")),
        venc_(cfg, rng.split("view")),
        pair_(cfg.gcn_out(), cfg.map_channels(), rng.split("pair")),
        head_(cfg, rng.split("head")) {}

  // Scores the input sequence against the (condition pose, target view)
  // condition; squashed to (0, 1).
  S forward(const FeatureSeq<S>& x, const FeatureSeq<S>& cond,
            double beta_degrees) {
    const Mat<S> fx = enc_input_.forward(x);
    const Mat<S> fc = enc_cond_.forward(cond);
    const Mat<S> fv = venc_.forward(beta_degrees);
    const int n = static_cast<int>(fx.rows());
    Mat<S> f(2 * n, fx.cols());
    f.topRows(n) = fx;
    f.bottomRows(n) = fc + Mat<S>::Ones(n, 1) * fv;
    const Mat<S> logits3 = head_.forward(pair_.forward(f));
    const S logit = logits3.mean();
    const S score = S(1) / (S(1) + std::exp(-logit));
    Cache cache;
    cache.n = n;
    cache.score = score;
    stack_.push_back(cache);
    return score;
  }

  // gscore: dL/dscore. Returns the gradient w.r.t. the INPUT sequence
  // features (the generator trains through this); condition gradients stop
  // at the condition encoders' parameters.
  FeatureSeq<S> backward(S gscore) {
    const Cache cache = detail::pop(stack_, "discriminator");
    const S glogit = gscore * cache.score * (S(1) - cache.score);
    const Mat<S> g3 = Mat<S>::Constant(3, 3, glogit / S(9));
    const Mat<S> gf = pair_.backward(head_.backward(g3));
    const int n = cache.n;
    venc_.backward(gf.bottomRows(n).colwise().sum());
    enc_cond_.backward(gf.bottomRows(n));
    return enc_input_.backward(gf.topRows(n));
  }

  void collect(ParamList<S>& out) {
    enc_input_.collect("d.enc_in", out);
    enc_cond_.collect("d.enc_cond", out);
    venc_.collect("d.view", out);
    pair_.collect("d.pair", out);
    head_.collect("d.head", out);
  }

  ParamList<S> params() {
    ParamList<S> out;
    collect(out);
    return out;
  }

  void clear_cache() {
    stack_.clear();
    enc_input_.clear_cache();
    enc_cond_.clear_cache();
    venc_.clear_cache();
    pair_.clear_cache();
    head_.clear_cache();
  }

private:
  struct Cache {
    int n = 0;
    S score = S(0);
  };
  GeneratorConfig cfg_;
  PoseEncoder<S> enc_input_, enc_cond_;
  ViewEncoder<S> venc_;
  PairMap<S> pair_;
  CnnHead<S> head_;
  std::vector<Cache> stack_;
};

}  // namespace gaitview

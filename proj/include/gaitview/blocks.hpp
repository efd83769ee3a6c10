#pragma once

#include <optional>

#include "gaitview/hgc.hpp"
#include "gaitview/nn.hpp"

namespace gaitview {

// One backbone block: spatial HGC over joints followed by a temporal
// convolution per joint, with an optional residual shortcut (projected by
// a kernel-1 temporal conv when channels or stride change).

enum class BlockKind { basic, residual };

struct BlockSpec {
  BlockKind kind = BlockKind::basic;
  int in_channels = 0;
  int out_channels = 0;
  int temporal_stride = 1;
  int temporal_kernel = 9;

  void validate() const {
    if (in_channels < 1 || out_channels < 1)
      throw ContractError("block spec: channels must be positive");
    if (temporal_stride != 1 && temporal_stride != 2)
      throw ContractError("block spec: stride must be 1 or 2");
    if (temporal_kernel % 2 != 1)
      throw ContractError("block spec: temporal kernel must be odd");
  }
};

template <typename S>
class Block {
public:
  Block() = default;
  Block(const BlockSpec& spec, const std::vector<Eigen::MatrixXd>& adjacencies,
        HgcAggregate agg, Rng rng)
      : spec_(spec) {
    spec.validate();
    hgc_ = HgcLayer<S>(adjacencies, spec.in_channels, spec.out_channels, agg,
                       rng.split("hgc"));
    tconv_ = TemporalConv<S>(spec.out_channels, spec.out_channels,
                             spec.temporal_kernel, spec.temporal_stride,
                             rng.split("tconv"));
    const bool needs_projection =
        spec.in_channels != spec.out_channels || spec.temporal_stride != 1;
    if (spec.kind == BlockKind::residual && needs_projection)
      shortcut_.emplace(spec.in_channels, spec.out_channels, 1,
                        spec.temporal_stride, rng.split("shortcut"));
  }

  FeatureSeq<S> forward(const FeatureSeq<S>& x) {
    FeatureSeq<S> z = tconv_.forward(hgc_.forward(x));
    if (spec_.kind == BlockKind::residual) {
      if (shortcut_) {
        const FeatureSeq<S> r = shortcut_->forward(x);
        for (int t = 0; t < z.frames(); ++t)
          z.f[static_cast<std::size_t>(t)] += r.f[static_cast<std::size_t>(t)];
      } else {
        for (int t = 0; t < z.frames(); ++t)
          z.f[static_cast<std::size_t>(t)] += x.f[static_cast<std::size_t>(t)];
      }
    }
    stack_.push_back(z);
    for (auto& fr : z.f) fr = fr.cwiseMax(S(0));
    return z;
  }

  FeatureSeq<S> backward(const FeatureSeq<S>& gy) {
    const FeatureSeq<S> pre = detail::pop(stack_, "block");
    FeatureSeq<S> gz = gy;
    for (int t = 0; t < gz.frames(); ++t) {
      const auto& p = pre.f[static_cast<std::size_t>(t)];
      gz.f[static_cast<std::size_t>(t)] =
          (p.array() > S(0))
              .select(gz.f[static_cast<std::size_t>(t)],
                      Mat<S>::Zero(p.rows(), p.cols()));
    }
    // shortcut backward first: sublayer stacks are LIFO
    FeatureSeq<S> gshort;
    const bool residual = spec_.kind == BlockKind::residual;
    if (residual && shortcut_) gshort = shortcut_->backward(gz);
    FeatureSeq<S> gx = hgc_.backward(tconv_.backward(gz));
    if (residual) {
      const FeatureSeq<S>& add = shortcut_ ? gshort : gz;
      for (int t = 0; t < gx.frames(); ++t)
        gx.f[static_cast<std::size_t>(t)] += add.f[static_cast<std::size_t>(t)];
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    hgc_.collect(prefix + ".hgc", out);
    tconv_.collect(prefix + ".tconv", out);
    if (shortcut_) shortcut_->collect(prefix + ".shortcut", out);
  }

  const BlockSpec& spec() const { return spec_; }

  void clear_cache() {
    stack_.clear();
    hgc_.clear_cache();
    tconv_.clear_cache();
    if (shortcut_) shortcut_->clear_cache();
  }

private:
  BlockSpec spec_;
  HgcLayer<S> hgc_;
  TemporalConv<S> tconv_;
  std::optional<TemporalConv<S>> shortcut_;
  std::vector<FeatureSeq<S>> stack_;
};

// Recognition backbone schedule: channels 64,64,32,128,128,256,256 with T
// halved at blocks 4 and 6. `width_div` scales every width down while the
// ratios stay fixed (desk-scale runs).
inline std::vector<BlockSpec> backbone_block_specs(int input_channels,
                                                   int width_div = 1,
                                                   int temporal_kernel = 9) {
  const int base[7] = {64, 64, 32, 128, 128, 256, 256};
  std::vector<BlockSpec> specs;
  int in = input_channels;
  for (int i = 0; i < 7; ++i) {
    BlockSpec s;
    s.kind = (i == 0) ? BlockKind::basic : BlockKind::residual;
    s.in_channels = in;
    s.out_channels = std::max(1, base[i] / width_div);
    s.temporal_stride = (i == 3 || i == 5) ? 2 : 1;
    s.temporal_kernel = temporal_kernel;
    specs.push_back(s);
    in = s.out_channels;
  }
  return specs;
}

// Pose-encoder schedule used inside the transform generator (no temporal
// downsampling): channels 32,32,64,64,64,128,128.
inline std::vector<BlockSpec> encoder_block_specs(int input_channels,
                                                  int width_div = 1,
                                                  int temporal_kernel = 9) {
  const int base[7] = {32, 32, 64, 64, 64, 128, 128};
  std::vector<BlockSpec> specs;
  int in = input_channels;
  for (int i = 0; i < 7; ++i) {
    BlockSpec s;
    s.kind = (i == 0) ? BlockKind::basic : BlockKind::residual;
    s.in_channels = in;
    s.out_channels = std::max(1, base[i] / width_div);
    s.temporal_stride = 1;
    s.temporal_kernel = temporal_kernel;
    specs.push_back(s);
    in = s.out_channels;
  }
  return specs;
}

}  // namespace gaitview

#pragma once

#include <string>
#include <vector>

#include "gaitview/blocks.hpp"
#include "gaitview/losses.hpp"
#include "gaitview/skeleton.hpp"

namespace gaitview {

// Two-branch gait recognizer: a source branch over the input sequence and
// a multi-head generative branch over the per-view generated sequences,
// features averaged across views, pooled, and concatenated into the final
// embedding.

// Model input features: (x, y) standardized per sequence (zero mean per
// channel, one pooled scale so aspect survives) plus the raw confidence
// channel. Standardization happens here, after any view generation, so
// source and generated sequences are treated identically.
template <typename S>
FeatureSeq<S> pose_to_features(const PoseSequence& seq) {
  const int t = seq.frames(), n = seq.joints();
  double sx = 0, sy = 0;
  for (const auto& fr : seq.coords) {
    sx += fr.col(0).sum();
    sy += fr.col(1).sum();
  }
  const double mx = sx / (t * n), my = sy / (t * n);
  double var = 0;
  for (const auto& fr : seq.coords)
    var += (fr.col(0).array() - mx).square().sum() +
           (fr.col(1).array() - my).square().sum();
  const double scale = std::sqrt(std::max(var / (2.0 * t * n), 1e-12));
  FeatureSeq<S> x;
  x.f.reserve(static_cast<std::size_t>(t));
  for (int ti = 0; ti < t; ++ti) {
    const auto& fr = seq.coords[static_cast<std::size_t>(ti)];
    Mat<S> m(n, 3);
    for (int i = 0; i < n; ++i) {
      m(i, 0) = static_cast<S>((fr(i, 0) - mx) / scale);
      m(i, 1) = static_cast<S>((fr(i, 1) - my) / scale);
      m(i, 2) = static_cast<S>(seq.confidence(ti, i));
    }
    x.f.push_back(std::move(m));
  }
  return x;
}

struct RecognizerConfig {
  std::vector<double> view_list;  // generative-head target views (yaw deg)
  int shared_blocks = 4;          // 0..6 trailing blocks shared across heads
  int sequence_length = 60;
  double tau = 0.07;
  int input_channels = 3;
  int width_div = 1;              // divide every published width; ratios fixed
  int temporal_kernel = 9;
  HgcAggregate aggregate = HgcAggregate::sum;
  bool use_generative_branch = true;
  std::string final_dim = "concat";  // concat | project256

  int embedding_dim_per_branch() const { return std::max(1, 256 / width_div); }

  void validate() const {
    if (shared_blocks < 0 || shared_blocks > 6)
      throw ConfigError("recognizer: shared_blocks must be in [0, 6]");
    if (sequence_length % 4 != 0)
      throw ConfigError("recognizer: sequence length must be divisible by 4");
    if (tau <= 0.0) throw ConfigError("recognizer: tau must be positive");
    if (use_generative_branch && view_list.empty())
      throw ConfigError("recognizer: generative branch needs a view list");
    if (final_dim != "concat" && final_dim != "project256")
      throw ConfigError("recognizer: final_dim must be concat|project256");
  }
};

// One stack of the seven backbone blocks ending in global average pooling.
template <typename S>
class BackboneBranch {
public:
  BackboneBranch() = default;
  BackboneBranch(const std::vector<BlockSpec>& specs,
                 const std::vector<Eigen::MatrixXd>& adjacencies,
                 HgcAggregate agg, Rng rng) {
    for (std::size_t i = 0; i < specs.size(); ++i)
      blocks_.emplace_back(specs[i], adjacencies, agg,
                           rng.split(static_cast<std::uint64_t>(i)));
  }

  FeatureSeq<S> forward_blocks(const FeatureSeq<S>& x) {
    FeatureSeq<S> h = x;
    for (auto& b : blocks_) h = b.forward(h);
    return h;
  }
  FeatureSeq<S> backward_blocks(const FeatureSeq<S>& g) {
    FeatureSeq<S> gh = g;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
      gh = it->backward(gh);
    return gh;
  }

  Mat<S> forward(const FeatureSeq<S>& x) { return pool_.forward(forward_blocks(x)); }
  FeatureSeq<S> backward(const Mat<S>& g) {
    return backward_blocks(pool_.backward(g));
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(prefix + ".b" + std::to_string(i + 1), out);
  }

  std::vector<Block<S>>& blocks() { return blocks_; }

  void clear_cache() {
    for (auto& b : blocks_) b.clear_cache();
    pool_.clear_cache();
  }

private:
  std::vector<Block<S>> blocks_;
  GlobalAvgPool<S> pool_;
};

// Multi-head generative branch: per-view heads own the first
// (7 - shared_blocks) blocks, the trailing blocks share weights, per-view
// features are averaged and pooled.
template <typename S>
class GenerativeBranch {
public:
  GenerativeBranch() = default;
  GenerativeBranch(const RecognizerConfig& cfg,
                   const std::vector<BlockSpec>& specs,
                   const std::vector<Eigen::MatrixXd>& adjacencies, Rng rng)
      : view_list_(cfg.view_list) {
    const std::size_t head_len =
        specs.size() - static_cast<std::size_t>(cfg.shared_blocks);
    for (std::size_t v = 0; v < view_list_.size(); ++v) {
      heads_.emplace_back();
      for (std::size_t i = 0; i < head_len; ++i)
        heads_.back().emplace_back(
            specs[i], adjacencies, cfg.aggregate,
            rng.split("head").split(v).split(i));
    }
    for (std::size_t i = head_len; i < specs.size(); ++i)
      shared_.emplace_back(specs[i], adjacencies, cfg.aggregate,
                           rng.split("shared").split(i));
  }

  int view_index(double yaw) const {
    for (std::size_t i = 0; i < view_list_.size(); ++i)
      if (std::abs(view_list_[i] - yaw) < 1e-9) return static_cast<int>(i);
    throw ContractError("generative branch: view " + fmt_double(yaw) +
                        " is not configured");
  }

  // One (view, sequence) pair per generated view; any configured subset.
  Mat<S> forward(const std::vector<std::pair<int, FeatureSeq<S>>>& inputs) {
    if (inputs.empty())
      throw ContractError("generative branch: no generated views given");
    order_.push_back({});
    auto& order = order_.back();
    FeatureSeq<S> avg;
    for (const auto& [view, x] : inputs) {
      if (view < 0 || view >= static_cast<int>(view_list_.size()))
        throw ContractError("generative branch: view index out of range");
      order.push_back(view);
      FeatureSeq<S> h = x;
      for (auto& b : heads_[static_cast<std::size_t>(view)]) h = b.forward(h);
      for (auto& b : shared_) h = b.forward(h);
      if (avg.f.empty()) {
        avg = h;
      } else {
        for (int t = 0; t < avg.frames(); ++t)
          avg.f[static_cast<std::size_t>(t)] += h.f[static_cast<std::size_t>(t)];
      }
    }
    const S inv = S(1) / static_cast<S>(inputs.size());
    for (auto& fr : avg.f) fr *= inv;
    return pool_.forward(avg);
  }

  // Returns per-view input gradients in the same order as the forward call.
  std::vector<FeatureSeq<S>> backward(const Mat<S>& g) {
    const std::vector<int> order = detail::pop(order_, "generative branch");
    FeatureSeq<S> gavg = pool_.backward(g);
    const S inv = S(1) / static_cast<S>(order.size());
    for (auto& fr : gavg.f) fr *= inv;
    std::vector<FeatureSeq<S>> gx(order.size());
    for (std::size_t i = order.size(); i-- > 0;) {
      FeatureSeq<S> gh = gavg;
      for (auto it = shared_.rbegin(); it != shared_.rend(); ++it)
        gh = it->backward(gh);
      auto& head = heads_[static_cast<std::size_t>(order[i])];
      for (auto it = head.rbegin(); it != head.rend(); ++it)
        gh = it->backward(gh);
      gx[i] = std::move(gh);
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t v = 0; v < heads_.size(); ++v)
      for (std::size_t i = 0; i < heads_[v].size(); ++i)
        heads_[v][i].collect(prefix + ".head" + std::to_string(v) + ".b" +
                                 std::to_string(i + 1),
                             out);
    for (std::size_t i = 0; i < shared_.size(); ++i)
      shared_[i].collect(prefix + ".shared.b" +
                             std::to_string(heads_.empty() ? i : heads_[0].size() + i + 1),
                         out);
  }

  const std::vector<double>& views() const { return view_list_; }

  void clear_cache() {
    for (auto& head : heads_)
      for (auto& b : head) b.clear_cache();
    for (auto& b : shared_) b.clear_cache();
    pool_.clear_cache();
    order_.clear();
  }

private:
  std::vector<double> view_list_;
  std::vector<std::vector<Block<S>>> heads_;
  std::vector<Block<S>> shared_;
  GlobalAvgPool<S> pool_;
  std::vector<std::vector<int>> order_;
};

template <typename S>
class Recognizer {
public:
  Recognizer() = default;
  Recognizer(const RecognizerConfig& cfg,
             const std::vector<Eigen::MatrixXd>& adjacencies, Rng rng)
      : cfg_(cfg) {
    cfg.validate();
    const auto specs = backbone_block_specs(cfg.input_channels, cfg.width_div,
                                            cfg.temporal_kernel);
    source_ = BackboneBranch<S>(specs, adjacencies, cfg.aggregate,
                                rng.split("source"));
    if (cfg.use_generative_branch)
      generative_ = GenerativeBranch<S>(cfg, specs, adjacencies,
                                        rng.split("generative"));
    if (cfg.final_dim == "project256") {
      // fixed seeded semi-orthogonal projection; not trained (the losses
      // act on the per-branch features)
      const int in = cfg.use_generative_branch
                         ? 2 * cfg.embedding_dim_per_branch()
                         : cfg.embedding_dim_per_branch();
      Mat<S> m(in, cfg.embedding_dim_per_branch());
      detail::he_uniform(m, in, cfg.embedding_dim_per_branch(),
                         rng.split("projection"));
      Eigen::HouseholderQR<Mat<S>> qr(m);
      projection_ = Mat<S>(qr.householderQ() *
                           Mat<S>::Identity(in, cfg.embedding_dim_per_branch()));
    }
  }

  const RecognizerConfig& config() const { return cfg_; }

  Mat<S> forward_source(const FeatureSeq<S>& x) { return source_.forward(x); }
  FeatureSeq<S> backward_source(const Mat<S>& g) { return source_.backward(g); }

  Mat<S> forward_generated(const std::vector<std::pair<int, FeatureSeq<S>>>& in) {
    if (!cfg_.use_generative_branch)
      throw ContractError("recognizer: generative branch disabled");
    return generative_.forward(in);
  }
  std::vector<FeatureSeq<S>> backward_generated(const Mat<S>& g) {
    return generative_.backward(g);
  }

  GenerativeBranch<S>& generative() { return generative_; }

  // L2-normalized embedding from raw branch features (inference path).
  Vec<S> embed(const Mat<S>& f_alpha, const Mat<S>* f_beta) const {
    Mat<S> cat;
    if (cfg_.use_generative_branch) {
      if (!f_beta) throw ContractError("embed: missing generative feature");
      cat.resize(1, f_alpha.cols() + f_beta->cols());
      cat << f_alpha, *f_beta;
    } else {
      cat = f_alpha;
    }
    if (cfg_.final_dim == "project256") cat = cat * projection_;
    return l2_normalize_rows(cat).row(0).transpose();
  }

  void collect(ParamList<S>& out) {
    source_.collect("src", out);
    if (cfg_.use_generative_branch) generative_.collect("gen", out);
  }

  ParamList<S> params() {
    ParamList<S> out;
    collect(out);
    return out;
  }

  void clear_cache() {
    source_.clear_cache();
    if (cfg_.use_generative_branch) generative_.clear_cache();
  }

private:
  RecognizerConfig cfg_;
  BackboneBranch<S> source_;
  GenerativeBranch<S> generative_;
  Mat<S> projection_;
};

}  // namespace gaitview

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "gaitview/nn.hpp"
#include "gaitview/skeleton.hpp"

namespace gaitview {

// Multi-order hypergraph convolution: normalized adjacency construction
// D^{-1/2} H B^{-1} H^T D^{-1/2}, per-order propagation with ReLU, and the
// multi-head aggregation. Adjacencies are constants per topology, not
// trainable.

// (D, B) as diagonal vectors: D_ii = row sums of H, B_ee = column sums.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> degree_matrices(
    const HypergraphSpec& h) {
  h.validate();
  Eigen::VectorXd d = h.incidence.rowwise().sum();
  Eigen::VectorXd b = h.incidence.colwise().sum();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) <= 0.0)
      throw IsolatedElementError("node " + std::to_string(i) + " isolated");
  for (Eigen::Index e = 0; e < b.size(); ++e)
    if (b(e) <= 0.0)
      throw IsolatedElementError("hyperedge " + std::to_string(e) + " empty");
  return {d, b};
}

struct NormalizedAdjacency {
  Eigen::MatrixXd matrix;
  int source_order = 0;

  // symmetric PSD with spectrum in [0, 1]; D^{1/2} 1 is the eigenvalue-1
  // eigenvector
  void validate(const Eigen::VectorXd& d) const {
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw NumericError("normalized adjacency not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix);
    const auto& ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-10 || ev.maxCoeff() > 1.0 + 1e-10)
      throw NumericError("normalized adjacency spectrum outside [0,1]");
    const Eigen::VectorXd v = d.array().sqrt().matrix();
    if ((matrix * v - v).cwiseAbs().maxCoeff() > 1e-10)
      throw NumericError("D^{1/2}1 is not an eigenvalue-1 eigenvector");
  }
};

inline NormalizedAdjacency normalized_adjacency(const HypergraphSpec& h) {
  const auto [d, b] = degree_matrices(h);
  const Eigen::VectorXd dis = d.array().rsqrt().matrix();
  const Eigen::VectorXd binv = b.array().inverse().matrix();
  NormalizedAdjacency out;
  out.source_order = h.order;
  out.matrix = dis.asDiagonal() * h.incidence * binv.asDiagonal() *
               h.incidence.transpose() * dis.asDiagonal();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());  // exact symmetry
  out.validate(d);
  return out;
}

enum class HgcAggregate { sum, mean };

// One multi-order HGC layer: X_j = ReLU(A_j X W_j) per frame, heads
// aggregated by sum (the equation form) or mean (config flag).
template <typename S>
class HgcLayer {
public:
  HgcLayer() = default;
  HgcLayer(const std::vector<Eigen::MatrixXd>& adjacencies, int in, int out,
           HgcAggregate agg, Rng rng)
      : agg_(agg) {
    for (const auto& a : adjacencies) adj_.push_back(a.template cast<S>());
    for (std::size_t j = 0; j < adj_.size(); ++j) {
      w_.push_back(Mat<S>::Zero(in, out));
      detail::he_uniform(w_.back(), in, out, rng.split(j));
      gw_.push_back(Mat<S>::Zero(in, out));
    }
  }

  FeatureSeq<S> forward(const FeatureSeq<S>& x) {
    Cache cache;
    cache.x = x;
    const int t = x.frames();
    const std::size_t heads = adj_.size();
    cache.pre.assign(heads, {});
    FeatureSeq<S> y;
    y.f.reserve(static_cast<std::size_t>(t));
    const S scale =
        agg_ == HgcAggregate::mean ? S(1) / static_cast<S>(heads) : S(1);
    for (int ti = 0; ti < t; ++ti) {
      Mat<S> acc;
      for (std::size_t j = 0; j < heads; ++j) {
        Mat<S> z = adj_[j] * (x.f[static_cast<std::size_t>(ti)] * w_[j]);
        if (j == 0)
          acc = z.cwiseMax(S(0)) * scale;
        else
          acc += z.cwiseMax(S(0)) * scale;
        cache.pre[j].push_back(std::move(z));
      }
      y.f.push_back(std::move(acc));
    }
    stack_.push_back(std::move(cache));
    return y;
  }

  FeatureSeq<S> backward(const FeatureSeq<S>& gy) {
    const Cache cache = detail::pop(stack_, "hgc");
    FeatureSeq<S> gx = FeatureSeq<S>::zeros_like(cache.x);
    const std::size_t heads = adj_.size();
    const S scale =
        agg_ == HgcAggregate::mean ? S(1) / static_cast<S>(heads) : S(1);
    for (int ti = 0; ti < cache.x.frames(); ++ti) {
      const auto& g = gy.f[static_cast<std::size_t>(ti)];
      for (std::size_t j = 0; j < heads; ++j) {
        const Mat<S>& z = cache.pre[j][static_cast<std::size_t>(ti)];
        const Mat<S> gz =
            (z.array() > S(0)).select(g * scale, Mat<S>::Zero(g.rows(), g.cols()));
        const Mat<S> atg = adj_[j].transpose() * gz;
        gw_[j].noalias() +=
            cache.x.f[static_cast<std::size_t>(ti)].transpose() * atg;
        gx.f[static_cast<std::size_t>(ti)].noalias() +=
            atg * w_[j].transpose();
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamList<S>& out) {
    for (std::size_t j = 0; j < w_.size(); ++j)
      out.push_back({prefix + ".w" + std::to_string(j), &w_[j], &gw_[j]});
  }

  std::size_t heads() const { return adj_.size(); }
  void clear_cache() { stack_.clear(); }

private:
  struct Cache {
    FeatureSeq<S> x;
    std::vector<std::vector<Mat<S>>> pre;  // pre-ReLU per head per frame
  };
  std::vector<Mat<S>> adj_, w_, gw_;
  HgcAggregate agg_ = HgcAggregate::sum;
  std::vector<Cache> stack_;
};

}  // namespace gaitview

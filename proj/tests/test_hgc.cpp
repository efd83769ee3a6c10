#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "gaitview/blocks.hpp"
#include "gaitview/hgc.hpp"
#include "grad_check.hpp"

using namespace gaitview;

namespace {

HypergraphSpec single_edge() {
  HypergraphSpec h;
  h.order = 1;
  h.incidence = Eigen::MatrixXd::Ones(2, 1);
  h.hyperedge_names = {"e0"};
  return h;
}

// random connected graph on n nodes: a path plus random extra edges
SkeletonTopology random_graph(int n, Rng& rng) {
  SkeletonTopology t;
  t.joint_count = n;
  for (int i = 0; i < n; ++i) t.joint_names.push_back("j" + std::to_string(i));
  for (int i = 0; i + 1 < n; ++i) t.bones.push_back({i, i + 1});
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (rng.uniform() < 0.3) t.bones.push_back({i, j});
  return t;
}

FeatureSeq<double> random_seq(int t, int n, int c, Rng& rng) {
  FeatureSeq<double> x;
  for (int ti = 0; ti < t; ++ti) {
    Mat<double> m(n, c);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    x.f.push_back(m);
  }
  return x;
}

double weighted_sum(const FeatureSeq<double>& y,
                    const std::vector<Mat<double>>& r) {
  double s = 0.0;
  for (std::size_t t = 0; t < y.f.size(); ++t)
    s += (y.f[t].array() * r[t].array()).sum();
  return s;
}

}  // namespace

TEST_CASE("degree matrices of a single edge") {
  const auto [d, b] = degree_matrices(single_edge());
  CHECK(d(0) == 1.0);
  CHECK(d(1) == 1.0);
  CHECK(b(0) == 2.0);
}

TEST_CASE("trace(B) equals the total incidence count") {
  const auto h = build_body_hypergraph(SkeletonTopology::coco17());
  const auto [d, b] = degree_matrices(h);
  CHECK(b.sum() == h.incidence.sum());
  CHECK(d.sum() == h.incidence.sum());
}

TEST_CASE("part hypergraph degrees: shoulders and hips belong to 2 parts") {
  const auto h = build_part_hypergraph(SkeletonTopology::coco17());
  const auto [d, b] = degree_matrices(h);
  for (int i = 0; i < 17; ++i) {
    const bool doubled = (i == 5 || i == 6 || i == 11 || i == 12);
    CHECK(d(i) == (doubled ? 2.0 : 1.0));
  }
  (void)b;
}

TEST_CASE("normalized adjacency of the single edge is [[.5,.5],[.5,.5]]") {
  const auto a = normalized_adjacency(single_edge());
  Eigen::MatrixXd expect(2, 2);
  expect << 0.5, 0.5, 0.5, 0.5;
  CHECK((a.matrix - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("A_hat * D^{1/2} 1 = D^{1/2} 1 for every canonical order") {
  for (const auto& h : canonical_hypergraphs(SkeletonTopology::coco17())) {
    const auto a = normalized_adjacency(h);
    const auto [d, b] = degree_matrices(h);
    const Eigen::VectorXd v = d.array().sqrt().matrix();
    CHECK((a.matrix * v - v).cwiseAbs().maxCoeff() < 1e-10);
    (void)b;
  }
}

TEST_CASE("spectrum of every canonical adjacency lies in [0, 1]") {
  for (const auto& h : canonical_hypergraphs(SkeletonTopology::coco17())) {
    const auto a = normalized_adjacency(h);
    CHECK((a.matrix - a.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.matrix);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-10);
  }
}

TEST_CASE("order-1 adjacency reduces to the (A + D)/2 closed form") {
  Rng rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    const auto topo = random_graph(5, rng);
    const auto h = build_bone_graph(topo);
    const auto a_hat = normalized_adjacency(h);
    const Eigen::MatrixXd a = topo.adjacency();
    const Eigen::VectorXd deg = a.rowwise().sum();
    const Eigen::VectorXd dis = deg.array().rsqrt().matrix();
    const Eigen::MatrixXd closed =
        dis.asDiagonal() * ((a + Eigen::MatrixXd(deg.asDiagonal())) / 2.0) *
        dis.asDiagonal();
    CHECK((a_hat.matrix - closed).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("permutation equivariance of the normalized adjacency") {
  Rng rng(77);
  const auto topo = SkeletonTopology::coco17();
  const auto h = build_part_hypergraph(topo);
  std::vector<int> perm(17);
  for (int i = 0; i < 17; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(17, 17);
  for (int i = 0; i < 17; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;

  HypergraphSpec hp = h;
  hp.incidence = p * h.incidence;
  const auto a = normalized_adjacency(h);
  const auto ap = normalized_adjacency(hp);
  CHECK((ap.matrix - p * a.matrix * p.transpose()).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("hgc forward: zero input maps to zero output") {
  Rng rng(5);
  const auto topo = SkeletonTopology::coco17();
  std::vector<Eigen::MatrixXd> adj;
  for (const auto& h : canonical_hypergraphs(topo))
    adj.push_back(normalized_adjacency(h).matrix);
  HgcLayer<double> layer(adj, 4, 6, HgcAggregate::sum, rng);
  FeatureSeq<double> x;
  x.f.assign(3, Mat<double>::Zero(17, 4));
  const auto y = layer.forward(x);
  for (const auto& fr : y.f) CHECK(fr.norm() == 0.0);
}

TEST_CASE("single-head order-1 hgc equals the dense closed form") {
  Rng rng(6);
  const auto topo = random_graph(5, rng);
  const auto a = normalized_adjacency(build_bone_graph(topo)).matrix;
  HgcLayer<double> layer({a}, 3, 3, HgcAggregate::sum, rng);
  ParamList<double> params;
  layer.collect("hgc", params);
  auto x = random_seq(2, 5, 3, rng);
  const auto y = layer.forward(x);
  const Mat<double>& w = *params[0].value;
  for (int t = 0; t < 2; ++t) {
    const Mat<double> expect =
        (a * x.f[static_cast<std::size_t>(t)] * w).cwiseMax(0.0);
    CHECK((y.f[static_cast<std::size_t>(t)] - expect).cwiseAbs().maxCoeff() <
          1e-14);
  }
}

TEST_CASE("eigenvector channel propagates through head 1 unchanged") {
  Rng rng(8);
  const auto topo = SkeletonTopology::coco17();
  const auto h1 = build_bone_graph(topo);
  const auto [d, b] = degree_matrices(h1);
  std::vector<Eigen::MatrixXd> adj{normalized_adjacency(h1).matrix};
  const int c = 3;
  HgcLayer<double> layer(adj, c, c, HgcAggregate::sum, rng);
  ParamList<double> params;
  layer.collect("hgc", params);
  params[0].value->setIdentity();

  FeatureSeq<double> x;
  Mat<double> fr = Mat<double>::Zero(17, c);
  fr.col(0) = d.array().sqrt().matrix();
  x.f.push_back(fr);
  const auto y = layer.forward(x);
  CHECK((y.f[0].col(0) - fr.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  (void)b;
}

TEST_CASE("hgc sum aggregation equals the sum of per-head outputs") {
  Rng rng(9);
  const auto topo = SkeletonTopology::coco17();
  std::vector<Eigen::MatrixXd> adj;
  for (const auto& h : canonical_hypergraphs(topo))
    adj.push_back(normalized_adjacency(h).matrix);

  HgcLayer<double> sum_layer(adj, 3, 4, HgcAggregate::sum, Rng(123));
  HgcLayer<double> mean_layer(adj, 3, 4, HgcAggregate::mean, Rng(123));
  auto x = random_seq(2, 17, 3, rng);
  const auto ys = sum_layer.forward(x);
  const auto ym = mean_layer.forward(x);
  for (int t = 0; t < 2; ++t)
    CHECK((ys.f[static_cast<std::size_t>(t)] -
           3.0 * ym.f[static_cast<std::size_t>(t)])
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("hgc gradients match finite differences on random configs") {
  Rng rng(100);
  const auto topo17 = SkeletonTopology::coco17();
  std::vector<Eigen::MatrixXd> adj17;
  for (const auto& h : canonical_hypergraphs(topo17))
    adj17.push_back(normalized_adjacency(h).matrix);

  for (int trial = 0; trial < 10; ++trial) {
    const bool toy = trial % 2 == 0;
    std::vector<Eigen::MatrixXd> adj;
    int n = 17;
    if (toy) {
      auto g = random_graph(5, rng);
      adj = {normalized_adjacency(build_bone_graph(g)).matrix};
      n = 5;
    } else {
      adj = adj17;
    }
    const int cin = 2 + static_cast<int>(rng.uniform_int(3));
    const int cout = 2 + static_cast<int>(rng.uniform_int(3));
    const int t = 2 + static_cast<int>(rng.uniform_int(2));
    HgcLayer<double> layer(adj, cin, cout,
                           trial % 3 ? HgcAggregate::sum : HgcAggregate::mean,
                           rng.split(static_cast<std::uint64_t>(trial)));
    auto x = random_seq(t, n, cin, rng);
    std::vector<Mat<double>> r;
    for (int ti = 0; ti < t; ++ti) {
      Mat<double> m(n, cout);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < cout; ++j) m(i, j) = rng.normal();
      r.push_back(m);
    }

    ParamList<double> params;
    layer.collect("hgc", params);
    zero_grads(params);
    layer.forward(x);
    FeatureSeq<double> gy;
    gy.f = r;
    const auto gx = layer.backward(gy);

    auto loss = [&]() { return weighted_sum(layer.forward(x), r); };
    CHECK(fd_max_rel_err_params(params, loss) < 1e-4);

    std::vector<std::pair<Mat<double>*, const Mat<double>*>> inputs;
    for (int ti = 0; ti < t; ++ti)
      inputs.emplace_back(&x.f[static_cast<std::size_t>(ti)],
                          &gx.f[static_cast<std::size_t>(ti)]);
    CHECK(fd_max_rel_err(inputs, loss) < 1e-4);
  }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(4);
  const auto topo = SkeletonTopology::coco17();
  std::vector<Eigen::MatrixXd> adj;
  for (const auto& h : canonical_hypergraphs(topo))
    adj.push_back(normalized_adjacency(h).matrix);
  HgcLayer<double> layer(adj, 3, 5, HgcAggregate::sum, rng);
  ParamList<double> params;
  layer.collect("hgc", params);
  zero_grads(params);
  auto x = random_seq(2, 17, 3, rng);
  layer.forward(x);
  FeatureSeq<double> gy;
  gy.f.assign(2, Mat<double>::Zero(17, 5));
  layer.backward(gy);
  for (const auto& p : params) CHECK(p.grad->norm() == 0.0);
}

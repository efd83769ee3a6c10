#include "doctest.h"

#include <filesystem>

#include "gaitview/skeleton.hpp"

using namespace gaitview;

namespace {

SkeletonTopology two_node_topology() {
  SkeletonTopology t;
  t.joint_count = 2;
  t.joint_names = {"a", "b"};
  t.bones = {{0, 1}};
  return t;
}

}  // namespace

TEST_CASE("bone graph of the 2-node toy topology is a single column of ones") {
  const auto spec = build_bone_graph(two_node_topology());
  REQUIRE(spec.incidence.rows() == 2);
  REQUIRE(spec.incidence.cols() == 1);
  CHECK(spec.incidence(0, 0) == 1.0);
  CHECK(spec.incidence(1, 0) == 1.0);
  CHECK(spec.order == 1);
}

TEST_CASE("canonical 17-joint topology has 19 bones, column sums 2") {
  const auto topo = SkeletonTopology::coco17();
  topo.validate();
  const auto spec = build_bone_graph(topo);
  REQUIRE(spec.incidence.rows() == 17);
  REQUIRE(spec.incidence.cols() == 19);
  for (int e = 0; e < 19; ++e) CHECK(spec.incidence.col(e).sum() == 2.0);
}

TEST_CASE("self-loop bone is rejected") {
  SkeletonTopology t = two_node_topology();
  t.bones = {{0, 0}, {0, 1}};
  CHECK_THROWS_AS(build_bone_graph(t), TopologyError);
}

TEST_CASE("disconnected topology is rejected") {
  SkeletonTopology t;
  t.joint_count = 4;
  t.joint_names = {"a", "b", "c", "d"};
  t.bones = {{0, 1}, {2, 3}};
  CHECK_THROWS_AS(build_bone_graph(t), TopologyError);
}

TEST_CASE("duplicate bones are rejected") {
  SkeletonTopology t = two_node_topology();
  t.bones = {{0, 1}, {1, 0}};
  CHECK_THROWS_AS(t.validate(), TopologyError);
}

TEST_CASE("part hypergraph: 17x6, full coverage, fixed leg membership") {
  const auto topo = SkeletonTopology::coco17();
  const auto spec = build_part_hypergraph(topo);
  REQUIRE(spec.incidence.rows() == 17);
  REQUIRE(spec.incidence.cols() == 6);
  for (int i = 0; i < 17; ++i) CHECK(spec.incidence.row(i).sum() >= 1.0);
  // left leg column = ones exactly at {left hip, left knee, left ankle}
  int col = -1;
  for (std::size_t e = 0; e < spec.hyperedge_names.size(); ++e)
    if (spec.hyperedge_names[e] == "left_leg") col = static_cast<int>(e);
  REQUIRE(col >= 0);
  for (int i = 0; i < 17; ++i) {
    const bool member = (i == 11 || i == 13 || i == 15);
    CHECK(spec.incidence(i, col) == (member ? 1.0 : 0.0));
  }
}

TEST_CASE("body hypergraph: 17x3, first hyperedge connects 7 nodes") {
  const auto spec = build_body_hypergraph(SkeletonTopology::coco17());
  REQUIRE(spec.incidence.rows() == 17);
  REQUIRE(spec.incidence.cols() == 3);
  CHECK(spec.incidence.col(0).sum() == 7.0);
  for (int i = 0; i < 17; ++i) CHECK(spec.incidence.row(i).sum() >= 1.0);
}

TEST_CASE("part/body hypergraphs require the 17-joint topology") {
  SkeletonTopology t = two_node_topology();
  CHECK_THROWS_AS(build_part_hypergraph(t), TopologyError);
  CHECK_THROWS_AS(build_body_hypergraph(t), TopologyError);
}

TEST_CASE("bone graph reproduces the adjacency matrix via H H^T - diag") {
  const auto topo = SkeletonTopology::coco17();
  const auto spec = build_bone_graph(topo);
  const Eigen::MatrixXd hht = spec.incidence * spec.incidence.transpose();
  const Eigen::MatrixXd a = hht - hht.diagonal().asDiagonal().toDenseMatrix();
  CHECK((a - topo.adjacency()).norm() == 0.0);
}

TEST_CASE("normalize_homogeneous divides by w and is idempotent") {
  PoseSequence s = PoseSequence::zeros(1, 2);
  s.coords[0] << 2, 4, 2, 3, 3, 1;
  const auto n1 = normalize_homogeneous(s);
  CHECK(n1.coords[0](0, 0) == doctest::Approx(1.0));
  CHECK(n1.coords[0](0, 1) == doctest::Approx(2.0));
  CHECK(n1.coords[0](0, 2) == 1.0);
  CHECK(n1.coords[0](1, 0) == doctest::Approx(3.0));
  const auto n2 = normalize_homogeneous(n1);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(n2.coords[0](i, c) == n1.coords[0](i, c));
}

TEST_CASE("normalize_homogeneous rejects depths below the floor") {
  PoseSequence s = PoseSequence::zeros(1, 1);
  s.coords[0] << 1, 1, 1e-12;
  CHECK_THROWS_AS(normalize_homogeneous(s), DegenerateDepthError);
  try {
    normalize_homogeneous(s);
  } catch (const DegenerateDepthError& e) {
    CHECK(e.frame == 0);
    CHECK(e.joint == 0);
  }
}

TEST_CASE("hypergraph invariants hold for all canonical orders") {
  const auto specs = canonical_hypergraphs(SkeletonTopology::coco17());
  REQUIRE(specs.size() == 3);
  for (const auto& spec : specs) {
    spec.validate();
    for (Eigen::Index i = 0; i < spec.incidence.rows(); ++i)
      CHECK(spec.incidence.row(i).sum() >= 1.0);
    if (spec.order == 1)
      for (Eigen::Index e = 0; e < spec.incidence.cols(); ++e)
        CHECK(spec.incidence.col(e).sum() == 2.0);
  }
}

TEST_CASE("topology and hypergraph presets round-trip through kv files") {
  const auto topo = SkeletonTopology::coco17();
  const auto dir = std::filesystem::temp_directory_path() / "gv_skel_test";
  std::filesystem::create_directories(dir);

  const auto tkv = topology_to_kv(topo);
  tkv.save((dir / "topo.kv").string());
  const auto topo2 = topology_from_kv(KvFile::load((dir / "topo.kv").string()));
  CHECK(topo2.joint_count == topo.joint_count);
  CHECK(topo2.bones == topo.bones);
  CHECK(topo2.joint_names == topo.joint_names);

  for (const auto& spec : canonical_hypergraphs(topo)) {
    const auto kv = hypergraph_to_kv(spec);
    const auto spec2 = hypergraph_from_kv(KvFile::parse(kv.serialize()));
    CHECK(spec2.order == spec.order);
    CHECK((spec2.incidence - spec.incidence).norm() == 0.0);
    // bit-exact: serialize -> parse -> serialize is identical
    CHECK(hypergraph_to_kv(spec2).serialize() == kv.serialize());
  }
  std::filesystem::remove_all(dir);
}

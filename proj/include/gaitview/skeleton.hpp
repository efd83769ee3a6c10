#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "gaitview/common.hpp"
#include "gaitview/kvfile.hpp"

namespace gaitview {

// 17-joint skeleton topology (COCO keypoint convention), the three
// hypergraph orders (joint / part / body level), and the homogeneous pose
// sequence exchanged by every other module. All types are immutable after
// construction.

struct SkeletonTopology {
  int joint_count = 0;
  std::vector<std::string> joint_names;
  std::vector<std::pair<int, int>> bones;  // unordered joint-index pairs

  void validate() const {
    if (joint_count < 1) throw TopologyError("topology: joint_count < 1");
    if (static_cast<int>(joint_names.size()) != joint_count)
      throw TopologyError("topology: joint_names size mismatch");
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(joint_count));
    std::vector<std::pair<int, int>> seen;
    for (auto [a, b] : bones) {
      if (a < 0 || a >= joint_count || b < 0 || b >= joint_count)
        throw TopologyError("topology: bone endpoint out of range");
      if (a == b) throw TopologyError("topology: self-loop bone");
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      for (auto& s : seen)
        if (s == key) throw TopologyError("topology: duplicate bone");
      seen.push_back(key);
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    // every joint reachable from joint 0
    std::vector<char> vis(static_cast<std::size_t>(joint_count), 0);
    std::vector<int> stack{0};
    vis[0] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!vis[static_cast<std::size_t>(v)]) {
          vis[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
    }
    for (char c : vis)
      if (!c) throw TopologyError("topology: bone graph disconnected");
  }

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(joint_count, joint_count);
    for (auto [i, j] : bones) a(i, j) = a(j, i) = 1.0;
    return a;
  }

  // COCO-17: 0 nose, 1/2 eyes, 3/4 ears, 5/6 shoulders, 7/8 elbows,
  // 9/10 wrists, 11/12 hips, 13/14 knees, 15/16 ankles.
  static SkeletonTopology coco17() {
    SkeletonTopology t;
    t.joint_count = 17;
    t.joint_names = {"nose",          "left_eye",      "right_eye",
                     "left_ear",      "right_ear",     "left_shoulder",
                     "right_shoulder","left_elbow",    "right_elbow",
                     "left_wrist",    "right_wrist",   "left_hip",
                     "right_hip",     "left_knee",     "right_knee",
                     "left_ankle",    "right_ankle"};
    t.bones = {{0, 1}, {0, 2}, {1, 2},  {1, 3},   {2, 4},   {3, 5},  {4, 6},
               {5, 6}, {5, 7}, {7, 9},  {6, 8},   {8, 10},  {5, 11}, {6, 12},
               {11, 12}, {11, 13}, {13, 15}, {12, 14}, {14, 16}};
    return t;
  }
};

struct HypergraphSpec {
  int order = 0;                  // 1 joint, 2 part, 3 body level
  Eigen::MatrixXd incidence;      // N x M, entries exactly 0 or 1
  std::vector<std::string> hyperedge_names;

  int nodes() const { return static_cast<int>(incidence.rows()); }
  int hyperedges() const { return static_cast<int>(incidence.cols()); }

  void validate() const {
    if (order < 1 || order > 3) throw TopologyError("hypergraph: bad order");
    const auto& h = incidence;
    for (Eigen::Index i = 0; i < h.rows(); ++i)
      for (Eigen::Index j = 0; j < h.cols(); ++j)
        if (h(i, j) != 0.0 && h(i, j) != 1.0)
          throw TopologyError("hypergraph: incidence entries must be 0/1");
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      const double colsum = h.col(j).sum();
      if (colsum < 2.0)
        throw TopologyError("hypergraph: hyperedge with fewer than 2 nodes");
      if (order == 1 && colsum != 2.0)
        throw TopologyError("hypergraph: order-1 column sum must be 2");
    }
    for (Eigen::Index i = 0; i < h.rows(); ++i)
      if (h.row(i).sum() < 1.0)
        throw TopologyError("hypergraph: isolated node " + std::to_string(i));
    if (static_cast<Eigen::Index>(hyperedge_names.size()) != h.cols())
      throw TopologyError("hypergraph: hyperedge_names size mismatch");
  }
};

// Homogeneous 2D keypoint trajectory, T frames x N joints x (x, y, w),
// with per-joint confidence in [0,1].
struct PoseSequence {
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> coords;  // per frame N x 3
  Eigen::MatrixXd confidence;                                    // T x N

  int frames() const { return static_cast<int>(coords.size()); }
  int joints() const {
    return coords.empty() ? 0 : static_cast<int>(coords[0].rows());
  }

  void validate() const {
    if (coords.empty()) throw DataError("pose sequence: T < 1");
    const Eigen::Index n = coords[0].rows();
    for (const auto& f : coords)
      if (f.rows() != n) throw DataError("pose sequence: ragged frames");
    if (confidence.rows() != static_cast<Eigen::Index>(coords.size()) ||
        confidence.cols() != n)
      throw DataError("pose sequence: confidence shape mismatch");
  }

  static PoseSequence zeros(int t, int n) {
    PoseSequence s;
    s.coords.assign(static_cast<std::size_t>(t),
                    Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(n, 3));
    s.confidence = Eigen::MatrixXd::Ones(t, n);
    return s;
  }
};

inline constexpr double kHomogeneousWMin = 1e-6;

// Divide each joint by its third coordinate; idempotent.
inline PoseSequence normalize_homogeneous(const PoseSequence& seq,
                                          double w_min = kHomogeneousWMin) {
  PoseSequence out = seq;
  for (std::size_t t = 0; t < out.coords.size(); ++t) {
    auto& frame = out.coords[t];
    for (Eigen::Index i = 0; i < frame.rows(); ++i) {
      const double w = frame(i, 2);
      if (std::abs(w) <= w_min)
        throw DegenerateDepthError(static_cast<long>(t), static_cast<long>(i), w);
      frame(i, 0) /= w;
      frame(i, 1) /= w;
      frame(i, 2) = 1.0;
    }
  }
  return out;
}

// Order-1 hypergraph: one 2-node hyperedge per bone.
inline HypergraphSpec build_bone_graph(const SkeletonTopology& topo) {
  topo.validate();
  HypergraphSpec spec;
  spec.order = 1;
  spec.incidence = Eigen::MatrixXd::Zero(topo.joint_count,
                                         static_cast<int>(topo.bones.size()));
  for (std::size_t e = 0; e < topo.bones.size(); ++e) {
    spec.incidence(topo.bones[e].first, static_cast<Eigen::Index>(e)) = 1.0;
    spec.incidence(topo.bones[e].second, static_cast<Eigen::Index>(e)) = 1.0;
    spec.hyperedge_names.push_back(
        topo.joint_names[static_cast<std::size_t>(topo.bones[e].first)] + "-" +
        topo.joint_names[static_cast<std::size_t>(topo.bones[e].second)]);
  }
  spec.validate();
  return spec;
}

namespace detail {
inline HypergraphSpec hypergraph_from_parts(
    const SkeletonTopology& topo, int order,
    const std::vector<std::pair<std::string, std::vector<int>>>& parts) {
  if (topo.joint_count != 17)
    throw TopologyError("part/body hypergraphs are defined for the 17-joint "
                        "topology only");
  HypergraphSpec spec;
  spec.order = order;
  spec.incidence = Eigen::MatrixXd::Zero(topo.joint_count,
                                         static_cast<int>(parts.size()));
  for (std::size_t e = 0; e < parts.size(); ++e) {
    spec.hyperedge_names.push_back(parts[e].first);
    for (int i : parts[e].second)
      spec.incidence(i, static_cast<Eigen::Index>(e)) = 1.0;
  }
  spec.validate();
  return spec;
}
}  // namespace detail

// Order-2: 6 anatomical parts covering every joint.
inline HypergraphSpec build_part_hypergraph(const SkeletonTopology& topo) {
  return detail::hypergraph_from_parts(
      topo, 2,
      {{"head", {0, 1, 2, 3, 4}},
       {"torso", {5, 6, 11, 12}},
       {"left_arm", {5, 7, 9}},
       {"right_arm", {6, 8, 10}},
       {"left_leg", {11, 13, 15}},
       {"right_leg", {12, 14, 16}}});
}

// Order-3: 3 body regions; the first connects 7 nodes.
inline HypergraphSpec build_body_hypergraph(const SkeletonTopology& topo) {
  return detail::hypergraph_from_parts(
      topo, 3,
      {{"upper", {0, 1, 2, 3, 4, 5, 6}},
       {"mid", {5, 6, 7, 8, 9, 10, 11, 12}},
       {"lower", {11, 12, 13, 14, 15, 16}}});
}

inline std::vector<HypergraphSpec> canonical_hypergraphs(
    const SkeletonTopology& topo) {
  return {build_bone_graph(topo), build_part_hypergraph(topo),
          build_body_hypergraph(topo)};
}

// ------------------------------------------------------- preset key-value io

inline KvFile topology_to_kv(const SkeletonTopology& topo) {
  KvFile kv;
  kv.set_int("joint_count", topo.joint_count);
  std::string names;
  for (std::size_t i = 0; i < topo.joint_names.size(); ++i)
    names += (i ? "," : "") + topo.joint_names[i];
  kv.set("joint_names", names);
  std::string bones;
  for (std::size_t i = 0; i < topo.bones.size(); ++i)
    bones += (i ? " " : "") + std::to_string(topo.bones[i].first) + "-" +
             std::to_string(topo.bones[i].second);
  kv.set("bones", bones);
  return kv;
}

inline SkeletonTopology topology_from_kv(const KvFile& kv) {
  SkeletonTopology t;
  t.joint_count = static_cast<int>(kv.get_int("joint_count"));
  t.joint_names = split(kv.get("joint_names"), ',');
  for (const auto& tok : split(kv.get("bones"), ' ')) {
    if (tok.empty()) continue;
    auto parts = split(tok, '-');
    if (parts.size() != 2) throw DataError("topology kv: bad bone '" + tok + "'");
    t.bones.emplace_back(std::stoi(parts[0]), std::stoi(parts[1]));
  }
  t.validate();
  return t;
}

inline KvFile hypergraph_to_kv(const HypergraphSpec& spec) {
  KvFile kv;
  kv.set_int("order", spec.order);
  kv.set_int("nodes", spec.nodes());
  kv.set_int("hyperedges", spec.hyperedges());
  for (int e = 0; e < spec.hyperedges(); ++e) {
    std::string members;
    for (int i = 0; i < spec.nodes(); ++i)
      if (spec.incidence(i, e) == 1.0)
        members += (members.empty() ? "" : ",") + std::to_string(i);
    kv.set("edge." + spec.hyperedge_names[static_cast<std::size_t>(e)], members);
  }
  return kv;
}

inline HypergraphSpec hypergraph_from_kv(const KvFile& kv) {
  HypergraphSpec spec;
  spec.order = static_cast<int>(kv.get_int("order"));
  const int n = static_cast<int>(kv.get_int("nodes"));
  const int m = static_cast<int>(kv.get_int("hyperedges"));
  spec.incidence = Eigen::MatrixXd::Zero(n, m);
  int e = 0;
  for (const auto& [key, value] : kv.items()) {
    if (key.rfind("edge.", 0) != 0) continue;
    if (e >= m) throw DataError("hypergraph kv: more edges than declared");
    spec.hyperedge_names.push_back(key.substr(5));
    for (const auto& tok : split(value, ','))
      spec.incidence(std::stoi(tok), e) = 1.0;
    ++e;
  }
  if (e != m) throw DataError("hypergraph kv: fewer edges than declared");
  spec.validate();
  return spec;
}

}  // namespace gaitview

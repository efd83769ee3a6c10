#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "gaitview/synth.hpp"

using namespace gaitview;

TEST_CASE("zero amplitudes and zero noise give a static standing pose") {
  WalkerParams p;
  p.arm_swing_rad = p.leg_swing_rad = p.knee_amp_rad = 0.0;
  p.torso_yaw_rad = 0.0;
  p.bob_amp_m = 0.0;
  p.noise_std_m = 0.0;
  const auto walk = synth_walk_3d(p, 12, 1);
  for (std::size_t t = 1; t < walk.size(); ++t)
    CHECK((walk[t] - walk[0]).norm() == 0.0);
}

TEST_CASE("same params and seed reproduce the walk bitwise") {
  WalkerParams p;
  p.noise_std_m = 0.01;
  const auto a = synth_walk_3d(p, 20, 42);
  const auto b = synth_walk_3d(p, 20, 42);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK((a[t] - b[t]).norm() == 0.0);
}

TEST_CASE("1 Hz cadence at 30 fps is periodic with period 30 frames") {
  WalkerParams p;
  p.cadence_hz = 1.0;
  p.noise_std_m = 0.0;
  const auto walk = synth_walk_3d(p, 60, 1, 30.0);
  for (int t = 0; t + 30 < 60; ++t)
    CHECK((walk[static_cast<std::size_t>(t + 30)] -
           walk[static_cast<std::size_t>(t)])
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("bone lengths are conserved every frame before noise") {
  WalkerParams p;
  p.noise_std_m = 0.0;
  const auto topo = SkeletonTopology::coco17();
  const auto walk = synth_walk_3d(p, 40, 8);
  std::vector<double> ref;
  for (auto [a, b] : topo.bones)
    ref.push_back((walk[0].row(a) - walk[0].row(b)).norm());
  for (const auto& frame : walk) {
    for (std::size_t e = 0; e < topo.bones.size(); ++e) {
      const auto [a, b] = topo.bones[e];
      const double len = (frame.row(a) - frame.row(b)).norm();
      CHECK(std::abs(len - ref[e]) / ref[e] < 1e-9);
    }
  }
}

TEST_CASE("render_views produces one aligned sequence per rig view") {
  WalkerParams p;
  const auto walk = synth_walk_3d(p, 8, 3);

  const auto one = render_views(walk, circle_rig({90.0}, 4.0));
  CHECK(one.size() == 1);

  const auto eleven = render_views(walk, circle_rig(casia_like_yaws(), 4.0));
  CHECK(eleven.size() == 11);
  for (const auto& s : eleven) {
    CHECK(s.frames() == 8);
    CHECK(s.joints() == 17);
    for (int t = 0; t < s.frames(); ++t)
      CHECK((s.coords[t].col(2).array() == 1.0).all());
  }
}

TEST_CASE("co-centered renders agree with the geometry oracle") {
  WalkerParams p;
  const auto walk = synth_walk_3d(p, 6, 17);
  const auto rig = cocentered_rig(2, 4.0, 1000.0, 1.2, 35.0);
  const auto views = render_views(walk, rig);
  const auto vt = oracle_view_transform(rig.views[0].projection(),
                                        rig.views[1].projection());
  const auto mapped = apply_view_transform(vt, views[0]);
  for (int t = 0; t < mapped.frames(); ++t)
    CHECK((mapped.coords[t] - views[1].coords[t]).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("synth_records counts and determinism") {
  SynthOptions opt;
  opt.n_identities = 2;
  opt.conditions = {Condition::NM};
  opt.runs = 1;
  opt.frames = 6;
  opt.seed = 5;
  const auto rig = circle_rig({0.0, 90.0}, 4.0);
  const auto recs = synth_records(opt, rig);
  CHECK(recs.size() == 4);  // 2 ids x 1 cond x 2 views

  const auto dir = std::filesystem::temp_directory_path() / "gv_synth_test";
  std::filesystem::create_directories(dir);
  const auto p1 = (dir / "a.jsonl").string();
  const auto p2 = (dir / "b.jsonl").string();
  make_dataset(opt, rig, p1, p1 + ".manifest");
  make_dataset(opt, rig, p2, p2 + ".manifest");
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("acceptance preset dataset has 960 records") {
  SynthOptions opt;
  opt.n_identities = 20;
  opt.conditions = {Condition::NM, Condition::BG, Condition::CL};
  opt.runs = 2;
  opt.frames = 2;  // count check only
  opt.seed = 1;
  const auto rig = circle_rig(acceptance_yaws(), 6.0);
  const auto recs = synth_records(opt, rig);
  CHECK(recs.size() == 960);
}

TEST_CASE("conditions perturb the walk but keep identity parameters") {
  WalkerParams base;
  const auto bg = condition_adjust(base, Condition::BG);
  CHECK(bg.arm_swing_right_factor < base.arm_swing_right_factor);
  const auto cl = condition_adjust(base, Condition::CL);
  CHECK(cl.arm_swing_rad < base.arm_swing_rad);
  CHECK(cl.noise_std_m > base.noise_std_m);
  CHECK(cl.thigh_m == base.thigh_m);
}

#include "doctest.h"

#include "gaitview/camera.hpp"
#include "gaitview/synth.hpp"

using namespace gaitview;

namespace {

Eigen::Matrix<double, Eigen::Dynamic, 3> random_points(Rng& rng, int n,
                                                       double spread = 0.9) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(n, 3);
  for (int i = 0; i < n; ++i) {
    pts(i, 0) = rng.uniform(-spread, spread);
    pts(i, 1) = rng.uniform(-spread, spread);
    pts(i, 2) = rng.uniform(0.0, 1.8);
  }
  return pts;
}

}  // namespace

TEST_CASE("identity camera composes to [I | 0]") {
  CameraIntrinsics k;  // identity
  CameraExtrinsics e;  // identity rotation, zero translation
  const auto p = compose_projection(k, e);
  Eigen::Matrix<double, 3, 4> expect;
  expect << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
  CHECK((p.matrix - expect).norm() == 0.0);
}

TEST_CASE("composition matches direct hand multiplication") {
  const auto k = CameraIntrinsics::pinhole(1000.0, 512.0, 384.0);
  const auto e = CameraExtrinsics::look_at(Eigen::Vector3d(4, 0, 1.2),
                                           Eigen::Vector3d(0, 0, 0.9));
  const auto p = compose_projection(k, e);
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = e.rotation;
  rt.col(3) = e.translation;
  const Eigen::Matrix<double, 3, 4> expect = k.matrix * rt;
  CHECK((p.matrix - expect).norm() == 0.0);
}

TEST_CASE("reflection extrinsics are rejected") {
  CameraIntrinsics k;
  CameraExtrinsics e;
  e.rotation = Eigen::Matrix3d::Identity();
  e.rotation(0, 0) = -1.0;  // det -1
  CHECK_THROWS_AS(compose_projection(k, e), DegenerateCameraError);
}

TEST_CASE("project leaves homogeneous coordinates unnormalized") {
  ProjectionMatrix p;
  p.matrix << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(2, 3);
  pts << 0, 0, 1, 1, 2, 2;
  const auto img = project(pts, p);
  CHECK(img(0, 0) == 0.0);
  CHECK(img(0, 2) == 1.0);
  CHECK(img(1, 0) == 1.0);
  CHECK(img(1, 1) == 2.0);
  CHECK(img(1, 2) == 2.0);  // not yet divided
}

TEST_CASE("project matches a brute-force matrix-vector product") {
  Rng rng(7);
  const auto rig = circle_rig({36.0}, 4.0);
  const auto proj = rig.views[0].projection();
  const auto pts = random_points(rng, 25);
  const auto img = project(pts, proj);
  for (int i = 0; i < pts.rows(); ++i) {
    Eigen::Vector4d h(pts(i, 0), pts(i, 1), pts(i, 2), 1.0);
    const Eigen::Vector3d expect = proj.matrix * h;
    CHECK((img.row(i).transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("oracle transform of a view with itself is the identity") {
  const auto rig = circle_rig({0.0}, 4.0);
  const auto m = rig.views[0].projection();
  const auto vt = oracle_view_transform(m, m);
  CHECK((vt.q - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(vt.residual < 1e-9 * m.matrix.norm());
}

TEST_CASE("co-centered pair: exact transform, reprojection < 1e-8 px") {
  const auto rig = cocentered_rig(2, 4.0, 1000.0, 1.2, 30.0);  // 0 and 30 deg
  const auto ma = rig.views[0].projection();
  const auto mb = rig.views[1].projection();
  const auto vt = oracle_view_transform(ma, mb);
  CHECK(vt.residual < 1e-9 * mb.matrix.norm());

  Rng rng(11);
  const auto pts = random_points(rng, 100);
  const auto pa = project(pts, ma);
  const auto pb = project(pts, mb);
  const Eigen::Matrix<double, Eigen::Dynamic, 3> qa =
      (vt.q * pa.transpose()).transpose();
  for (int i = 0; i < pts.rows(); ++i) {
    const double ax = qa(i, 0) / qa(i, 2), ay = qa(i, 1) / qa(i, 2);
    const double bx = pb(i, 0) / pb(i, 2), by = pb(i, 1) / pb(i, 2);
    CHECK(std::hypot(ax - bx, ay - by) < 1e-8);
  }
}

TEST_CASE("displaced pair reports a positive residual") {
  const auto rig = circle_rig({0.0, 36.0}, 2.0);
  const auto vt = oracle_view_transform(rig.views[0].projection(),
                                        rig.views[1].projection());
  CHECK(vt.residual > 1e-6);
}

TEST_CASE("oracle Q satisfies the normal equations") {
  for (double yaw : {18.0, 54.0, 126.0}) {
    const auto rig = circle_rig({0.0, yaw}, 3.0);
    const auto ma = rig.views[0].projection();
    const auto mb = rig.views[1].projection();
    const auto vt = oracle_view_transform(ma, mb);
    const Eigen::Matrix<double, 3, 4> r = vt.q * ma.matrix - mb.matrix;
    // scale-relative: matrices carry focal-length magnitudes
    CHECK((r * ma.matrix.transpose()).norm() <
          1e-9 * ma.matrix.norm() * mb.matrix.norm());
  }
}

TEST_CASE("apply_view_transform: identity and projective scale invariance") {
  WalkerParams wp;
  const auto walk = synth_walk_3d(wp, 8, 3);
  const auto rig = circle_rig({90.0}, 4.0);
  const auto seq = render_views(walk, rig)[0];

  ViewTransform ident;
  const auto out = apply_view_transform(ident, seq);
  for (int t = 0; t < seq.frames(); ++t)
    CHECK((out.coords[t] - seq.coords[t]).norm() < 1e-12);

  ViewTransform scaled;
  scaled.q = 2.0 * Eigen::Matrix3d::Identity();
  const auto out2 = apply_view_transform(scaled, seq);
  for (int t = 0; t < seq.frames(); ++t)
    CHECK((out2.coords[t] - seq.coords[t]).norm() < 1e-9);
}

TEST_CASE("co-centered rig: oracle Q maps a walk onto the other view") {
  const auto rig = cocentered_rig(2, 4.0, 1000.0, 1.2, 30.0);
  WalkerParams wp;
  const auto walk = synth_walk_3d(wp, 10, 5);
  const auto views = render_views(walk, rig);
  const auto vt = oracle_view_transform(rig.views[0].projection(),
                                        rig.views[1].projection());
  const auto mapped = apply_view_transform(vt, views[0]);
  for (int t = 0; t < mapped.frames(); ++t)
    for (int i = 0; i < mapped.joints(); ++i)
      CHECK(std::hypot(mapped.coords[t](i, 0) - views[1].coords[t](i, 0),
                       mapped.coords[t](i, 1) - views[1].coords[t](i, 1)) <
            1e-8);
}

TEST_CASE("forward then backward transform returns the original pose") {
  const auto rig = cocentered_rig(2, 4.0, 1000.0, 1.2, 25.0);
  WalkerParams wp;
  const auto walk = synth_walk_3d(wp, 6, 9);
  const auto seq = render_views(walk, rig)[0];
  const auto q_ab = oracle_view_transform(rig.views[0].projection(),
                                          rig.views[1].projection());
  const auto q_ba = oracle_view_transform(rig.views[1].projection(),
                                          rig.views[0].projection());
  const auto round = apply_view_transform(q_ba, apply_view_transform(q_ab, seq));
  for (int t = 0; t < seq.frames(); ++t)
    CHECK((round.coords[t] - seq.coords[t]).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("lemma1_residual: empty report for a single view") {
  const auto rig = circle_rig({0.0}, 4.0);
  WalkerParams wp;
  const auto walk = synth_walk_3d(wp, 4, 2);
  CHECK(lemma1_residual(rig, walk).empty());
}

TEST_CASE("lemma1_residual: co-centered rig is exact everywhere") {
  const auto rig = cocentered_rig(3, 4.0, 1000.0, 1.2, 40.0);
  WalkerParams wp;
  const auto walk = synth_walk_3d(wp, 6, 21);
  for (const auto& r : lemma1_residual(rig, walk)) {
    CHECK(r.max_joint_error < 1e-8);
  }
}

TEST_CASE("lemma1_residual: error shrinks as the rig radius grows") {
  WalkerParams wp;
  const auto walk = synth_walk_3d(wp, 6, 13);
  double prev = 1e100;
  for (double radius : {2.0, 5.0, 10.0, 50.0}) {
    // zoom with distance so the subject stays the same size on screen
    const auto rig = circle_rig(casia_like_yaws(), radius, 250.0 * radius);
    double mean = 0.0;
    const auto report = lemma1_residual(rig, walk);
    for (const auto& r : report) mean += r.mean_joint_error;
    mean /= static_cast<double>(report.size());
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("rig round-trips through its kv description") {
  for (const auto* name : {"casia-like", "ou-like", "acceptance", "cocentered-4"}) {
    const auto rig = rig_preset(name, 5.0, 900.0);
    const auto kv = rig_to_kv(rig);
    const auto rig2 = rig_from_kv(KvFile::parse(kv.serialize()));
    REQUIRE(rig2.views.size() == rig.views.size());
    for (std::size_t i = 0; i < rig.views.size(); ++i) {
      CHECK((rig2.views[i].projection().matrix -
             rig.views[i].projection().matrix)
                .norm() < 1e-12);
    }
    CHECK(rig_to_kv(rig2).serialize() == kv.serialize());
  }
}

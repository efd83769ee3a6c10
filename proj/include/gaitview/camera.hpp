#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <string>
#include <vector>

#include "gaitview/common.hpp"
#include "gaitview/skeleton.hpp"

namespace gaitview {

// Pinhole projection, the cross-view 3x3 transform between projection
// matrices, and the least-squares oracle for it. Everything here runs in
// float64 and is the ground truth the learned transforms are judged
// against.
//
// The exact identity  M_b = Q * M_a  holds when the two cameras share a
// center (their 3x4 matrices span the same row space). For displaced
// cameras we solve the Frobenius least-squares problem instead and report
// the achieved residual as a first-class quantity.

struct CameraIntrinsics {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();

  void validate() const {
    if (!matrix.allFinite()) throw DegenerateCameraError("intrinsics not finite");
    if (std::abs(matrix.determinant()) < 1e-12)
      throw DegenerateCameraError("intrinsics singular");
  }

  static CameraIntrinsics pinhole(double focal_px, double cx, double cy) {
    CameraIntrinsics k;
    k.matrix << focal_px, 0, cx, 0, focal_px, cy, 0, 0, 1;
    return k;
  }
};

struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const {
    const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
    if ((rtr - Eigen::Matrix3d::Identity()).norm() > 1e-10)
      throw DegenerateCameraError("rotation not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-10)
      throw DegenerateCameraError("rotation determinant != +1");
  }

  Eigen::Matrix<double, 3, 4> as_matrix() const {
    Eigen::Matrix<double, 3, 4> m;
    m.leftCols<3>() = rotation;
    m.col(3) = translation;
    return m;
  }

  // World -> camera for a camera centered at `center` looking at `target`,
  // world +z up, image y pointing down.
  static CameraExtrinsics look_at(const Eigen::Vector3d& center,
                                  const Eigen::Vector3d& target) {
    const Eigen::Vector3d fwd = (target - center).normalized();
    const Eigen::Vector3d up_world(0, 0, 1);
    Eigen::Vector3d right = fwd.cross(up_world);
    if (right.norm() < 1e-9)
      throw DegenerateCameraError("look_at: view direction parallel to up");
    right.normalize();
    const Eigen::Vector3d down = fwd.cross(right);
    CameraExtrinsics e;
    e.rotation.row(0) = right;
    e.rotation.row(1) = down;
    e.rotation.row(2) = fwd;
    e.translation = -e.rotation * center;
    return e;
  }
};

inline constexpr double kProjectionRankTol = 1e-8;  // relative to sigma_max

struct ProjectionMatrix {
  Eigen::Matrix<double, 3, 4> matrix = Eigen::Matrix<double, 3, 4>::Zero();

  void validate() const {
    Eigen::JacobiSVD<Eigen::Matrix<double, 3, 4>> svd(matrix);
    const auto& sv = svd.singularValues();
    if (sv(2) <= kProjectionRankTol * sv(0))
      throw DegenerateCameraError("projection matrix rank deficient");
  }
};

struct ViewTransform {
  Eigen::Matrix3d q = Eigen::Matrix3d::Identity();
  bool has_factors = false;
  Eigen::Matrix3d lower = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d upper = Eigen::Matrix3d::Identity();
  double residual = 0.0;  // Frobenius norm of Q*Ma - Mb; 0 when exact

  void validate() const {
    if (has_factors && (q - lower * upper).norm() > 1e-10)
      throw NumericError("view transform: q != lower*upper");
    if (q.determinant() == 0.0)
      throw NumericError("view transform: singular q");
  }
};

inline ProjectionMatrix compose_projection(const CameraIntrinsics& intr,
                                           const CameraExtrinsics& extr) {
  intr.validate();
  extr.validate();
  ProjectionMatrix p;
  p.matrix = intr.matrix * extr.as_matrix();
  p.validate();
  return p;
}

// Homogeneous image coordinates, one row per point; NOT normalized.
inline Eigen::Matrix<double, Eigen::Dynamic, 3> project(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& world_points,
    const ProjectionMatrix& proj) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> h(world_points.rows(), 4);
  h.leftCols<3>() = world_points;
  h.col(3).setOnes();
  return h * proj.matrix.transpose();
}

// Least-squares Q minimizing ||Q*Ma - Mb||_F, solved row-wise through the
// SVD of Ma^T for conditioning. Shared-center pairs come out exact to
// rounding.
inline ViewTransform oracle_view_transform(const ProjectionMatrix& m_a,
                                           const ProjectionMatrix& m_b) {
  m_a.validate();
  m_b.validate();
  const double scale = m_a.matrix.norm();
  if (scale == 0.0) throw DegeneratePairError("zero projection matrix");
  const Eigen::Matrix<double, 4, 3> at = (m_a.matrix / scale).transpose();
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 3>> svd(
      at, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) <= 1e-13 * svd.singularValues()(0))
    throw DegeneratePairError("normal equations singular");
  ViewTransform vt;
  // at * (scale * Q^T) = Mb^T in the least-squares sense.
  vt.q = svd.solve(m_b.matrix.transpose()).transpose() / scale;
  vt.residual = (vt.q * m_a.matrix - m_b.matrix).norm();
  vt.has_factors = false;
  if (std::abs(vt.q.determinant()) < 1e-14)
    throw DegeneratePairError("oracle transform singular");
  return vt;
}

// Left-multiply every homogeneous joint by q, then renormalize.
inline PoseSequence apply_view_transform(const ViewTransform& vt,
                                         const PoseSequence& seq,
                                         double w_min = kHomogeneousWMin) {
  PoseSequence out = seq;
  for (auto& frame : out.coords)
    frame = (vt.q * frame.transpose()).transpose();
  return normalize_homogeneous(out, w_min);
}

// ------------------------------------------------------------- camera rigs

struct RigView {
  std::string name;
  double yaw_degrees = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double focal_px = 1000.0;
  Eigen::Vector2d principal_point = Eigen::Vector2d(512.0, 384.0);
  CameraExtrinsics extrinsics;  // derived by the rig builders

  CameraIntrinsics intrinsics() const {
    return CameraIntrinsics::pinhole(focal_px, principal_point.x(),
                                     principal_point.y());
  }
  ProjectionMatrix projection() const {
    return compose_projection(intrinsics(), extrinsics);
  }
};

struct CameraRig {
  std::string kind = "custom";  // circle | cocentered | custom
  std::vector<RigView> views;
  Eigen::Vector3d target = Eigen::Vector3d(0, 0, 0.9);

  void validate() const {
    for (std::size_t i = 0; i < views.size(); ++i)
      for (std::size_t j = i + 1; j < views.size(); ++j)
        if (views[i].yaw_degrees == views[j].yaw_degrees)
          throw ConfigError("rig: duplicate view yaw " +
                            fmt_double(views[i].yaw_degrees));
  }

  const RigView& view_by_yaw(double yaw) const {
    for (const auto& v : views)
      if (std::abs(v.yaw_degrees - yaw) < 1e-9) return v;
    throw DataError("rig: no view at yaw " + fmt_double(yaw));
  }

  std::vector<double> yaw_list() const {
    std::vector<double> out;
    for (const auto& v : views) out.push_back(v.yaw_degrees);
    return out;
  }
};

// Cameras on a circle of given radius about the subject, all aimed at the
// rig target. Yaw 0 puts the camera on the +x axis (frontal for a walker
// facing +x).
inline CameraRig circle_rig(const std::vector<double>& yaws_deg, double radius_m,
                            double focal_px = 1000.0, double cam_height_m = 1.2,
                            Eigen::Vector2d pp = Eigen::Vector2d(512, 384)) {
  CameraRig rig;
  rig.kind = "circle";
  for (double yaw : yaws_deg) {
    RigView v;
    v.name = "v" + fmt_double(yaw);
    v.yaw_degrees = yaw;
    const double a = yaw * M_PI / 180.0;
    v.center = Eigen::Vector3d(radius_m * std::cos(a), radius_m * std::sin(a),
                               cam_height_m);
    v.focal_px = focal_px;
    v.principal_point = pp;
    v.extrinsics = CameraExtrinsics::look_at(v.center, rig.target);
    rig.views.push_back(v);
  }
  rig.validate();
  return rig;
}

// k cameras sharing one center, view directions fanned over [0, 45] deg of
// yaw about that center. Cross-view transforms on this rig are exact
// homographies.
inline CameraRig cocentered_rig(int k, double distance_m = 4.0,
                                double focal_px = 1000.0,
                                double cam_height_m = 1.2,
                                double spread_deg = 45.0) {
  if (k < 1) throw ConfigError("cocentered rig: k < 1");
  CameraRig rig;
  rig.kind = "cocentered";
  const Eigen::Vector3d center(distance_m, 0.0, cam_height_m);
  const CameraExtrinsics base = CameraExtrinsics::look_at(center, rig.target);
  for (int i = 0; i < k; ++i) {
    const double yaw = (k == 1) ? 0.0 : spread_deg * i / (k - 1);
    const double a = yaw * M_PI / 180.0;
    Eigen::Matrix3d rz;
    rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    RigView v;
    v.name = "c" + fmt_double(yaw);
    v.yaw_degrees = yaw;
    v.center = center;
    v.focal_px = focal_px;
    v.principal_point = Eigen::Vector2d(512, 384);
    v.extrinsics.rotation = base.rotation * rz;
    v.extrinsics.translation = -v.extrinsics.rotation * center;
    rig.views.push_back(v);
  }
  rig.validate();
  return rig;
}

inline std::vector<double> casia_like_yaws() {
  std::vector<double> y;
  for (int i = 0; i <= 10; ++i) y.push_back(18.0 * i);
  return y;
}

inline std::vector<double> ou_like_yaws() {
  return {0,   15,  30,  45,  60,  75,  90,
          180, 195, 210, 225, 240, 255, 270};
}

inline std::vector<double> acceptance_yaws() {
  std::vector<double> y;
  for (int i = 0; i < 8; ++i) y.push_back(22.5 * i);
  return y;
}

inline CameraRig rig_preset(const std::string& name, double radius_m = 6.0,
                            double focal_px = 1000.0, int k = 4) {
  if (name == "casia-like") return circle_rig(casia_like_yaws(), radius_m, focal_px);
  if (name == "ou-like") return circle_rig(ou_like_yaws(), radius_m, focal_px);
  if (name == "acceptance") return circle_rig(acceptance_yaws(), radius_m, focal_px);
  if (name.rfind("cocentered", 0) == 0) {
    if (name.size() > 11 && name[10] == '-') k = std::stoi(name.substr(11));
    return cocentered_rig(k, radius_m, focal_px);
  }
  throw ConfigError("unknown rig preset '" + name + "'");
}

// ------------------------------------------------------------ rig kv io

inline KvFile rig_to_kv(const CameraRig& rig) {
  KvFile kv;
  kv.set("kind", rig.kind);
  kv.set("target", fmt_double(rig.target.x()) + "," + fmt_double(rig.target.y()) +
                       "," + fmt_double(rig.target.z()));
  kv.set_int("views", static_cast<long long>(rig.views.size()));
  for (std::size_t i = 0; i < rig.views.size(); ++i) {
    const auto& v = rig.views[i];
    const std::string p = "view." + std::to_string(i) + ".";
    kv.set(p + "name", v.name);
    kv.set_double(p + "yaw_degrees", v.yaw_degrees);
    kv.set(p + "center_xyz", fmt_double(v.center.x()) + "," +
                                 fmt_double(v.center.y()) + "," +
                                 fmt_double(v.center.z()));
    kv.set_double(p + "focal_px", v.focal_px);
    kv.set(p + "principal_point", fmt_double(v.principal_point.x()) + "," +
                                      fmt_double(v.principal_point.y()));
  }
  return kv;
}

inline CameraRig rig_from_kv(const KvFile& kv) {
  CameraRig rig;
  rig.kind = kv.get("kind");
  auto tgt = split(kv.get("target"), ',');
  rig.target = Eigen::Vector3d(std::stod(tgt[0]), std::stod(tgt[1]),
                               std::stod(tgt[2]));
  const int n = static_cast<int>(kv.get_int("views"));
  for (int i = 0; i < n; ++i) {
    const std::string p = "view." + std::to_string(i) + ".";
    RigView v;
    v.name = kv.get(p + "name");
    v.yaw_degrees = kv.get_double(p + "yaw_degrees");
    auto c = split(kv.get(p + "center_xyz"), ',');
    v.center = Eigen::Vector3d(std::stod(c[0]), std::stod(c[1]), std::stod(c[2]));
    v.focal_px = kv.get_double(p + "focal_px");
    auto pp = split(kv.get(p + "principal_point"), ',');
    v.principal_point = Eigen::Vector2d(std::stod(pp[0]), std::stod(pp[1]));
    rig.views.push_back(v);
  }
  // Rebuild extrinsics the same way the builders do.
  if (rig.kind == "cocentered") {
    const CameraExtrinsics base =
        CameraExtrinsics::look_at(rig.views[0].center, rig.target);
    for (auto& v : rig.views) {
      const double a = v.yaw_degrees * M_PI / 180.0;
      Eigen::Matrix3d rz;
      rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
      v.extrinsics.rotation = base.rotation * rz;
      v.extrinsics.translation = -v.extrinsics.rotation * v.center;
    }
  } else {
    for (auto& v : rig.views)
      v.extrinsics = CameraExtrinsics::look_at(v.center, rig.target);
  }
  rig.validate();
  return rig;
}

// --------------------------------------------------- Lemma-1 residual probe

struct ViewPairResidual {
  double yaw_a = 0.0;
  double yaw_b = 0.0;
  double oracle_residual = 0.0;      // ||Q*Ma - Mb||_F
  double mean_joint_error = 0.0;     // px, transformed vs true projection
  double max_joint_error = 0.0;
};

// How closely the single-matrix view transform holds for a given rig:
// for every ordered view pair, the oracle residual plus the 2D joint error
// of the transformed pose against the true target-view projection.
inline std::vector<ViewPairResidual> lemma1_residual(
    const CameraRig& rig,
    const std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>>& walk3d) {
  std::vector<ViewPairResidual> report;
  if (rig.views.size() < 2) return report;
  std::vector<ProjectionMatrix> proj;
  for (const auto& v : rig.views) proj.push_back(v.projection());
  for (std::size_t a = 0; a < rig.views.size(); ++a) {
    for (std::size_t b = 0; b < rig.views.size(); ++b) {
      if (a == b) continue;
      ViewPairResidual r;
      r.yaw_a = rig.views[a].yaw_degrees;
      r.yaw_b = rig.views[b].yaw_degrees;
      const ViewTransform vt = oracle_view_transform(proj[a], proj[b]);
      r.oracle_residual = vt.residual;
      double sum = 0.0;
      long count = 0;
      for (const auto& pts : walk3d) {
        const auto pa = project(pts, proj[a]);
        const auto pb = project(pts, proj[b]);
        const Eigen::Matrix<double, Eigen::Dynamic, 3> qa =
            (vt.q * pa.transpose()).transpose();
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
          const double ax = qa(i, 0) / qa(i, 2), ay = qa(i, 1) / qa(i, 2);
          const double bx = pb(i, 0) / pb(i, 2), by = pb(i, 1) / pb(i, 2);
          const double err = std::hypot(ax - bx, ay - by);
          sum += err;
          r.max_joint_error = std::max(r.max_joint_error, err);
          ++count;
        }
      }
      r.mean_joint_error = count ? sum / static_cast<double>(count) : 0.0;
      report.push_back(r);
    }
  }
  return report;
}

}  // namespace gaitview

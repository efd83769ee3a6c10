#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gaitview/camera.hpp"
#include "gaitview/dataset.hpp"
#include "gaitview/skeleton.hpp"

namespace gaitview {

// Parametric 3D walking skeletons projected through a camera rig. The
// walker is treadmill-style (no net translation) so every rig view keeps
// the subject framed and trajectories are exactly periodic at the cadence.
// Limbs are posed by two-link kinematics in the torso frame, so all 19
// canonical bone lengths are conserved bit-for-bit until noise is added.

struct WalkerParams {
  // segment lengths, meters
  double thigh_m = 0.44;
  double shin_m = 0.42;
  double torso_m = 0.48;
  double neck_m = 0.10;
  double upper_arm_m = 0.30;
  double forearm_m = 0.26;
  double shoulder_halfwidth_m = 0.19;
  double hip_halfwidth_m = 0.14;
  double head_scale = 1.0;  // scales the rigid face-landmark offsets

  // gait
  double stride_m = 1.3;       // nominal meters per cycle (labels the identity)
  double cadence_hz = 1.0;     // gait cycles per second
  double phase = 0.0;          // radians
  double arm_swing_rad = 0.45;
  double leg_swing_rad = 0.40;
  double knee_amp_rad = 0.5;
  double torso_lean_rad = 0.06;
  double torso_yaw_rad = 0.10;     // rigid torso yaw oscillation
  double bob_amp_m = 0.02;         // pelvis bob at twice the cadence
  double arm_swing_right_factor = 1.0;  // BG carries on the right side
  double noise_std_m = 0.0;        // per-joint Gaussian jitter

  void validate() const {
    const double lengths[] = {thigh_m, shin_m, torso_m, neck_m, upper_arm_m,
                              forearm_m, shoulder_halfwidth_m, hip_halfwidth_m,
                              head_scale};
    for (double l : lengths)
      if (!(l > 0.0)) throw ConfigError("walker: lengths must be positive");
    const double amps[] = {arm_swing_rad, leg_swing_rad, knee_amp_rad,
                           torso_lean_rad, torso_yaw_rad};
    for (double a : amps)
      if (a < 0.0 || a > M_PI / 2)
        throw ConfigError("walker: amplitudes must lie in [0, pi/2]");
    if (noise_std_m < 0.0) throw ConfigError("walker: noise_std_m < 0");
    if (!(cadence_hz > 0.0)) throw ConfigError("walker: cadence must be > 0");
  }
};

inline constexpr double kSynthFps = 30.0;

// T x 17 x 3 world trajectories (COCO joint order), deterministic given
// the seed. Facing +x, z up.
inline std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> synth_walk_3d(
    const WalkerParams& p, int frames, std::uint64_t seed,
    double fps = kSynthFps) {
  if (frames < 1) throw ConfigError("synth_walk_3d: frames < 1");
  p.validate();
  Rng noise_rng = Rng(seed).split("joint-noise");

  const double hip_h = p.thigh_m + p.shin_m;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> out;
  out.reserve(static_cast<std::size_t>(frames));

  for (int t = 0; t < frames; ++t) {
    const double ph = 2.0 * M_PI * p.cadence_hz * (t / fps) + p.phase;
    const double yaw = p.torso_yaw_rad * std::sin(ph);
    const Eigen::Vector3d bx(std::cos(yaw), std::sin(yaw), 0);  // body forward
    const Eigen::Vector3d by(-std::sin(yaw), std::cos(yaw), 0); // body left
    const Eigen::Vector3d bz(0, 0, 1);

    const Eigen::Vector3d pelvis(0, 0,
                                 hip_h + p.bob_amp_m * std::sin(2.0 * ph));
    const Eigen::Vector3d shoulder_c =
        pelvis + p.torso_m * (std::sin(p.torso_lean_rad) * bx +
                              std::cos(p.torso_lean_rad) * bz);
    const Eigen::Vector3d nose =
        shoulder_c + p.neck_m * bz + 0.06 * p.head_scale * bx;

    Eigen::Matrix<double, Eigen::Dynamic, 3> j(17, 3);
    auto set = [&](int idx, const Eigen::Vector3d& v) {
      j.row(idx) = v.transpose();
    };

    // rigid head landmarks around the nose
    set(0, nose);
    set(1, nose + p.head_scale * (-0.02 * bx + 0.033 * by + 0.030 * bz));
    set(2, nose + p.head_scale * (-0.02 * bx - 0.033 * by + 0.030 * bz));
    set(3, nose + p.head_scale * (-0.07 * bx + 0.072 * by + 0.025 * bz));
    set(4, nose + p.head_scale * (-0.07 * bx - 0.072 * by + 0.025 * bz));

    const Eigen::Vector3d sh_l = shoulder_c + p.shoulder_halfwidth_m * by;
    const Eigen::Vector3d sh_r = shoulder_c - p.shoulder_halfwidth_m * by;
    const Eigen::Vector3d hip_l = pelvis + p.hip_halfwidth_m * by;
    const Eigen::Vector3d hip_r = pelvis - p.hip_halfwidth_m * by;
    set(5, sh_l);
    set(6, sh_r);
    set(11, hip_l);
    set(12, hip_r);

    // two-link swing in the body sagittal plane: angle from the downward
    // vertical, positive forward
    auto swing = [&](const Eigen::Vector3d& origin, double len,
                     double angle) -> Eigen::Vector3d {
      return origin + len * (std::sin(angle) * bx - std::cos(angle) * bz);
    };

    const double leg_l = p.leg_swing_rad * std::sin(ph);
    const double leg_r = p.leg_swing_rad * std::sin(ph + M_PI);
    const double knee_l = p.knee_amp_rad * 0.5 * (1.0 + std::sin(ph));
    const double knee_r = p.knee_amp_rad * 0.5 * (1.0 + std::sin(ph + M_PI));
    const Eigen::Vector3d knee_l_pos = swing(hip_l, p.thigh_m, leg_l);
    const Eigen::Vector3d knee_r_pos = swing(hip_r, p.thigh_m, leg_r);
    set(13, knee_l_pos);
    set(14, knee_r_pos);
    set(15, swing(knee_l_pos, p.shin_m, leg_l - knee_l));
    set(16, swing(knee_r_pos, p.shin_m, leg_r - knee_r));

    // arms counter-phase to the same-side leg; fixed elbow flexion
    const double elbow_flex = 0.35;
    const double arm_l = p.arm_swing_rad * std::sin(ph + M_PI);
    const double arm_r =
        p.arm_swing_rad * p.arm_swing_right_factor * std::sin(ph);
    const Eigen::Vector3d elbow_l = swing(sh_l, p.upper_arm_m, arm_l);
    const Eigen::Vector3d elbow_r = swing(sh_r, p.upper_arm_m, arm_r);
    set(7, elbow_l);
    set(8, elbow_r);
    set(9, swing(elbow_l, p.forearm_m, arm_l + elbow_flex));
    set(10, swing(elbow_r, p.forearm_m, arm_r + elbow_flex));

    if (p.noise_std_m > 0.0)
      for (Eigen::Index r = 0; r < 17; ++r)
        for (Eigen::Index c = 0; c < 3; ++c)
          j(r, c) += p.noise_std_m * noise_rng.normal();

    out.push_back(std::move(j));
  }
  return out;
}

// Project one 3D walk through every rig view; the outputs share frame
// count and are frame-aligned by construction.
inline std::vector<PoseSequence> render_views(
    const std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>>& walk3d,
    const CameraRig& rig) {
  rig.validate();
  std::vector<PoseSequence> out;
  for (const auto& view : rig.views) {
    const ProjectionMatrix proj = view.projection();
    PoseSequence seq;
    seq.coords.reserve(walk3d.size());
    for (const auto& pts : walk3d) seq.coords.push_back(project(pts, proj));
    seq.confidence = Eigen::MatrixXd::Ones(
        static_cast<Eigen::Index>(walk3d.size()), walk3d.empty() ? 0 : walk3d[0].rows());
    out.push_back(normalize_homogeneous(seq));
  }
  return out;
}

// ---------------------------------------------------------- identity model

// Documented per-identity sampling ranges; recorded in the manifest.
struct WalkerRanges {
  double thigh[2] = {0.38, 0.48};
  double shin[2] = {0.36, 0.46};
  double torso[2] = {0.42, 0.52};
  double neck[2] = {0.08, 0.12};
  double upper_arm[2] = {0.26, 0.33};
  double forearm[2] = {0.23, 0.30};
  double shoulder_hw[2] = {0.17, 0.22};
  double hip_hw[2] = {0.12, 0.16};
  double head_scale[2] = {0.9, 1.1};
  double cadence[2] = {0.8, 1.2};
  double stride[2] = {1.1, 1.6};
  double arm_swing[2] = {0.30, 0.60};
  double knee_amp[2] = {0.35, 0.65};
  double torso_lean[2] = {0.02, 0.12};
  double torso_yaw[2] = {0.05, 0.15};
  double bob[2] = {0.01, 0.03};
  double base_noise_m = 0.003;  // detector-jitter proxy on every sample
};

inline WalkerParams sample_walker(Rng& rng, const WalkerRanges& r = {}) {
  WalkerParams p;
  auto u = [&](const double range[2]) { return rng.uniform(range[0], range[1]); };
  p.thigh_m = u(r.thigh);
  p.shin_m = u(r.shin);
  p.torso_m = u(r.torso);
  p.neck_m = u(r.neck);
  p.upper_arm_m = u(r.upper_arm);
  p.forearm_m = u(r.forearm);
  p.shoulder_halfwidth_m = u(r.shoulder_hw);
  p.hip_halfwidth_m = u(r.hip_hw);
  p.head_scale = u(r.head_scale);
  p.cadence_hz = u(r.cadence);
  p.stride_m = u(r.stride);
  p.arm_swing_rad = u(r.arm_swing);
  p.knee_amp_rad = u(r.knee_amp);
  p.torso_lean_rad = u(r.torso_lean);
  p.torso_yaw_rad = u(r.torso_yaw);
  p.bob_amp_m = u(r.bob);
  p.noise_std_m = r.base_noise_m;
  // leg swing realizes the sampled stride on this identity's legs
  const double leg = p.thigh_m + p.shin_m;
  p.leg_swing_rad =
      std::min(M_PI / 4, std::asin(std::min(0.95, p.stride_m / (4.0 * leg))) * 2.0);
  return p;
}

// Walking-condition proxies: BG pins one arm (carrying), CL shrinks both
// limb amplitudes and adds jitter (clothing occlusion).
inline WalkerParams condition_adjust(WalkerParams p, Condition c) {
  switch (c) {
    case Condition::NM:
      break;
    case Condition::BG:
      p.arm_swing_right_factor = 0.25;
      break;
    case Condition::CL:
      p.arm_swing_rad *= 0.7;
      p.leg_swing_rad *= 0.7;
      p.noise_std_m += 0.01;
      break;
  }
  return p;
}

// ------------------------------------------------------------ make_dataset

struct SynthOptions {
  int n_identities = 2;
  std::vector<Condition> conditions = {Condition::NM};
  int runs = 1;
  int frames = 60;
  double fps = kSynthFps;
  std::uint64_t seed = 1;
  WalkerRanges ranges;
};

inline std::vector<GaitSample> synth_records(const SynthOptions& opt,
                                             const CameraRig& rig) {
  if (opt.n_identities < 2) throw ConfigError("make_dataset: need >= 2 identities");
  rig.validate();
  const Rng root(opt.seed);
  std::vector<GaitSample> records;
  for (int id = 0; id < opt.n_identities; ++id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "id%03d", id);
    const std::string id_name(buf);
    Rng id_rng = root.split("identity").split(static_cast<std::uint64_t>(id));
    const WalkerParams base = sample_walker(id_rng, opt.ranges);
    for (Condition cond : opt.conditions) {
      for (int run = 0; run < opt.runs; ++run) {
        Rng run_rng = id_rng.split(condition_name(cond)).split(
            static_cast<std::uint64_t>(run));
        WalkerParams p = condition_adjust(base, cond);
        p.phase = run_rng.uniform(0.0, 2.0 * M_PI);
        const auto walk =
            synth_walk_3d(p, opt.frames, run_rng.bits(), opt.fps);
        const auto views = render_views(walk, rig);
        const std::string group =
            id_name + "|" + condition_name(cond) + "|r" + std::to_string(run);
        for (std::size_t v = 0; v < views.size(); ++v) {
          GaitSample s;
          s.identity = id_name;
          s.view_degrees = rig.views[v].yaw_degrees;
          s.condition = cond;
          s.run = run;
          s.aligned_group = group;
          s.sequence = views[v];
          records.push_back(std::move(s));
        }
      }
    }
  }
  std::sort(records.begin(), records.end(),
            [](const GaitSample& a, const GaitSample& b) {
              if (a.identity != b.identity) return a.identity < b.identity;
              if (a.condition != b.condition) return a.condition < b.condition;
              if (a.view_degrees != b.view_degrees)
                return a.view_degrees < b.view_degrees;
              return a.run < b.run;
            });
  return records;
}

inline KvFile make_dataset(const SynthOptions& opt, const CameraRig& rig,
                           const std::string& records_path,
                           const std::string& manifest_path) {
  const auto records = synth_records(opt, rig);
  save_dataset(records, records_path);
  KvFile manifest = build_manifest(records, opt.seed);
  manifest.set_int("frames", opt.frames);
  manifest.set_double("fps", opt.fps);
  manifest.set_int("runs", opt.runs);
  const KvFile rigkv = rig_to_kv(rig);
  for (const auto& [k, v] : rigkv.items()) manifest.set("rig." + k, v);
  const WalkerRanges& r = opt.ranges;
  auto rg = [](const double v[2]) {
    return fmt_double(v[0]) + "-" + fmt_double(v[1]);
  };
  manifest.set("walker_ranges",
               "thigh:" + rg(r.thigh) + " shin:" + rg(r.shin) + " torso:" +
                   rg(r.torso) + " cadence:" + rg(r.cadence) + " stride:" +
                   rg(r.stride) + " arm_swing:" + rg(r.arm_swing) +
                   " base_noise_m:" + fmt_double(r.base_noise_m));
  manifest.save(manifest_path);
  return manifest;
}

inline CameraRig rig_from_manifest(const KvFile& manifest) {
  KvFile rigkv;
  for (const auto& [k, v] : manifest.items())
    if (k.rfind("rig.", 0) == 0) rigkv.set(k.substr(4), v);
  return rig_from_kv(rigkv);
}

}  // namespace gaitview

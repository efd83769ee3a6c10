#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gaitview/common.hpp"
#include "gaitview/kvfile.hpp"
#include "gaitview/skeleton.hpp"

namespace gaitview {

// Line-delimited dataset format shared by the synthetic generator, the
// keypoint importer and the training tools. One GaitSample per line:
//   {"id","view_deg","cond","run","aligned_group","frames":[[[x,y,c]x17]xT]}
// Generated records carry {"generated":true,"source_view":...} provenance.
// The writer formats floats with shortest round-trip digits, so
// save -> load -> save is byte-identical.

enum class Condition { NM, BG, CL };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::NM: return "NM";
    case Condition::BG: return "BG";
    case Condition::CL: return "CL";
  }
  return "NM";
}

inline Condition condition_from(const std::string& s) {
  if (s == "NM") return Condition::NM;
  if (s == "BG") return Condition::BG;
  if (s == "CL") return Condition::CL;
  throw DataError("unknown condition '" + s + "'");
}

struct GaitSample {
  std::string identity;
  double view_degrees = 0.0;
  Condition condition = Condition::NM;
  int run = 0;
  std::string aligned_group;
  bool generated = false;
  double source_view = 0.0;
  PoseSequence sequence;  // normalized homogeneous (w == 1)
};

inline std::string sample_key(const GaitSample& s) {
  return s.identity + "|" + condition_name(s.condition) + "|r" +
         std::to_string(s.run) + "|v" + fmt_double(s.view_degrees);
}

// ------------------------------------------------------------- JSONL io

inline std::string serialize_sample(const GaitSample& s) {
  std::string out;
  out.reserve(64 + s.sequence.frames() * s.sequence.joints() * 24);
  out += "{\"id\":\"" + s.identity + "\",\"view_deg\":" +
         fmt_double(s.view_degrees) + ",\"cond\":\"" +
         condition_name(s.condition) + "\",\"run\":" + std::to_string(s.run);
  if (!s.aligned_group.empty())
    out += ",\"aligned_group\":\"" + s.aligned_group + "\"";
  if (s.generated)
    out += ",\"generated\":true,\"source_view\":" + fmt_double(s.source_view);
  out += ",\"frames\":[";
  for (int t = 0; t < s.sequence.frames(); ++t) {
    if (t) out += ",";
    out += "[";
    const auto& fr = s.sequence.coords[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < fr.rows(); ++i) {
      if (i) out += ",";
      out += "[" + fmt_double(fr(i, 0)) + "," + fmt_double(fr(i, 1)) + "," +
             fmt_double(s.sequence.confidence(t, i)) + "]";
    }
    out += "]";
  }
  out += "]}";
  return out;
}

inline void save_dataset(const std::vector<GaitSample>& records,
                         const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  for (const auto& r : records) f << serialize_sample(r) << "\n";
}

inline GaitSample parse_sample(const std::string& line, long line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw ParseError(std::string("dataset: invalid JSON: ") + e.what(), line_no);
  }
  GaitSample s;
  try {
    s.identity = j.at("id").get<std::string>();
    s.view_degrees = j.at("view_deg").get<double>();
    s.condition = condition_from(j.at("cond").get<std::string>());
    s.run = j.value("run", 0);
    s.aligned_group = j.value("aligned_group", std::string());
    s.generated = j.value("generated", false);
    s.source_view = j.value("source_view", 0.0);
    const auto& frames = j.at("frames");
    if (!frames.is_array() || frames.empty())
      throw DataError("empty frames array");
    const std::size_t n = frames[0].size();
    s.sequence.coords.reserve(frames.size());
    s.sequence.confidence.resize(static_cast<Eigen::Index>(frames.size()),
                                 static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto& fr = frames[t];
      if (fr.size() != n) throw DataError("ragged frame");
      Eigen::Matrix<double, Eigen::Dynamic, 3> m(static_cast<Eigen::Index>(n), 3);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& joint = fr[i];
        if (!joint.is_array() || joint.size() < 2 || joint.size() > 3)
          throw DataError("joint must be [x,y] or [x,y,conf]");
        m(static_cast<Eigen::Index>(i), 0) = joint[0].get<double>();
        m(static_cast<Eigen::Index>(i), 1) = joint[1].get<double>();
        m(static_cast<Eigen::Index>(i), 2) = 1.0;
        s.sequence.confidence(static_cast<Eigen::Index>(t),
                              static_cast<Eigen::Index>(i)) =
            joint.size() == 3 ? joint[2].get<double>() : 1.0;
      }
      s.sequence.coords.push_back(std::move(m));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("dataset: bad record: ") + e.what(), line_no);
  }
  return s;
}

inline std::vector<GaitSample> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::vector<GaitSample> out;
  std::string line;
  long line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(parse_sample(line, line_no));
  }
  return out;
}

// ------------------------------------------------------------- manifest

inline KvFile build_manifest(const std::vector<GaitSample>& records,
                             std::uint64_t seed) {
  std::set<std::string> ids;
  std::set<double> views;
  std::set<std::string> conds;
  for (const auto& r : records) {
    ids.insert(r.identity);
    views.insert(r.view_degrees);
    conds.insert(condition_name(r.condition));
  }
  KvFile kv;
  kv.set("format_version", "1");
  kv.set_int("record_count", static_cast<long long>(records.size()));
  kv.set_int("identity_count", static_cast<long long>(ids.size()));
  std::string vl;
  for (double v : views) vl += (vl.empty() ? "" : ",") + fmt_double(v);
  kv.set("view_list", vl);
  std::string cl;
  for (const auto& c : conds) cl += (cl.empty() ? "" : ",") + c;
  kv.set("condition_list", cl);
  kv.set_int("seed", static_cast<long long>(seed));
  return kv;
}

// --------------------------------------------------------- CSV importer
//
// Accepts detector dumps: header `id,view_deg,cond,frame,j0x,j0y,j0c,...`
// with either 2 or 3 columns per joint (confidence defaults to 1 when the
// c columns are absent). Consecutive rows with the same (id, view, cond)
// and increasing frame index form one sequence.
inline std::vector<GaitSample> import_keypoints(
    const std::string& path, double fps,
    const std::map<std::string, std::string>& id_map = {}) {
  (void)fps;  // recorded by the caller in the manifest
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  long line_no = 0;
  if (!std::getline(f, line)) throw DataError("importer: empty file");
  ++line_no;
  auto header = split(trim(line), ',');
  if (header.size() < 4 || header[0] != "id" || header[1] != "view_deg" ||
      header[2] != "cond" || header[3] != "frame")
    throw ParseError("importer: header must start id,view_deg,cond,frame",
                     line_no);
  const std::size_t joint_cols = header.size() - 4;
  bool with_conf = false;
  std::size_t joints = 0;
  if (joint_cols % 3 == 0 && header.back().back() == 'c') {
    with_conf = true;
    joints = joint_cols / 3;
  } else if (joint_cols % 2 == 0) {
    joints = joint_cols / 2;
  } else {
    throw ParseError("importer: joint columns must be (x,y) or (x,y,c) groups",
                     line_no);
  }
  if (joints != 17)
    throw ParseError("importer: expected 17 keypoints, header declares " +
                         std::to_string(joints),
                     line_no);

  std::vector<GaitSample> out;
  std::string cur_key;
  long prev_frame = -1;
  GaitSample cur;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> coords;
  std::vector<Eigen::VectorXd> confs;

  auto flush = [&]() {
    if (coords.empty()) return;
    cur.sequence.coords = coords;
    cur.sequence.confidence.resize(static_cast<Eigen::Index>(confs.size()), 17);
    for (std::size_t t = 0; t < confs.size(); ++t)
      cur.sequence.confidence.row(static_cast<Eigen::Index>(t)) =
          confs[t].transpose();
    out.push_back(cur);
    coords.clear();
    confs.clear();
  };

  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split(trim(line), ',');
    if (cols.size() != header.size())
      throw ParseError("importer: row has " + std::to_string(cols.size()) +
                           " fields, header has " +
                           std::to_string(header.size()),
                       line_no);
    std::string id = cols[0];
    if (auto it = id_map.find(id); it != id_map.end()) id = it->second;
    bool ok = true;
    const double view = parse_double(cols[1], ok);
    if (!ok) throw ParseError("importer: bad view_deg", line_no);
    const Condition cond = condition_from(cols[2]);
    const long frame = std::stol(cols[3]);
    const std::string key = id + "|" + cols[1] + "|" + cols[2];
    if (key != cur_key || frame <= prev_frame) {
      flush();
      cur_key = key;
      cur = GaitSample{};
      cur.identity = id;
      cur.view_degrees = view;
      cur.condition = cond;
    }
    prev_frame = frame;
    Eigen::Matrix<double, Eigen::Dynamic, 3> m(17, 3);
    Eigen::VectorXd c(17);
    const std::size_t stride = with_conf ? 3 : 2;
    for (std::size_t i = 0; i < 17; ++i) {
      const double x = parse_double(cols[4 + i * stride], ok);
      if (!ok) throw ParseError("importer: bad coordinate", line_no);
      const double y = parse_double(cols[4 + i * stride + 1], ok);
      if (!ok) throw ParseError("importer: bad coordinate", line_no);
      m(static_cast<Eigen::Index>(i), 0) = x;
      m(static_cast<Eigen::Index>(i), 1) = y;
      m(static_cast<Eigen::Index>(i), 2) = 1.0;
      if (with_conf) {
        const double cv = parse_double(cols[4 + i * stride + 2], ok);
        if (!ok) throw ParseError("importer: bad confidence", line_no);
        c(static_cast<Eigen::Index>(i)) = cv;
      } else {
        c(static_cast<Eigen::Index>(i)) = 1.0;
      }
    }
    coords.push_back(std::move(m));
    confs.push_back(std::move(c));
  }
  flush();
  return out;
}

// ----------------------------------------------------------- augmentation

// Pooled coordinate scale of a sequence (shared by x and y so aspect is
// preserved).
inline double sequence_scale(const PoseSequence& seq) {
  double sx = 0, sy = 0, sxx = 0, syy = 0;
  long n = 0;
  for (const auto& fr : seq.coords) {
    sx += fr.col(0).sum();
    sy += fr.col(1).sum();
    sxx += fr.col(0).squaredNorm();
    syy += fr.col(1).squaredNorm();
    n += fr.rows();
  }
  const double mx = sx / n, my = sy / n;
  const double var = (sxx / n - mx * mx + syy / n - my * my) / 2.0;
  return std::sqrt(std::max(var, 0.0));
}

// Contiguous random temporal crop to target_T (loop-padded when shorter,
// gait being periodic) plus Gaussian coordinate noise scaled to the
// sequence's own spread, i.e. noise_std is in standardized units.
inline PoseSequence augment(const PoseSequence& seq, int target_T,
                            double noise_std, Rng rng) {
  const int t_in = seq.frames();
  PoseSequence out;
  if (t_in >= target_T) {
    const int start =
        static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t_in - target_T + 1)));
    out.coords.assign(seq.coords.begin() + start,
                      seq.coords.begin() + start + target_T);
    out.confidence = seq.confidence.middleRows(start, target_T);
  } else {
    out.coords.resize(static_cast<std::size_t>(target_T));
    out.confidence.resize(target_T, seq.joints());
    for (int t = 0; t < target_T; ++t) {
      out.coords[static_cast<std::size_t>(t)] =
          seq.coords[static_cast<std::size_t>(t % t_in)];
      out.confidence.row(t) = seq.confidence.row(t % t_in);
    }
  }
  if (noise_std > 0.0) {
    const double s = sequence_scale(out) * noise_std;
    for (auto& fr : out.coords)
      for (Eigen::Index i = 0; i < fr.rows(); ++i) {
        fr(i, 0) += s * rng.normal();
        fr(i, 1) += s * rng.normal();
      }
  }
  return out;
}

// ------------------------------------------------------------ PK sampler

// Batches of exactly P identities x K sequences, the composition the
// supervised contrastive loss requires. Deterministic given the seed.
class PkSampler {
public:
  PkSampler(const std::vector<GaitSample>& records, int p, int k,
            std::uint64_t seed)
      : p_(p), k_(k), seed_(seed) {
    if (p < 2 || k < 2)
      throw BatchCompositionError("PK sampler: need P >= 2 and K >= 2");
    std::map<std::string, std::vector<int>> by_id;
    for (std::size_t i = 0; i < records.size(); ++i)
      by_id[records[i].identity].push_back(static_cast<int>(i));
    for (auto& [id, idx] : by_id) {
      if (static_cast<int>(idx.size()) < k)
        throw BatchCompositionError("PK sampler: identity '" + id + "' has " +
                                    std::to_string(idx.size()) +
                                    " sequences, needs >= " + std::to_string(k));
      ids_.push_back(id);
      groups_.push_back(idx);
    }
    if (static_cast<int>(ids_.size()) < p)
      throw BatchCompositionError(
          "PK sampler: dataset has " + std::to_string(ids_.size()) +
          " identities, needs >= " + std::to_string(p));
  }

  // All batches for one epoch; each batch holds P*K record indices.
  std::vector<std::vector<int>> epoch(int epoch_index) const {
    Rng rng = Rng(seed_).split("epoch").split(
        static_cast<std::uint64_t>(epoch_index));
    std::vector<int> order(groups_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    const std::size_t nb = groups_.size() / static_cast<std::size_t>(p_);
    for (std::size_t b = 0; b < nb; ++b) {
      std::vector<int> batch;
      for (int pi = 0; pi < p_; ++pi) {
        const auto& g =
            groups_[static_cast<std::size_t>(order[b * static_cast<std::size_t>(p_) +
                                                   static_cast<std::size_t>(pi)])];
        std::vector<int> idx = g;
        rng.shuffle(idx);
        for (int ki = 0; ki < k_; ++ki) batch.push_back(idx[static_cast<std::size_t>(ki)]);
      }
      batches.push_back(std::move(batch));
    }
    return batches;
  }

  int identities() const { return static_cast<int>(ids_.size()); }

private:
  int p_, k_;
  std::uint64_t seed_;
  std::vector<std::string> ids_;
  std::vector<std::vector<int>> groups_;
};

}  // namespace gaitview

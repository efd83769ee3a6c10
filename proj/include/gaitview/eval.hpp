#pragma once

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gaitview/dataset.hpp"
#include "gaitview/lugan.hpp"

namespace gaitview {

// Gallery/probe rank-1 evaluation in the usual cross-view layout (one row
// per probe condition, one column per probe view, mean at the end), plus
// MPJPE against aligned synthetic ground truth for generation quality.

struct EmbeddingRecord {
  std::string identity;
  double view_degrees = 0.0;
  Condition condition = Condition::NM;
  int run = 0;
  Eigen::VectorXd vector;  // unit norm
};

enum class SameViewPolicy { include, exclude, both };

inline const char* policy_name(SameViewPolicy p) {
  switch (p) {
    case SameViewPolicy::include: return "include";
    case SameViewPolicy::exclude: return "exclude";
    case SameViewPolicy::both: return "both";
  }
  return "both";
}

struct EvalProtocol {
  Condition gallery_condition = Condition::NM;
  std::vector<int> gallery_runs = {0};
  std::vector<Condition> probe_conditions = {Condition::NM, Condition::BG,
                                             Condition::CL};
  std::vector<double> view_list;
  SameViewPolicy same_view_policy = SameViewPolicy::both;

  bool in_gallery(const EmbeddingRecord& r) const {
    if (r.condition != gallery_condition) return false;
    for (int run : gallery_runs)
      if (r.run == run) return true;
    return false;
  }
  bool in_probe(const EmbeddingRecord& r, Condition c) const {
    if (r.condition != c) return false;
    return !in_gallery(r);  // gallery and probe sets never overlap
  }
};

struct Rank1Row {
  Condition probe_condition = Condition::NM;
  SameViewPolicy policy = SameViewPolicy::include;
  std::vector<double> per_view;  // aligned with protocol view_list
  double mean = 0.0;
};

// Nearest gallery neighbour by cosine distance on unit embeddings.
inline std::vector<Rank1Row> rank1_matrix(
    const std::vector<EmbeddingRecord>& embeddings, const EvalProtocol& proto) {
  std::vector<const EmbeddingRecord*> gallery;
  std::set<std::string> gallery_ids;
  for (const auto& e : embeddings)
    if (proto.in_gallery(e)) {
      gallery.push_back(&e);
      gallery_ids.insert(e.identity);
    }
  if (gallery.empty()) throw DataError("rank1: empty gallery");

  std::vector<SameViewPolicy> policies;
  if (proto.same_view_policy == SameViewPolicy::both)
    policies = {SameViewPolicy::include, SameViewPolicy::exclude};
  else
    policies = {proto.same_view_policy};

  std::vector<Rank1Row> rows;
  for (Condition cond : proto.probe_conditions) {
    for (SameViewPolicy pol : policies) {
      Rank1Row row;
      row.probe_condition = cond;
      row.policy = pol;
      double total_acc = 0.0;
      int views_counted = 0;
      for (double view : proto.view_list) {
        long correct = 0, total = 0;
        for (const auto& e : embeddings) {
          if (!proto.in_probe(e, cond) ||
              std::abs(e.view_degrees - view) > 1e-9)
            continue;
          if (!gallery_ids.count(e.identity))
            throw DataError("rank1: probe identity '" + e.identity +
                            "' absent from gallery");
          double best = -2.0;
          const EmbeddingRecord* best_g = nullptr;
          for (const auto* g : gallery) {
            if (pol == SameViewPolicy::exclude &&
                std::abs(g->view_degrees - view) < 1e-9)
              continue;
            const double dot = g->vector.dot(e.vector);
            if (dot > best) {
              best = dot;
              best_g = g;
            }
          }
          if (!best_g) continue;  // all gallery views excluded
          ++total;
          if (best_g->identity == e.identity) ++correct;
        }
        const double acc =
            total ? static_cast<double>(correct) / static_cast<double>(total)
                  : 0.0;
        row.per_view.push_back(acc);
        if (total) {
          total_acc += acc;
          ++views_counted;
        }
      }
      row.mean = views_counted ? total_acc / views_counted : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Mean per-joint position error over frames and joints of the normalized
// (x, y) coordinates.
inline double mpjpe(const PoseSequence& generated, const PoseSequence& reference) {
  if (generated.frames() != reference.frames() ||
      generated.joints() != reference.joints())
    throw ContractError("mpjpe: shape mismatch");
  double sum = 0.0;
  long count = 0;
  for (int t = 0; t < generated.frames(); ++t) {
    const auto& a = generated.coords[static_cast<std::size_t>(t)];
    const auto& b = reference.coords[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      sum += std::hypot(a(i, 0) - b(i, 0), a(i, 1) - b(i, 1));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

// --------------------------------------------------------------- reporting

inline std::string rank1_csv(const std::vector<Rank1Row>& rows,
                             const std::vector<double>& view_list) {
  std::string out = "probe_condition,probe_view,policy,accuracy\n";
  for (const auto& r : rows) {
    for (std::size_t v = 0; v < r.per_view.size(); ++v)
      out += std::string(condition_name(r.probe_condition)) + "," +
             fmt_double(view_list[v]) + "," + policy_name(r.policy) + "," +
             fmt_double(r.per_view[v]) + "\n";
    out += std::string(condition_name(r.probe_condition)) + ",mean," +
           policy_name(r.policy) + "," + fmt_double(r.mean) + "\n";
  }
  return out;
}

inline std::string rank1_table(const std::vector<Rank1Row>& rows,
                               const std::vector<double>& view_list,
                               const EvalProtocol& proto) {
  std::ostringstream os;
  os << "Gallery " << condition_name(proto.gallery_condition) << "#";
  for (std::size_t i = 0; i < proto.gallery_runs.size(); ++i)
    os << (i ? "," : "") << proto.gallery_runs[i] + 1;
  os << "\n";
  os << std::left << std::setw(14) << "Probe";
  for (double v : view_list) os << std::right << std::setw(7) << fmt_double(v);
  os << std::right << std::setw(8) << "mean" << "\n";
  for (const auto& r : rows) {
    std::string label = std::string(condition_name(r.probe_condition)) + "/" +
                        policy_name(r.policy);
    os << std::left << std::setw(14) << label;
    os << std::fixed << std::setprecision(1);
    for (double a : r.per_view) os << std::right << std::setw(7) << 100.0 * a;
    os << std::right << std::setw(8) << 100.0 * r.mean << "\n";
    os.unsetf(std::ios::fixed);
    os << std::setprecision(6);
  }
  return os.str();
}

inline void write_rank1_report(const std::vector<Rank1Row>& rows,
                               const std::vector<double>& view_list,
                               const EvalProtocol& proto,
                               const std::string& csv_path,
                               const std::string& table_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << rank1_csv(rows, view_list);
  std::ofstream tab(table_path, std::ios::binary);
  if (!tab) throw IoError("cannot write " + table_path);
  tab << rank1_table(rows, view_list, proto);
}

inline void write_embeddings(const std::vector<EmbeddingRecord>& embeddings,
                             const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  for (const auto& e : embeddings) {
    f << "{\"id\":\"" << e.identity << "\",\"view_deg\":" << fmt_double(e.view_degrees)
      << ",\"cond\":\"" << condition_name(e.condition)
      << "\",\"run\":" << e.run << ",\"vector\":[";
    for (Eigen::Index i = 0; i < e.vector.size(); ++i)
      f << (i ? "," : "") << fmt_double(e.vector(i));
    f << "]}\n";
  }
}

// ------------------------------------------------- generation quality probe

struct GenQualityReport {
  double mpjpe_generated = 0.0;  // mean over sampled (source, target) pairs
  double mpjpe_identity = 0.0;   // fake == source baseline
  int pairs = 0;
};

// Generator inference on one sequence: standardized features in, transform
// out, applied to the raw homogeneous coordinates.
template <typename S>
std::pair<PoseSequence, ViewTransform> lugan_generate(
    LuganGenerator<S>& gen, const CoordStats& stats, const PoseSequence& seq,
    double beta_degrees) {
  const auto coords = pose_coords<S>(seq);
  const auto feats = standardize_coords(coords, seq.confidence, stats);
  const auto t = gen.forward(feats, beta_degrees);
  gen.clear_cache();
  const ViewTransform vt = gen.config().qgan_mode
                               ? transform_from_q(t.q)
                               : compose_full_rank(t);
  PoseSequence out = apply_view_transform(vt, seq);
  out.confidence = seq.confidence;
  return {out, vt};
}

// MPJPE of generated poses against frame-aligned true target views, with
// the identity transform as the reference baseline.
template <typename S>
GenQualityReport lugan_generation_quality(LuganGenerator<S>& gen,
                                          const CoordStats& stats,
                                          const std::vector<GaitSample>& records,
                                          int max_pairs, std::uint64_t seed) {
  // aligned groups: map group -> records
  std::map<std::string, std::vector<const GaitSample*>> groups;
  for (const auto& r : records)
    if (!r.generated && !r.aligned_group.empty())
      groups[r.aligned_group].push_back(&r);
  std::vector<std::pair<const GaitSample*, const GaitSample*>> pairs;
  for (const auto& [g, members] : groups)
    for (const auto* a : members)
      for (const auto* b : members)
        if (a != b) pairs.emplace_back(a, b);
  if (pairs.empty()) throw DataError("generation quality: no aligned pairs");
  Rng rng(seed);
  rng.shuffle(pairs);
  if (static_cast<int>(pairs.size()) > max_pairs)
    pairs.resize(static_cast<std::size_t>(max_pairs));

  GenQualityReport rep;
  for (const auto& [src, dst] : pairs) {
    const auto [fake, vt] =
        lugan_generate(gen, stats, src->sequence, dst->view_degrees);
    rep.mpjpe_generated += mpjpe(fake, dst->sequence);
    rep.mpjpe_identity += mpjpe(src->sequence, dst->sequence);
    ++rep.pairs;
  }
  rep.mpjpe_generated /= rep.pairs;
  rep.mpjpe_identity /= rep.pairs;
  return rep;
}

}  // namespace gaitview

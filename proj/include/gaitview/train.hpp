#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "gaitview/backbone.hpp"
#include "gaitview/checkpoint.hpp"
#include "gaitview/eval.hpp"
#include "gaitview/lugan.hpp"
#include "gaitview/synth.hpp"

namespace gaitview {

// Training loops for the transform GAN and the recognizer. Both are
// single-writer and fully deterministic given the root seed: every random
// choice flows from per-(epoch, batch, sample) child streams.

// ------------------------------------------------------------ view sources

enum class ViewGenMode { none, oracle, pregen, lugan };

inline const char* view_gen_mode_name(ViewGenMode m) {
  switch (m) {
    case ViewGenMode::none: return "none";
    case ViewGenMode::oracle: return "oracle";
    case ViewGenMode::pregen: return "pregen";
    case ViewGenMode::lugan: return "lugan";
  }
  return "none";
}

inline ViewGenMode view_gen_mode_from(const std::string& s) {
  if (s == "none") return ViewGenMode::none;
  if (s == "oracle") return ViewGenMode::oracle;
  if (s == "pregen") return ViewGenMode::pregen;
  if (s == "lugan") return ViewGenMode::lugan;
  throw ConfigError("unknown gen mode '" + s + "'");
}

// Where per-view sequences come from during recognizer training and
// embedding: camera-geometry oracle transforms, a trained generator, or
// pre-generated records looked up by source key.
class ViewSource {
public:
  ViewSource() = default;

  static ViewSource none() { return ViewSource(); }

  static ViewSource oracle(const CameraRig& rig) {
    ViewSource vs;
    vs.mode_ = ViewGenMode::oracle;
    for (const auto& a : rig.views)
      for (const auto& b : rig.views) {
        if (a.yaw_degrees == b.yaw_degrees) continue;
        vs.oracle_q_[{a.yaw_degrees, b.yaw_degrees}] =
            oracle_view_transform(a.projection(), b.projection());
      }
    return vs;
  }

  static ViewSource lugan(std::shared_ptr<LuganGenerator<float>> gen,
                          const CoordStats& stats) {
    ViewSource vs;
    vs.mode_ = ViewGenMode::lugan;
    vs.gen_ = std::move(gen);
    vs.stats_ = stats;
    return vs;
  }

  static ViewSource pregen(const std::vector<GaitSample>& records) {
    ViewSource vs;
    vs.mode_ = ViewGenMode::pregen;
    for (const auto& r : records)
      if (r.generated) {
        GaitSample src_key = r;
        src_key.view_degrees = r.source_view;
        vs.pregen_[sample_key(src_key)].push_back(&r);
      }
    if (vs.pregen_.empty())
      throw DataError("pregen view source: dataset has no generated records");
    return vs;
  }

  ViewGenMode mode() const { return mode_; }

  // Sequence of `source` moved to `target_view`. For pregen the source's
  // crop window is applied to the stored generated record.
  PoseSequence generate(const GaitSample& source, const PoseSequence& cropped,
                        int crop_start, double target_view) const {
    switch (mode_) {
      case ViewGenMode::none:
        throw ContractError("view source disabled");
      case ViewGenMode::oracle: {
        const auto it = oracle_q_.find({source.view_degrees, target_view});
        if (it == oracle_q_.end())
          throw ConfigError("oracle view source: no rig pair " +
                            fmt_double(source.view_degrees) + " -> " +
                            fmt_double(target_view));
        PoseSequence out = apply_view_transform(it->second, cropped);
        out.confidence = cropped.confidence;
        return out;
      }
      case ViewGenMode::lugan: {
        auto [out, vt] = lugan_generate(*gen_, stats_, cropped, target_view);
        return out;
      }
      case ViewGenMode::pregen: {
        const auto it = pregen_.find(sample_key(source));
        if (it != pregen_.end())
          for (const auto* g : it->second)
            if (std::abs(g->view_degrees - target_view) < 1e-9) {
              PoseSequence out;
              const int t = cropped.frames();
              out.coords.reserve(static_cast<std::size_t>(t));
              for (int k = 0; k < t; ++k)
                out.coords.push_back(
                    g->sequence.coords[static_cast<std::size_t>(
                        (crop_start + k) % g->sequence.frames())]);
              out.confidence.resize(t, g->sequence.joints());
              for (int k = 0; k < t; ++k)
                out.confidence.row(k) = g->sequence.confidence.row(
                    (crop_start + k) % g->sequence.frames());
              return out;
            }
        throw DataError("pregen view source: no generated record for " +
                        sample_key(source) + " -> " + fmt_double(target_view));
      }
    }
    throw ContractError("unreachable");
  }

private:
  ViewGenMode mode_ = ViewGenMode::none;
  std::map<std::pair<double, double>, ViewTransform> oracle_q_;
  std::shared_ptr<LuganGenerator<float>> gen_;
  CoordStats stats_;
  std::map<std::string, std::vector<const GaitSample*>> pregen_;
};

// ------------------------------------------------------------ crop helpers

inline std::pair<PoseSequence, int> crop_or_loop(const PoseSequence& seq,
                                                 int target_t, int start) {
  PoseSequence out;
  const int t_in = seq.frames();
  out.coords.reserve(static_cast<std::size_t>(target_t));
  out.confidence.resize(target_t, seq.joints());
  for (int k = 0; k < target_t; ++k) {
    const int u = (start + k) % t_in;
    out.coords.push_back(seq.coords[static_cast<std::size_t>(u)]);
    out.confidence.row(k) = seq.confidence.row(u);
  }
  return {out, start};
}

inline std::pair<PoseSequence, int> random_crop(const PoseSequence& seq,
                                                int target_t, Rng& rng) {
  const int t_in = seq.frames();
  const int start =
      t_in > target_t
          ? static_cast<int>(rng.uniform_int(
                static_cast<std::uint64_t>(t_in - target_t + 1)))
          : 0;
  return crop_or_loop(seq, target_t, start);
}

inline std::pair<PoseSequence, int> center_crop(const PoseSequence& seq,
                                                int target_t) {
  const int t_in = seq.frames();
  const int start = t_in > target_t ? (t_in - target_t) / 2 : 0;
  return crop_or_loop(seq, target_t, start);
}

inline void noise_inject(PoseSequence& seq, double noise_std, Rng rng) {
  if (noise_std <= 0.0) return;
  const double s = sequence_scale(seq) * noise_std;
  for (auto& fr : seq.coords)
    for (Eigen::Index i = 0; i < fr.rows(); ++i) {
      fr(i, 0) += s * rng.normal();
      fr(i, 1) += s * rng.normal();
    }
}

// --------------------------------------------------------------- embedding

// Deterministic inference path: center crop (loop-pad when short), no
// noise. One embedding per non-generated record.
inline std::vector<EmbeddingRecord> embed_records(
    Recognizer<float>& net, const std::vector<GaitSample>& records,
    const ViewSource& views, int sequence_length) {
  const auto& cfg = net.config();
  std::vector<EmbeddingRecord> out;
  for (const auto& rec : records) {
    if (rec.generated) continue;
    const auto [cropped, start] = center_crop(rec.sequence, sequence_length);
    const auto fa = net.forward_source(pose_to_features<float>(cropped));
    Mat<float> fb;
    if (cfg.use_generative_branch) {
      std::vector<std::pair<int, FeatureSeq<float>>> gen_in;
      for (double view : cfg.view_list) {
        if (std::abs(view - rec.view_degrees) < 1e-9) continue;
        const PoseSequence gen = views.generate(rec, cropped, start, view);
        gen_in.emplace_back(net.generative().view_index(view),
                            pose_to_features<float>(gen));
      }
      fb = net.forward_generated(gen_in);
    }
    EmbeddingRecord e;
    e.identity = rec.identity;
    e.view_degrees = rec.view_degrees;
    e.condition = rec.condition;
    e.run = rec.run;
    e.vector = net.embed(fa, cfg.use_generative_branch ? &fb : nullptr)
                   .cast<double>();
    out.push_back(std::move(e));
    net.clear_cache();
  }
  return out;
}

// ------------------------------------------------------------ LUGAN trainer

struct LuganTrainOptions {
  int epochs = 20;
  int batch = 32;
  double lr = 1e-4;           // both generator and discriminator
  int g_steps_per_d = 50;     // generator steps per discriminator step
  int sequence_length = 30;
  GeneratorConfig gen;
  MatrixNorm cycle_norm = MatrixNorm::frobenius;
  bool aligned_reals = false;  // diagnostics on synthetic data only
  std::uint64_t seed = 1;
};

struct LuganEpochLog {
  int epoch = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;
  double cycle_residual = 0.0;  // mean ||I - Qab Qba||_F
};

struct TrainedLugan {
  std::shared_ptr<LuganGenerator<float>> generator;
  std::shared_ptr<LuganDiscriminator<float>> discriminator;
  CoordStats stats;
  std::vector<double> rig_views;
  std::vector<LuganEpochLog> log;
  LuganTrainOptions opts;

  Checkpoint checkpoint() const {
    KvFile cfg;
    cfg.set("rig_views", [this] {
      std::string s;
      for (double v : rig_views) s += (s.empty() ? "" : ",") + fmt_double(v);
      return s;
    }());
    cfg.set_double("stats.mean_x", stats.mean_x);
    cfg.set_double("stats.mean_y", stats.mean_y);
    cfg.set_double("stats.scale", stats.scale);
    cfg.set_int("width_div", opts.gen.width_div);
    cfg.set_int("qgan", opts.gen.qgan_mode ? 1 : 0);
    cfg.set_double("diag_floor", opts.gen.diag_floor);
    cfg.set_double("init_scale", opts.gen.init_scale);
    cfg.set_int("sequence_length", opts.sequence_length);
    cfg.set_int("epochs", opts.epochs);
    cfg.set_int("batch", opts.batch);
    cfg.set_double("lr", opts.lr);
    cfg.set_int("g_steps_per_d", opts.g_steps_per_d);
    return Checkpoint::from_params("lugan", opts.seed, cfg,
                                   generator->params());
  }
};

// Restore a generator (inference-side) from a checkpoint.
struct LoadedLugan {
  std::shared_ptr<LuganGenerator<float>> generator;
  CoordStats stats;
  std::vector<double> rig_views;
  GeneratorConfig cfg;
};

inline LoadedLugan load_lugan(const Checkpoint& ck,
                              const SkeletonTopology& topo) {
  if (ck.kind != "lugan")
    throw DataError("checkpoint is '" + ck.kind + "', expected lugan");
  LoadedLugan out;
  out.cfg.width_div = static_cast<int>(ck.config.get_int("width_div"));
  out.cfg.qgan_mode = ck.config.get_int("qgan") != 0;
  out.cfg.diag_floor = ck.config.get_double("diag_floor");
  out.cfg.init_scale = ck.config.get_double("init_scale");
  out.stats.mean_x = ck.config.get_double("stats.mean_x");
  out.stats.mean_y = ck.config.get_double("stats.mean_y");
  out.stats.scale = ck.config.get_double("stats.scale");
  for (const auto& tok : split(ck.config.get("rig_views"), ','))
    if (!tok.empty()) out.rig_views.push_back(std::stod(tok));
  const auto adj = normalized_adjacency(build_bone_graph(topo)).matrix;
  out.generator = std::make_shared<LuganGenerator<float>>(out.cfg, adj,
                                                          Rng(ck.seed));
  ck.apply_to(out.generator->params());
  return out;
}

inline TrainedLugan train_lugan(const std::vector<GaitSample>& records,
                                const std::vector<double>& rig_views,
                                const SkeletonTopology& topo,
                                const LuganTrainOptions& opts) {
  if (rig_views.size() < 2)
    throw ConfigError("lugan training: need >= 2 rig views");
  opts.gen.validate();

  // sources: non-generated records; reals looked up by (id, cond, view)
  std::vector<const GaitSample*> sources;
  std::map<std::string, std::vector<const GaitSample*>> reals;
  std::map<std::string, const GaitSample*> aligned;
  for (const auto& r : records) {
    if (r.generated) continue;
    sources.push_back(&r);
    reals[r.identity + "|" + condition_name(r.condition) + "|" +
          fmt_double(r.view_degrees)]
        .push_back(&r);
    aligned[r.aligned_group + "|" + fmt_double(r.view_degrees)] = &r;
  }
  if (sources.empty()) throw DataError("lugan training: empty dataset");
  for (const auto* s : sources) {
    bool found = false;
    for (double v : rig_views)
      if (std::abs(v - s->view_degrees) < 1e-9) found = true;
    if (!found)
      throw ConfigError("lugan training: record at view " +
                        fmt_double(s->view_degrees) + " not in the rig");
  }

  std::vector<GaitSample> src_copy;  // stats over the training data
  for (const auto* s : sources) src_copy.push_back(*s);
  const CoordStats stats = CoordStats::from_records(src_copy);

  const Rng root(opts.seed);
  const auto adj = normalized_adjacency(build_bone_graph(topo)).matrix;
  TrainedLugan out;
  out.generator = std::make_shared<LuganGenerator<float>>(
      opts.gen, adj, root.split("generator"));
  out.discriminator = std::make_shared<LuganDiscriminator<float>>(
      opts.gen, adj, root.split("discriminator"));
  out.stats = stats;
  out.rig_views = rig_views;
  out.opts = opts;
  auto& gen = *out.generator;
  auto& disc = *out.discriminator;

  Adam<float> g_opt(gen.params(), opts.lr);
  Adam<float> d_opt(disc.params(), opts.lr);

  struct Item {
    const GaitSample* src;
    double beta;
    PoseSequence cropped;
    int crop_start;
  };

  long g_step_count = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng erng = root.split("epoch").split(static_cast<std::uint64_t>(epoch));
    std::vector<int> order(sources.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<int>(i);
    erng.shuffle(order);

    LuganEpochLog log;
    log.epoch = epoch;
    long g_batches = 0, d_batches = 0;

    for (std::size_t pos = 0; pos < order.size();
         pos += static_cast<std::size_t>(opts.batch)) {
      const std::size_t bsz = std::min(static_cast<std::size_t>(opts.batch),
                                       order.size() - pos);
      Rng brng = erng.split("batch").split(static_cast<std::uint64_t>(pos));

      std::vector<Item> items;
      for (std::size_t b = 0; b < bsz; ++b) {
        Item it;
        it.src = sources[static_cast<std::size_t>(
            order[pos + b])];
        do {
          it.beta = rig_views[brng.uniform_int(rig_views.size())];
        } while (std::abs(it.beta - it.src->view_degrees) < 1e-9);
        auto [cropped, start] =
            random_crop(it.src->sequence, opts.sequence_length, brng);
        it.cropped = std::move(cropped);
        it.crop_start = start;
        items.push_back(std::move(it));
      }

      // ---- generator step
      g_opt.zero_grads();
      const float inv_b = 1.0f / static_cast<float>(bsz);
      double batch_loss = 0.0, batch_cycle = 0.0;
      for (const auto& it : items) {
        const auto coords = pose_coords<float>(it.cropped);
        const auto feats =
            standardize_coords(coords, it.cropped.confidence, stats);
        const auto t1 = gen.forward(feats, it.beta);
        const auto fake_coords = apply_q(t1.q, coords);
        const auto fake_feats =
            standardize_coords(fake_coords, it.cropped.confidence, stats);
        const auto t2 = gen.forward(fake_feats, it.src->view_degrees);
        const float d_fake = disc.forward(fake_feats, feats, it.beta);

        Mat<float> gqab, gqba;
        double gd = 0.0;
        const double li = generator_loss(
            t1.q, t2.q, static_cast<double>(d_fake), opts.cycle_norm, &gqab,
            &gqba, &gd);
        batch_loss += li;
        batch_cycle += (Mat<float>::Identity(3, 3) - t1.q * t2.q).norm();

        // reverse order: discriminator, second pass, transform, first pass
        const FeatureSeq<float> g_fake_from_d =
            disc.backward(static_cast<float>(gd) * inv_b);
        const FeatureSeq<float> g_fake_from_g2 = gen.backward(gqba * inv_b);
        FeatureSeq<float> g_fake_feats = g_fake_from_d;
        for (int t = 0; t < g_fake_feats.frames(); ++t)
          g_fake_feats.f[static_cast<std::size_t>(t)] +=
              g_fake_from_g2.f[static_cast<std::size_t>(t)];
        const FeatureSeq<float> g_fake_coords =
            standardize_coords_backward(g_fake_feats, stats);
        const Mat<float> gq_total =
            gqab * inv_b + apply_q_backward(t1.q, coords, g_fake_coords);
        gen.backward(gq_total);  // input gradient unused (source is data)
      }
      // only the generator updates on this step; drop the discriminator's
      // accumulated gradients
      zero_grads(d_opt.params());
      g_opt.step();
      log.g_loss += batch_loss / static_cast<double>(bsz);
      log.cycle_residual += batch_cycle / static_cast<double>(bsz);
      ++g_batches;
      ++g_step_count;

      // ---- discriminator step every g_steps_per_d generator steps
      if (g_step_count % opts.g_steps_per_d == 0) {
        d_opt.zero_grads();
        double d_batch_loss = 0.0;
        int d_count = 0;
        std::vector<float> grads_fake, grads_real;
        struct DPass {
          FeatureSeq<float> fake_feats, real_feats, cond_feats;
          double beta;
        };
        std::vector<DPass> passes;
        for (const auto& it : items) {
          // real: same identity and condition at the target view
          const auto key = it.src->identity + "|" +
                           condition_name(it.src->condition) + "|" +
                           fmt_double(it.beta);
          const GaitSample* real = nullptr;
          if (opts.aligned_reals) {
            const auto ait =
                aligned.find(it.src->aligned_group + "|" + fmt_double(it.beta));
            if (ait != aligned.end()) real = ait->second;
          } else {
            const auto rit = reals.find(key);
            if (rit != reals.end())
              real = rit->second[brng.uniform_int(rit->second.size())];
          }
          if (!real)
            throw ConfigError("lugan training: no real sequence for " + key);

          const auto coords = pose_coords<float>(it.cropped);
          const auto feats =
              standardize_coords(coords, it.cropped.confidence, stats);
          const auto t1 = gen.forward(feats, it.beta);
          gen.clear_cache();  // no generator gradient on this step
          const auto fake_coords = apply_q(t1.q, coords);

          DPass dp;
          dp.cond_feats = feats;
          dp.fake_feats =
              standardize_coords(fake_coords, it.cropped.confidence, stats);
          auto [real_crop, rstart] =
              random_crop(real->sequence, opts.sequence_length, brng);
          dp.real_feats = standardize_coords(pose_coords<float>(real_crop),
                                             real_crop.confidence, stats);
          dp.beta = it.beta;

          const float d_real =
              disc.forward(dp.real_feats, dp.cond_feats, dp.beta);
          const float d_fake =
              disc.forward(dp.fake_feats, dp.cond_feats, dp.beta);
          double gr = 0.0, gf = 0.0;
          d_batch_loss += discriminator_loss(static_cast<double>(d_real),
                                             static_cast<double>(d_fake), &gr,
                                             &gf);
          grads_real.push_back(static_cast<float>(gr));
          grads_fake.push_back(static_cast<float>(gf));
          passes.push_back(std::move(dp));
          ++d_count;
        }
        // pop in reverse: fake then real per item, last item first
        for (std::size_t i = passes.size(); i-- > 0;) {
          disc.backward(grads_fake[i] / static_cast<float>(d_count));
          disc.backward(grads_real[i] / static_cast<float>(d_count));
        }
        d_opt.step();
        log.d_loss += d_batch_loss / static_cast<double>(d_count);
        ++d_batches;
      }
    }

    log.g_loss /= static_cast<double>(std::max(1L, g_batches));
    log.cycle_residual /= static_cast<double>(std::max(1L, g_batches));
    if (d_batches) log.d_loss /= static_cast<double>(d_batches);
    out.log.push_back(log);
  }
  return out;
}

// ------------------------------------------------------ recognizer trainer

struct RecognizerTrainOptions {
  RecognizerConfig net;
  int epochs = 30;
  int batch_p = 8;
  int batch_k = 4;
  double lr = 1e-3;
  double noise_std = 0.01;
  double train_id_fraction = 0.6;  // rest held out for validation
  int val_every = 5;               // 0 disables per-epoch validation
  std::uint64_t seed = 1;
};

struct RecognizerEpochLog {
  int epoch = 0;
  double loss_alpha = 0.0;
  double loss_beta = 0.0;
  double val_rank1 = -1.0;  // negative when not computed this epoch
  double val_rank1_nm = -1.0;
  double val_rank1_bg = -1.0;
  double val_rank1_cl = -1.0;
};

struct TrainedRecognizer {
  std::shared_ptr<Recognizer<float>> net;
  std::vector<RecognizerEpochLog> log;
  std::vector<std::string> train_ids, holdout_ids;
  RecognizerTrainOptions opts;
  ViewGenMode gen_mode = ViewGenMode::none;
  KvFile rig_kv;  // oracle mode provenance

  Checkpoint checkpoint() const {
    KvFile cfg;
    const auto& c = net->config();
    cfg.set_int("width_div", c.width_div);
    cfg.set_int("shared_blocks", c.shared_blocks);
    cfg.set_int("sequence_length", c.sequence_length);
    cfg.set_double("tau", c.tau);
    cfg.set("aggregate", c.aggregate == HgcAggregate::sum ? "sum" : "mean");
    cfg.set("final_dim", c.final_dim);
    cfg.set_int("use_generative_branch", c.use_generative_branch ? 1 : 0);
    std::string views;
    for (double v : c.view_list) views += (views.empty() ? "" : ",") + fmt_double(v);
    cfg.set("view_list", views);
    cfg.set("gen_mode", view_gen_mode_name(gen_mode));
    for (const auto& [k, v] : rig_kv.items()) cfg.set("rig." + k, v);
    return Checkpoint::from_params("recognizer", opts.seed, cfg, net->params());
  }
};

struct LoadedRecognizer {
  std::shared_ptr<Recognizer<float>> net;
  RecognizerConfig cfg;
  ViewGenMode gen_mode = ViewGenMode::none;
  CameraRig rig;  // valid for oracle mode
  bool has_rig = false;
};

inline LoadedRecognizer load_recognizer(const Checkpoint& ck,
                                        const SkeletonTopology& topo) {
  if (ck.kind != "recognizer")
    throw DataError("checkpoint is '" + ck.kind + "', expected recognizer");
  LoadedRecognizer out;
  out.cfg.width_div = static_cast<int>(ck.config.get_int("width_div"));
  out.cfg.shared_blocks = static_cast<int>(ck.config.get_int("shared_blocks"));
  out.cfg.sequence_length =
      static_cast<int>(ck.config.get_int("sequence_length"));
  out.cfg.tau = ck.config.get_double("tau");
  out.cfg.aggregate = ck.config.get("aggregate") == "mean" ? HgcAggregate::mean
                                                           : HgcAggregate::sum;
  out.cfg.final_dim = ck.config.get("final_dim");
  out.cfg.use_generative_branch =
      ck.config.get_int("use_generative_branch") != 0;
  for (const auto& tok : split(ck.config.get("view_list"), ','))
    if (!tok.empty()) out.cfg.view_list.push_back(std::stod(tok));
  out.gen_mode = view_gen_mode_from(ck.config.get("gen_mode"));
  KvFile rigkv;
  for (const auto& [k, v] : ck.config.items())
    if (k.rfind("rig.", 0) == 0) rigkv.set(k.substr(4), v);
  if (rigkv.has("kind")) {
    out.rig = rig_from_kv(rigkv);
    out.has_rig = true;
  }
  std::vector<Eigen::MatrixXd> adj;
  for (const auto& h : canonical_hypergraphs(topo))
    adj.push_back(normalized_adjacency(h).matrix);
  out.net = std::make_shared<Recognizer<float>>(out.cfg, adj, Rng(ck.seed));
  ck.apply_to(out.net->params());
  return out;
}

// Deterministic identity split: shuffle sorted ids with the seed stream.
inline std::pair<std::vector<std::string>, std::vector<std::string>>
split_identities(const std::vector<GaitSample>& records, double train_fraction,
                 std::uint64_t seed) {
  std::set<std::string> uniq;
  for (const auto& r : records) uniq.insert(r.identity);
  std::vector<std::string> ids(uniq.begin(), uniq.end());
  Rng rng = Rng(seed).split("id-split");
  rng.shuffle(ids);
  const std::size_t n_train = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(train_fraction * ids.size())));
  std::vector<std::string> train(ids.begin(),
                                 ids.begin() + static_cast<long>(
                                                   std::min(n_train, ids.size())));
  std::vector<std::string> hold(ids.begin() + static_cast<long>(std::min(
                                    n_train, ids.size())),
                                ids.end());
  return {train, hold};
}

inline TrainedRecognizer train_recognizer(
    const std::vector<GaitSample>& records, const ViewSource& views,
    const SkeletonTopology& topo, const RecognizerTrainOptions& opts) {
  opts.net.validate();
  if (opts.net.use_generative_branch && views.mode() == ViewGenMode::none)
    throw ConfigError(
        "recognizer training: generative branch needs a view source");

  const auto [train_ids, holdout_ids] =
      split_identities(records, opts.train_id_fraction, opts.seed);
  std::set<std::string> train_set(train_ids.begin(), train_ids.end());

  std::vector<GaitSample> train_records, holdout_records;
  for (const auto& r : records) {
    if (r.generated) continue;
    if (train_set.count(r.identity))
      train_records.push_back(r);
    else
      holdout_records.push_back(r);
  }
  std::map<std::string, int> label_of;
  for (const auto& id : train_ids)
    label_of[id] = static_cast<int>(label_of.size());

  const Rng root(opts.seed);
  std::vector<Eigen::MatrixXd> adj;
  for (const auto& h : canonical_hypergraphs(topo))
    adj.push_back(normalized_adjacency(h).matrix);

  TrainedRecognizer out;
  out.net = std::make_shared<Recognizer<float>>(opts.net, adj,
                                                root.split("recognizer"));
  out.train_ids = train_ids;
  out.holdout_ids = holdout_ids;
  out.opts = opts;
  out.gen_mode = views.mode();
  auto& net = *out.net;

  Adam<float> optim(net.params(), opts.lr);
  PkSampler sampler(train_records, opts.batch_p, opts.batch_k,
                    root.split("sampler").bits());

  EvalProtocol val_proto;
  val_proto.view_list = [&] {
    std::set<double> v;
    for (const auto& r : holdout_records) v.insert(r.view_degrees);
    return std::vector<double>(v.begin(), v.end());
  }();
  val_proto.same_view_policy = SameViewPolicy::exclude;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng erng = root.split("aug").split(static_cast<std::uint64_t>(epoch));
    RecognizerEpochLog log;
    log.epoch = epoch;
    long batches = 0;

    for (const auto& batch : sampler.epoch(epoch)) {
      optim.zero_grads();
      const int bsz = static_cast<int>(batch.size());
      std::vector<int> labels;
      Mat<float> fa_raw(bsz, opts.net.embedding_dim_per_branch());
      Mat<float> fb_raw(bsz, opts.net.embedding_dim_per_branch());
      std::vector<std::size_t> beta_counts(static_cast<std::size_t>(bsz), 0);

      for (int i = 0; i < bsz; ++i) {
        const GaitSample& rec =
            train_records[static_cast<std::size_t>(batch[static_cast<std::size_t>(i)])];
        labels.push_back(label_of.at(rec.identity));
        Rng srng = erng.split(static_cast<std::uint64_t>(batches))
                       .split(static_cast<std::uint64_t>(i));
        auto [cropped, start] =
            random_crop(rec.sequence, opts.net.sequence_length, srng);

        PoseSequence src_aug = cropped;
        noise_inject(src_aug, opts.noise_std, srng.split("noise-src"));
        fa_raw.row(i) = net.forward_source(pose_to_features<float>(src_aug));

        if (opts.net.use_generative_branch) {
          std::vector<std::pair<int, FeatureSeq<float>>> gen_in;
          std::size_t vi = 0;
          for (double view : opts.net.view_list) {
            if (std::abs(view - rec.view_degrees) < 1e-9) continue;
            PoseSequence gen = views.generate(rec, cropped, start, view);
            noise_inject(gen, opts.noise_std, srng.split("noise-gen").split(vi));
            gen_in.emplace_back(net.generative().view_index(view),
                                pose_to_features<float>(gen));
            ++vi;
          }
          beta_counts[static_cast<std::size_t>(i)] = gen_in.size();
          fb_raw.row(i) = net.forward_generated(gen_in);
        }
      }

      const Mat<float> fa = l2_normalize_rows(fa_raw);
      Mat<float> ga;
      const double la =
          supcon_loss(fa, labels, opts.net.tau, &ga);
      const Mat<float> ga_raw = l2_normalize_rows_backward(fa_raw, ga);
      log.loss_alpha += la;

      Mat<float> gb_raw;
      if (opts.net.use_generative_branch) {
        const Mat<float> fb = l2_normalize_rows(fb_raw);
        Mat<float> gb;
        const double lb = supcon_loss(fb, labels, opts.net.tau, &gb);
        gb_raw = l2_normalize_rows_backward(fb_raw, gb);
        log.loss_beta += lb;
      }

      // backward: generative branch first, then source, samples in reverse
      for (int i = bsz - 1; i >= 0; --i) {
        if (opts.net.use_generative_branch)
          net.backward_generated(gb_raw.row(i));
      }
      for (int i = bsz - 1; i >= 0; --i) net.backward_source(ga_raw.row(i));
      optim.step();
      ++batches;
    }

    log.loss_alpha /= static_cast<double>(std::max(1L, batches));
    log.loss_beta /= static_cast<double>(std::max(1L, batches));

    const bool last = (epoch == opts.epochs - 1);
    if (!holdout_records.empty() && opts.val_every > 0 &&
        ((epoch + 1) % opts.val_every == 0 || last)) {
      const auto emb = embed_records(net, holdout_records, views,
                                     opts.net.sequence_length);
      const auto rows = rank1_matrix(emb, val_proto);
      double mean = 0.0;
      for (const auto& r : rows) {
        mean += r.mean;
        if (r.probe_condition == Condition::NM) log.val_rank1_nm = r.mean;
        if (r.probe_condition == Condition::BG) log.val_rank1_bg = r.mean;
        if (r.probe_condition == Condition::CL) log.val_rank1_cl = r.mean;
      }
      log.val_rank1 = rows.empty() ? 0.0 : mean / static_cast<double>(rows.size());
    }
    out.log.push_back(log);
  }
  return out;
}

inline std::string recognizer_log_csv(const std::vector<RecognizerEpochLog>& log) {
  std::string out = "epoch,loss_alpha,loss_beta,val_rank1,val_rank1_nm,val_rank1_bg,val_rank1_cl\n";
  auto cell = [](double v) { return v < 0 ? std::string() : fmt_double(v); };
  for (const auto& l : log)
    out += std::to_string(l.epoch) + "," + fmt_double(l.loss_alpha) + "," +
           fmt_double(l.loss_beta) + "," + cell(l.val_rank1) + "," +
           cell(l.val_rank1_nm) + "," + cell(l.val_rank1_bg) + "," +
           cell(l.val_rank1_cl) + "\n";
  return out;
}

inline std::string lugan_log_csv(const std::vector<LuganEpochLog>& log) {
  std::string out = "epoch,g_loss,d_loss,cycle_residual\n";
  for (const auto& l : log)
    out += std::to_string(l.epoch) + "," + fmt_double(l.g_loss) + "," +
           fmt_double(l.d_loss) + "," + fmt_double(l.cycle_residual) + "\n";
  return out;
}

// ----------------------------------------------------------- view expansion

// Emit generated records for every non-source rig view of every record
// (the `gen-views` stage). Works from a trained generator or the geometry
// oracle; provenance fields mark the outputs.
inline std::vector<GaitSample> generate_view_records(
    const std::vector<GaitSample>& records, const ViewSource& views,
    const std::vector<double>& target_views) {
  std::vector<GaitSample> out;
  for (const auto& rec : records) {
    if (rec.generated) continue;
    out.push_back(rec);
    for (double view : target_views) {
      if (std::abs(view - rec.view_degrees) < 1e-9) continue;
      GaitSample g = rec;
      g.generated = true;
      g.source_view = rec.view_degrees;
      g.view_degrees = view;
      g.sequence = views.generate(rec, rec.sequence, 0, view);
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace gaitview

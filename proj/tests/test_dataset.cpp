#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "gaitview/dataset.hpp"
#include "gaitview/synth.hpp"

using namespace gaitview;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

std::vector<GaitSample> toy_records() {
  SynthOptions opt;
  opt.n_identities = 2;
  opt.conditions = {Condition::NM};
  opt.runs = 1;
  opt.frames = 4;
  opt.seed = 3;
  return synth_records(opt, circle_rig({0.0, 90.0}, 4.0));
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset save -> load -> save is byte-identical") {
  TempDir dir("gv_ds_roundtrip");
  const auto recs = toy_records();
  const auto p1 = (dir.path / "a.jsonl").string();
  const auto p2 = (dir.path / "b.jsonl").string();
  save_dataset(recs, p1);
  const auto loaded = load_dataset(p1);
  REQUIRE(loaded.size() == recs.size());
  save_dataset(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));

  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(loaded[i].identity == recs[i].identity);
    CHECK(loaded[i].view_degrees == recs[i].view_degrees);
    CHECK(loaded[i].condition == recs[i].condition);
    CHECK(loaded[i].aligned_group == recs[i].aligned_group);
    for (int t = 0; t < recs[i].sequence.frames(); ++t)
      CHECK((loaded[i].sequence.coords[t] - recs[i].sequence.coords[t]).norm() ==
            0.0);
  }
}

TEST_CASE("malformed line is reported with its line number") {
  TempDir dir("gv_ds_badline");
  const auto p = (dir.path / "bad.jsonl").string();
  {
    const auto recs = toy_records();
    std::ofstream f(p, std::ios::binary);
    for (int i = 0; i < 6; ++i) f << serialize_sample(recs[i % recs.size()]) << "\n";
    f << "{\"id\":\"x\",\"view_deg\":0,\"cond\":\"NM\",\"frames\":[[[1,2";  // truncated line 7
  }
  try {
    load_dataset(p);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_no == 7);
  }
}

TEST_CASE("empty dataset file loads as zero records") {
  TempDir dir("gv_ds_empty");
  const auto p = (dir.path / "empty.jsonl").string();
  std::ofstream(p).close();
  const auto recs = load_dataset(p);
  CHECK(recs.empty());
  const auto manifest = build_manifest(recs, 0);
  CHECK(manifest.get_int("record_count") == 0);
}

TEST_CASE("importer: one sequence of 60 frames becomes one record") {
  TempDir dir("gv_import_ok");
  const auto p = (dir.path / "kp.csv").string();
  {
    std::ofstream f(p);
    f << "id,view_deg,cond,frame";
    for (int j = 0; j < 17; ++j) f << ",j" << j << "x,j" << j << "y,j" << j << "c";
    f << "\n";
    for (int t = 0; t < 60; ++t) {
      f << "p1,90,NM," << t;
      for (int j = 0; j < 17; ++j)
        f << "," << j + t << "," << 2 * j << ",0.9";
      f << "\n";
    }
  }
  const auto recs = import_keypoints(p, 30.0);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].sequence.frames() == 60);
  CHECK(recs[0].identity == "p1");
  CHECK(recs[0].view_degrees == 90.0);
  CHECK(recs[0].sequence.coords[1](3, 0) == 4.0);  // carried through unchanged
  CHECK(recs[0].sequence.confidence(0, 0) == 0.9);
}

TEST_CASE("importer: 16-keypoint header is a format error") {
  TempDir dir("gv_import_16");
  const auto p = (dir.path / "kp16.csv").string();
  {
    std::ofstream f(p);
    f << "id,view_deg,cond,frame";
    for (int j = 0; j < 16; ++j) f << ",j" << j << "x,j" << j << "y,j" << j << "c";
    f << "\n";
  }
  CHECK_THROWS_AS(import_keypoints(p, 30.0), ParseError);
}

TEST_CASE("importer: missing confidence columns default to 1.0") {
  TempDir dir("gv_import_noconf");
  const auto p = (dir.path / "kp2.csv").string();
  {
    std::ofstream f(p);
    f << "id,view_deg,cond,frame";
    for (int j = 0; j < 17; ++j) f << ",j" << j << "x,j" << j << "y";
    f << "\n";
    f << "p1,0,NM,0";
    for (int j = 0; j < 17; ++j) f << "," << j << "," << j;
    f << "\n";
  }
  const auto recs = import_keypoints(p, 30.0);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].sequence.confidence(0, 5) == 1.0);
}

TEST_CASE("importer: short row cites its line") {
  TempDir dir("gv_import_short");
  const auto p = (dir.path / "kp3.csv").string();
  {
    std::ofstream f(p);
    f << "id,view_deg,cond,frame";
    for (int j = 0; j < 17; ++j) f << ",j" << j << "x,j" << j << "y,j" << j << "c";
    f << "\np1,0,NM,0,1,2,0.5\n";
  }
  try {
    import_keypoints(p, 30.0);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_no == 2);
  }
}

TEST_CASE("augment: full-length crop with zero noise is the identity") {
  const auto recs = toy_records();
  const auto& seq = recs[0].sequence;
  const auto out = augment(seq, seq.frames(), 0.0, Rng(9));
  for (int t = 0; t < seq.frames(); ++t)
    CHECK((out.coords[t] - seq.coords[t]).norm() == 0.0);
}

TEST_CASE("augment is deterministic given the seed") {
  const auto recs = toy_records();
  const auto a = augment(recs[0].sequence, 3, 0.05, Rng(77));
  const auto b = augment(recs[0].sequence, 3, 0.05, Rng(77));
  for (int t = 0; t < 3; ++t) CHECK((a.coords[t] - b.coords[t]).norm() == 0.0);
}

TEST_CASE("augment loop-pads short sequences periodically") {
  const auto recs = toy_records();
  PoseSequence shortseq;
  shortseq.coords.assign(recs[0].sequence.coords.begin(),
                         recs[0].sequence.coords.begin() + 3);
  shortseq.confidence = recs[0].sequence.confidence.topRows(3);
  const auto out = augment(shortseq, 6, 0.0, Rng(5));
  REQUIRE(out.frames() == 6);
  for (int t = 3; t < 6; ++t)
    CHECK((out.coords[t] - out.coords[t - 3]).norm() == 0.0);
}

TEST_CASE("pk sampler produces exact PxK batches that satisfy SupCon") {
  SynthOptions opt;
  opt.n_identities = 5;
  opt.conditions = {Condition::NM};
  opt.runs = 2;
  opt.frames = 2;
  opt.seed = 11;
  const auto recs = synth_records(opt, circle_rig({0.0, 90.0}, 4.0));
  PkSampler sampler(recs, 2, 2, 123);
  const auto batches = sampler.epoch(0);
  CHECK(batches.size() == 2);  // floor(5 ids / P=2)
  for (const auto& b : batches) {
    REQUIRE(b.size() == 4);
    std::map<std::string, int> counts;
    for (int idx : b) counts[recs[static_cast<std::size_t>(idx)].identity]++;
    CHECK(counts.size() == 2);
    for (const auto& [id, n] : counts) CHECK(n == 2);
  }
  // deterministic per seed
  PkSampler sampler2(recs, 2, 2, 123);
  CHECK(sampler2.epoch(0) == batches);
  // but reshuffled across epochs
  CHECK(sampler.epoch(1) != batches);
}

TEST_CASE("pk sampler: toy 4-record set gives one batch of 4") {
  SynthOptions opt;
  opt.n_identities = 2;
  opt.conditions = {Condition::NM};
  opt.runs = 1;
  opt.frames = 2;
  opt.seed = 2;
  const auto recs = synth_records(opt, circle_rig({0.0, 90.0}, 4.0));
  REQUIRE(recs.size() == 4);
  PkSampler sampler(recs, 2, 2, 1);
  const auto batches = sampler.epoch(0);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].size() == 4);
}

TEST_CASE("pk sampler rejects identities with fewer than K sequences") {
  auto recs = toy_records();  // 2 ids x 2 views
  recs.pop_back();            // one id now has a single record
  CHECK_THROWS_AS(PkSampler(recs, 2, 2, 1), BatchCompositionError);
}

TEST_CASE("random datasets always yield SupCon-feasible batches") {
  Rng rng(321);
  for (int trial = 0; trial < 20; ++trial) {
    const int ids = 2 + static_cast<int>(rng.uniform_int(6));
    const int per_id = 2 + static_cast<int>(rng.uniform_int(4));
    std::vector<GaitSample> recs;
    for (int i = 0; i < ids; ++i)
      for (int s = 0; s < per_id; ++s) {
        GaitSample g;
        g.identity = "id" + std::to_string(i);
        g.sequence = PoseSequence::zeros(2, 17);
        recs.push_back(g);
      }
    const int p = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ids - 1)));
    const int k = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(per_id - 1)));
    PkSampler sampler(recs, p, k, rng.bits());
    for (const auto& batch : sampler.epoch(0)) {
      std::map<std::string, int> counts;
      for (int idx : batch) counts[recs[static_cast<std::size_t>(idx)].identity]++;
      CHECK(counts.size() == static_cast<std::size_t>(p));
      for (const auto& [id, n] : counts) CHECK(n == k);
    }
  }
}

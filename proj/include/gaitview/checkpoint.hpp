#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gaitview/kvfile.hpp"
#include "gaitview/nn.hpp"

namespace gaitview {

// Versioned binary container of named float32 parameter tensors plus the
// resolved config and seed. Byte layout is fixed, so the fnv digest of a
// checkpoint doubles as the determinism fingerprint.

inline constexpr char kCheckpointMagic[8] = {'G', 'V', 'C', 'K',
                                             'P', 'T', '0', '1'};

struct Checkpoint {
  std::string kind;  // "lugan" | "recognizer"
  std::uint64_t seed = 0;
  KvFile config;
  std::vector<std::pair<std::string, Mat<float>>> tensors;

  std::string serialize() const {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    auto put_u32 = [&out](std::uint32_t v) {
      char b[4];
      std::memcpy(b, &v, 4);
      out.append(b, 4);
    };
    auto put_str = [&](const std::string& s) {
      put_u32(static_cast<std::uint32_t>(s.size()));
      out += s;
    };
    put_str(kind);
    char sb[8];
    std::memcpy(sb, &seed, 8);
    out.append(sb, 8);
    put_str(config.serialize());
    put_u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
      put_str(name);
      put_u32(static_cast<std::uint32_t>(m.rows()));
      put_u32(static_cast<std::uint32_t>(m.cols()));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          char b[4];
          const float v = m(i, j);
          std::memcpy(b, &v, 4);
          out.append(b, 4);
        }
    }
    return out;
  }

  std::string digest() const { return to_hex(fnv1a64(serialize())); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    const std::string bytes = serialize();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }

  static Checkpoint deserialize(const std::string& bytes) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
      if (pos + n > bytes.size()) throw DataError("checkpoint truncated");
    };
    need(sizeof(kCheckpointMagic));
    if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
      throw DataError("not a checkpoint file (bad magic)");
    pos = sizeof(kCheckpointMagic);
    auto get_u32 = [&]() {
      need(4);
      std::uint32_t v;
      std::memcpy(&v, bytes.data() + pos, 4);
      pos += 4;
      return v;
    };
    auto get_str = [&]() {
      const std::uint32_t n = get_u32();
      need(n);
      std::string s(bytes.data() + pos, n);
      pos += n;
      return s;
    };
    Checkpoint ck;
    ck.kind = get_str();
    need(8);
    std::memcpy(&ck.seed, bytes.data() + pos, 8);
    pos += 8;
    ck.config = KvFile::parse(get_str());
    const std::uint32_t count = get_u32();
    for (std::uint32_t t = 0; t < count; ++t) {
      const std::string name = get_str();
      const std::uint32_t rows = get_u32();
      const std::uint32_t cols = get_u32();
      Mat<float> m(rows, cols);
      need(static_cast<std::size_t>(rows) * cols * 4);
      for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) {
          float v;
          std::memcpy(&v, bytes.data() + pos, 4);
          pos += 4;
          m(i, j) = v;
        }
      ck.tensors.emplace_back(name, std::move(m));
    }
    return ck;
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), {});
    return deserialize(bytes);
  }

  static Checkpoint from_params(const std::string& kind, std::uint64_t seed,
                                const KvFile& config,
                                const ParamList<float>& params) {
    Checkpoint ck;
    ck.kind = kind;
    ck.seed = seed;
    ck.config = config;
    for (const auto& p : params) ck.tensors.emplace_back(p.name, *p.value);
    return ck;
  }

  // Restore into a live parameter list; names and shapes must match.
  void apply_to(const ParamList<float>& params) const {
    if (params.size() != tensors.size())
      throw DataError("checkpoint: parameter count mismatch (" +
                      std::to_string(tensors.size()) + " stored, " +
                      std::to_string(params.size()) + " live)");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& [name, m] = tensors[i];
      if (name != params[i].name)
        throw DataError("checkpoint: tensor '" + name + "' does not match '" +
                        params[i].name + "'");
      if (m.rows() != params[i].value->rows() ||
          m.cols() != params[i].value->cols())
        throw DataError("checkpoint: shape mismatch for '" + name + "'");
      *params[i].value = m;
    }
  }
};

}  // namespace gaitview

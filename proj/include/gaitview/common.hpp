#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gaitview {

// ----------------------------------------------------------------- errors
//
// Every library error carries an exit class so the CLI can map failures to
// its documented exit codes (2 config, 3 data, 4 numeric).
enum class ExitClass : int { config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
  Error(ExitClass cls, const std::string& msg)
      : std::runtime_error(msg), cls_(cls) {}
  ExitClass exit_class() const noexcept { return cls_; }

private:
  ExitClass cls_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ExitClass::config, m) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ExitClass::config, m) {}
};
struct BatchCompositionError : Error {
  explicit BatchCompositionError(const std::string& m)
      : Error(ExitClass::config, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ExitClass::data, m) {}
};
struct ParseError : Error {
  ParseError(const std::string& m, long line)
      : Error(ExitClass::data, m + " (line " + std::to_string(line) + ")"),
        line_no(line) {}
  long line_no;
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ExitClass::data, m) {}
};
struct TopologyError : Error {
  explicit TopologyError(const std::string& m) : Error(ExitClass::data, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ExitClass::numeric, m) {}
};
struct DegenerateDepthError : NumericError {
  DegenerateDepthError(long frame, long joint, double w)
      : NumericError("degenerate homogeneous depth |w|=" + std::to_string(w) +
                     " at frame " + std::to_string(frame) + ", joint " +
                     std::to_string(joint)),
        frame(frame), joint(joint) {}
  long frame;
  long joint;
};
struct DegenerateCameraError : NumericError {
  explicit DegenerateCameraError(const std::string& m) : NumericError(m) {}
};
struct DegeneratePairError : NumericError {
  explicit DegeneratePairError(const std::string& m) : NumericError(m) {}
};
struct IsolatedElementError : NumericError {
  explicit IsolatedElementError(const std::string& m) : NumericError(m) {}
};

// -------------------------------------------------------------------- rng
//
// All randomness flows from a root seed split deterministically per
// component. Gaussian and uniform draws are produced from raw mt19937_64
// output (not std::*_distribution) so byte streams are stable across
// standard-library implementations.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 1469598103934665603ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Child stream seeded from (seed, tag); independent per tag.
  Rng split(std::string_view tag) const {
    std::uint64_t h = fnv1a64(tag, seed_mix_);
    return Rng(h);
  }
  Rng split(std::uint64_t salt) const {
    std::uint64_t h = fnv1a64(&salt, sizeof(salt), seed_mix_);
    return Rng(h);
  }

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0,1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return eng_() % n; }

  // Box-Muller; one draw per call, cached pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 eng_;
  std::uint64_t seed_mix_ = eng_();  // first output doubles as split salt
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ------------------------------------------------------------- formatting
//
// Shortest round-trip decimal form; the dataset writer depends on this
// being a pure function of the value so save -> load -> save is
// byte-identical.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(long long v) { return std::to_string(v); }

inline double parse_double(std::string_view s, bool& ok) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  ok = (res.ec == std::errc() && res.ptr == s.data() + s.size());
  return v;
}

// ------------------------------------------------------------ small utils
inline std::string_view trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace gaitview

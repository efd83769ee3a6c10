#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gaitview/common.hpp"

namespace gaitview {

// Human-readable ordered `key = value` file. Used for rig descriptions,
// topology presets, manifests and resolved run configs. Writing preserves
// insertion order, so parse -> write reproduces the file byte for byte.
class KvFile {
public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : items_) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    items_.emplace_back(key, value);
  }
  void set_double(const std::string& key, double v) { set(key, fmt_double(v)); }
  void set_int(const std::string& key, long long v) { set(key, fmt_int(v)); }

  bool has(const std::string& key) const {
    for (const auto& kv : items_)
      if (kv.first == key) return true;
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& kv : items_)
      if (kv.first == key) return kv.second;
    throw DataError("kvfile: missing key '" + key + "'");
  }

  std::string get_or(const std::string& key, const std::string& dflt) const {
    for (const auto& kv : items_)
      if (kv.first == key) return kv.second;
    return dflt;
  }

  double get_double(const std::string& key) const {
    bool ok = false;
    double v = parse_double(get(key), ok);
    if (!ok) throw DataError("kvfile: key '" + key + "' is not a number");
    return v;
  }
  double get_double_or(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }
  long long get_int(const std::string& key) const {
    return static_cast<long long>(get_double(key));
  }
  long long get_int_or(const std::string& key, long long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }

  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& kv : items_) os << kv.first << " = " << kv.second << "\n";
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << serialize();
  }

  static KvFile parse(std::string_view text) {
    KvFile kv;
    long line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t eol = text.find('\n', pos);
      std::string_view line = (eol == std::string_view::npos)
                                  ? text.substr(pos)
                                  : text.substr(pos, eol - pos);
      pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
      ++line_no;
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      std::size_t eq = t.find('=');
      if (eq == std::string_view::npos)
        throw ParseError("kvfile: expected 'key = value'", line_no);
      kv.items_.emplace_back(std::string(trim(t.substr(0, eq))),
                             std::string(trim(t.substr(eq + 1))));
    }
    return kv;
  }

  static KvFile load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

private:
  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace gaitview

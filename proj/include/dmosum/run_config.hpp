// Copyright 2026 The dmosum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Flat key=value run configuration with per-key provenance. Lines are
// `key = value`; `#` starts a comment; blank lines are ignored. Unknown keys
// are rejected so that typos never pass silently.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dmosum/csv.hpp"
#include "dmosum/error.hpp"

namespace dmosum {

struct KeyDefault {
  std::string key;
  std::string value;   // default; empty means unset
  std::string source;  // where the default comes from
};

class RunConfig {
 public:
  RunConfig() = default;
  explicit RunConfig(const std::vector<KeyDefault>& defaults) {
    for (const auto& s : defaults) {
      order_.push_back(s.key);
      entries_[s.key] = {s.value, s.source};
    }
  }

  bool known(const std::string& key) const { return entries_.count(key) != 0; }

  void set(const std::string& key, const std::string& value, const std::string& source) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
    it->second = {value, source};
  }

  /// `key=value` from the command line.
  void set_assignment(std::string_view text, const std::string& source) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidArgument, "expected key=value, got '" + std::string(text) + "'");
    }
    set(std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))), source);
  }

  void load(std::istream& in, const std::string& origin) {
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view(line);
      if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = trim(view);
      if (view.empty()) continue;
      if (view.find('=') == std::string_view::npos) {
        throw Error(Errc::InvalidArgument, origin + ":" + std::to_string(line_no) + ": expected key=value");
      }
      try {
        set_assignment(view, origin);
      } catch (const Error& e) {
        throw Error(Errc::InvalidArgument, origin + ":" + std::to_string(line_no) + ": " + strip_code(e.what()));
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidArgument, "cannot open config file '" + path + "'");
    load(in, path);
  }

  bool has(const std::string& key) const { return !entry(key).value.empty(); }
  const std::string& str(const std::string& key) const { return entry(key).value; }
  const std::string& source(const std::string& key) const { return entry(key).source; }

  double real(const std::string& key) const {
    const auto v = parse_double(need(key));
    if (!v) fail(key, "expected a number");
    return *v;
  }

  long integer(const std::string& key) const { return parse_integer(key, need(key)); }

  std::uint64_t u64(const std::string& key) const {
    const std::string& text = need(key);
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) fail(key, "expected a non-negative integer");
    return value;
  }

  bool flag(const std::string& key) const {
    const std::string& v = need(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "expected true or false");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (auto field : split(need(key), ',')) {
      const auto v = parse_double(field);
      if (!v) fail(key, "expected a comma-separated list of numbers");
      out.push_back(*v);
    }
    return out;
  }

  std::vector<long> integers(const std::string& key) const {
    std::vector<long> out;
    for (auto field : split(need(key), ',')) out.push_back(parse_integer(key, trim(field)));
    return out;
  }

  /// One of `choices`, else a config error naming the key.
  const std::string& choice(const std::string& key, const std::vector<std::string>& choices) const {
    const std::string& v = need(key);
    for (const auto& c : choices) {
      if (c == v) return v;
    }
    std::string list;
    for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
    fail(key, "expected one of: " + list);
  }

  [[noreturn]] static void fail(const std::string& key, const std::string& what) {
    throw Error(Errc::InvalidArgument, "key '" + key + "': " + what);
  }

  /// Every key in declaration order with its source as a trailing comment.
  /// The output is itself a loadable config.
  void write_echo(std::ostream& out, const std::set<std::string>& skip = {}) const {
    for (const auto& key : order_) {
      if (skip.count(key)) continue;
      const auto& e = entries_.at(key);
      out << key << " = " << e.value << "  # " << e.source << '\n';
    }
  }

 private:
  struct Entry {
    std::string value;
    std::string source;
  };

  const Entry& entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
    return it->second;
  }

  const std::string& need(const std::string& key) const {
    const auto& e = entry(key);
    if (e.value.empty()) fail(key, "a value is required");
    return e.value;
  }

  static long parse_integer(const std::string& key, std::string_view text) {
    long value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) fail(key, "expected an integer");
    return value;
  }

  static std::string strip_code(const std::string& what) {
    const auto colon = what.find(": ");
    return colon == std::string::npos ? what : what.substr(colon + 2);
  }

  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
};

}  // namespace dmosum

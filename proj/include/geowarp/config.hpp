// Copyright 2026 The geowarp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file config.hpp
 * @brief `key = value` configuration files with `[section]` headers.
 *
 * Lines starting with '#' or ';' are comments. Keys before the first header
 * belong to the unnamed section "". Every lookup marks its key as used, so a
 * consumer can call reject_unknown() once it has read everything it knows.
 */

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace geowarp {

class Config {
 public:
  static Config parse(std::string_view text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  /// Whitespace-separated numbers; throws unless exactly `count` are present
  /// (count < 0 accepts any number).
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  int count = -1) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  /// Keys of a section in insertion order.
  std::vector<std::string> keys(const std::string& section) const;
  std::vector<std::string> sections() const;

  /// Throws InvalidSpecError naming the first key that was never looked up.
  void reject_unknown() const;

  /// Canonical text form; sections and keys keep insertion order.
  std::string to_text() const;

 private:
  struct Entry {
    std::string key;
    std::string value;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
  };

  const std::string* find(const std::string& section, const std::string& key) const;
  std::string qualified(const std::string& section, const std::string& key) const;

  std::string origin_;
  std::vector<Section> sections_;
  mutable std::set<std::string> used_;
};

}  // namespace geowarp

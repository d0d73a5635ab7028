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

#include "geowarp/config.hpp"

#include <charconv>
#include <sstream>

#include "geowarp/errors.hpp"
#include "geowarp/io.hpp"

namespace geowarp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  cfg.sections_.push_back({"", {}});
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(where + ": unterminated section header");
      const std::string name = trim(std::string_view(t).substr(1, t.size() - 2));
      if (name.empty()) throw ParseError(where + ": empty section name");
      if (cfg.has_section(name)) throw ParseError(where + ": duplicate section [" + name + "]");
      cfg.sections_.push_back({name, {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    Section& sec = cfg.sections_.back();
    for (const Entry& e : sec.entries) {
      if (e.key == key) throw ParseError(where + ": duplicate key '" + key + "'");
    }
    sec.entries.push_back({key, value});
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  return parse(io::read_file(path), path.string());
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const Entry& e : s.entries) {
      if (e.key == key) {
        used_.insert(qualified(section, key));
        return &e.value;
      }
    }
  }
  return nullptr;
}

std::string Config::qualified(const std::string& section, const std::string& key) const {
  return section.empty() ? key : section + "." + key;
}

bool Config::has(const std::string& section, const std::string& key) const {
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const Entry& e : s.entries) {
      if (e.key == key) return true;
    }
  }
  return false;
}

bool Config::has_section(const std::string& section) const {
  for (const Section& s : sections_) {
    if (s.name == section) return true;
  }
  return false;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  const std::string* v = find(section, key);
  if (v == nullptr) throw InvalidSpecError(qualified(section, key), "missing required key");
  return *v;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v == nullptr ? fallback : *v;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string s = get_string(section, key);
  double v = 0;
  if (!parse_number(s, v)) throw InvalidSpecError(qualified(section, key), "not a number: " + s);
  return v;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key) const {
  const std::string s = get_string(section, key);
  long v = 0;
  if (!parse_number(s, v)) throw InvalidSpecError(qualified(section, key), "not an integer: " + s);
  return v;
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string s = get_string(section, key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidSpecError(qualified(section, key), "not a boolean: " + s);
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        int count) const {
  std::istringstream in(get_string(section, key));
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    double v = 0;
    if (!parse_number(tok, v)) {
      throw InvalidSpecError(qualified(section, key), "not a number: " + tok);
    }
    out.push_back(v);
  }
  if (count >= 0 && static_cast<int>(out.size()) != count) {
    throw InvalidSpecError(qualified(section, key),
                           "expected " + std::to_string(count) + " numbers, got " +
                               std::to_string(out.size()));
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  for (Section& s : sections_) {
    if (s.name != section) continue;
    for (Entry& e : s.entries) {
      if (e.key == key) {
        e.value = value;
        return;
      }
    }
    s.entries.push_back({key, value});
    return;
  }
  sections_.push_back({section, {{key, value}}});
}

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const Entry& e : s.entries) out.push_back(e.key);
  }
  return out;
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const Section& s : sections_) out.push_back(s.name);
  return out;
}

void Config::reject_unknown() const {
  for (const Section& s : sections_) {
    for (const Entry& e : s.entries) {
      const std::string q = qualified(s.name, e.key);
      if (!used_.contains(q)) throw InvalidSpecError(q, "unknown key in " + origin_);
    }
  }
}

std::string Config::to_text() const {
  std::string out;
  for (const Section& s : sections_) {
    if (s.entries.empty()) continue;
    if (!s.name.empty()) {
      if (!out.empty()) out += '\n';
      out += "[" + s.name + "]\n";
    }
    for (const Entry& e : s.entries) out += e.key + " = " + e.value + "\n";
  }
  return out;
}

}  // namespace geowarp

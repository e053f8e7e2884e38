// config.cpp

// Copyright 2026  The SeganForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "seganforge/config.h"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "seganforge/common.h"

namespace seganforge {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace

Config Config::from_file(const std::string& path) {
  return from_string(read_text_file(path), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      raise(strprintf("%s:%d: expected key=value, got \"%s\"", origin.c_str(),
                      lineno, line.c_str()));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      raise(strprintf("%s:%d: empty key", origin.c_str(), lineno));
    cfg.values_[key] = value;
  }
  return cfg;
}

void Config::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    raise("override must be key=value, got \"" + assignment + "\"");
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (key.empty()) raise("override has empty key: \"" + assignment + "\"");
  values_[key] = value;
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool Config::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string Config::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    raise(strprintf("%s: missing required config key \"%s\"", origin_.c_str(),
                    key.c_str()));
  used_[key] = true;
  return it->second;
}

std::string Config::get_string(const std::string& key) const {
  return require(key);
}

std::string Config::get_string(const std::string& key,
                               const std::string& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  used_[key] = true;
  return it->second;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string v = require(key);
  char* end = nullptr;
  long long r = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    raise(strprintf("%s: key \"%s\": expected integer, got \"%s\"",
                    origin_.c_str(), key.c_str(), v.c_str()));
  return int64_t(r);
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
  if (!has(key)) return def;
  return get_int(key);
}

double Config::get_double(const std::string& key, double def) const {
  if (!has(key)) return def;
  const std::string v = require(key);
  char* end = nullptr;
  double r = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    raise(strprintf("%s: key \"%s\": expected number, got \"%s\"",
                    origin_.c_str(), key.c_str(), v.c_str()));
  return r;
}

bool Config::get_bool(const std::string& key, bool def) const {
  if (!has(key)) return def;
  std::string v = require(key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  raise(strprintf("%s: key \"%s\": expected boolean, got \"%s\"",
                  origin_.c_str(), key.c_str(), v.c_str()));
}

uint64_t Config::get_u64(const std::string& key, uint64_t def) const {
  if (!has(key)) return def;
  const std::string v = require(key);
  char* end = nullptr;
  unsigned long long r = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    raise(strprintf("%s: key \"%s\": expected unsigned integer, got \"%s\"",
                    origin_.c_str(), key.c_str(), v.c_str()));
  return uint64_t(r);
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(require(key))) {
    char* end = nullptr;
    double r = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0')
      raise(strprintf("%s: key \"%s\": expected number list, got \"%s\"",
                      origin_.c_str(), key.c_str(), item.c_str()));
    out.push_back(r);
  }
  return out;
}

std::vector<int64_t> Config::get_int_list(const std::string& key) const {
  std::vector<int64_t> out;
  for (double d : get_double_list(key)) out.push_back(int64_t(d));
  return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
  return split_list(require(key));
}

std::string Config::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

uint64_t Config::fingerprint() const {
  std::string e = echo();
  return fnv1a64(e.data(), e.size());
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace seganforge

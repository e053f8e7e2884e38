// config.h

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

#ifndef SEGANFORGE_CONFIG_H_
#define SEGANFORGE_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace seganforge {

// Plain-text key=value configuration with dotted keys, '#' comments and
// comma-separated lists. The same format is used for config files, experiment
// plan files and the checkpoint config block.
//
//   train.epochs = 30          # comment
//   durations_s  = 24,60,120
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  // `origin` is used in error messages (e.g. a file name).
  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>");

  // Applies a command-line override of the form "key=value".
  void apply_override(const std::string& assignment);

  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;  // throws if missing
  std::string get_string(const std::string& key, const std::string& def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int64_t> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Canonical text form (sorted keys), suitable for hashing and echoing into
  // output directories.
  std::string echo() const;
  uint64_t fingerprint() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  // All keys consumed through get_* so far; lets the CLI warn on unused keys.
  std::vector<std::string> unused_keys() const;

 private:
  std::string require(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
  std::string origin_ = "<empty>";
};

}  // namespace seganforge

#endif  // SEGANFORGE_CONFIG_H_

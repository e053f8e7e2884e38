// common.h

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

#ifndef SEGANFORGE_COMMON_H_
#define SEGANFORGE_COMMON_H_

#include <cstdarg>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seganforge {

inline constexpr const char* kToolVersion = "0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// printf-style std::string formatting.
std::string strprintf(const char* fmt, ...)
#if defined(__GNUC__)
    __attribute__((format(printf, 1, 2)))
#endif
    ;

[[noreturn]] inline void raise(const std::string& msg) { throw Error(msg); }

// FNV-1a 64-bit over a byte range; used for corpus/checkpoint fingerprints.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64_file(const std::string& path);
std::string to_hex(uint64_t v);

// Number of worker threads for compute kernels. Defaults to the value of
// SEGANFORGE_THREADS, else std::thread::hardware_concurrency(). Work is
// always partitioned into contiguous output-disjoint ranges, so results are
// bit-identical for every thread count (thread count 1 is the reference).
int compute_threads();
void set_compute_threads(int n);

// Runs fn(begin_i, end_i) over a contiguous partition of [begin, end).
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn);

// Locale-independent float formatting for CSV/report emission.
std::string format_double(double v, int precision = 6);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
// Writes to path via a temporary file + rename.
void write_text_file_atomic(const std::string& path, const std::string& content);

}  // namespace seganforge

#endif  // SEGANFORGE_COMMON_H_

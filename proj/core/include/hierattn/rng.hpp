// Copyright 2026 The hierattn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hierattn::rng {

// splitmix64 step (Steele et al.); the generator behind every random draw in
// this project so that results do not depend on standard-library distribution
// implementations.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent sub-seed from a root seed and a stream tag, so each
// component (generation, init, shuffling, ...) gets its own stream.
std::uint64_t derive(std::uint64_t root, std::string_view tag, std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // decorrelate trivially related seeds
    splitmix64(state_);
  }

  std::uint64_t u64() { return splitmix64(state_); }

  // [0, 1)
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // inclusive bounds
  int uniform_int(int lo, int hi);

  // standard normal via Box-Muller
  double normal();

  // Fisher-Yates over [0, n)
  std::vector<std::int32_t> permutation(int n);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hierattn::rng

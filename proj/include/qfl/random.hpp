//
// Copyright 2026 The qfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef QFL_RANDOM_HPP_
#define QFL_RANDOM_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qfl {

// All randomness flows through explicitly seeded engines so that a run is a
// pure function of (config, seed).
using RandomStream = std::mt19937_64;

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hashes an ordered tuple of integers into a seed. Used to derive
// independent per-(round, client) streams from the global seed, so results
// do not depend on which worker runs which client.
inline std::uint64_t HashSeed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = SplitMix64(h ^ SplitMix64(p));
  return h;
}

inline RandomStream DeriveStream(std::initializer_list<std::uint64_t> parts) {
  return RandomStream(HashSeed(parts));
}

// Stream tags, so that different consumers of the same (seed, round) never
// share a stream.
enum class StreamTag : std::uint64_t {
  kSampling = 1,
  kClient = 2,
  kPartition = 3,
  kInit = 4,
  kData = 5,
  kScan = 6,
  kMinibatch = 7,
};

inline std::uint64_t Tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

}  // namespace qfl

#endif  // QFL_RANDOM_HPP_

// zrtopic/tests/test_common.cc

// Copyright 2026  The zrtopic Authors

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

#include <set>
#include <stdexcept>

#include "doctest.h"
#include "zrtopic/common.h"

using namespace zrtopic;

TEST_CASE("derive_seed is deterministic and tag sensitive") {
  CHECK(derive_seed(7, "aud") == derive_seed(7, "aud"));
  CHECK(derive_seed(7, "aud") != derive_seed(7, "cnn"));
  CHECK(derive_seed(7, "aud") != derive_seed(8, "aud"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000);
}

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("log_add") {
  CHECK(log_add(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(log_add(ninf, 1.5) == 1.5);
  CHECK(log_add(1.5, ninf) == 1.5);
  CHECK(log_add(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("parallel_for visits every index once for any worker count") {
  for (int workers : {1, 2, 5}) {
    std::vector<int> hits(97, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 6) throw Error("boom");
                               }),
                  Error);
}

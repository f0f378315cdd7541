/*
 * Copyright 2026 The ddkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"

#include "ddkit/parallel.hpp"
#include "ddkit/random.hpp"

using namespace ddkit;

TEST_SUITE("random") {
    TEST_CASE("fnv1a64 reference vectors") {
        CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
        CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
    }

    TEST_CASE("engine sequence is the standard one") {
        // 10000th output of a default-seeded mt19937_64, fixed by the C++ standard.
        Rng rng(5489);
        std::uint64_t v = 0;
        for (int i = 0; i < 10000; ++i) v = rng.next();
        CHECK(v == 9981545732273789042ull);
    }

    TEST_CASE("derived seeds depend on seed and key") {
        CHECK(derive_seed(42, "rotated:a.jpg") == derive_seed(42, "rotated:a.jpg"));
        CHECK(derive_seed(42, "rotated:a.jpg") != derive_seed(43, "rotated:a.jpg"));
        CHECK(derive_seed(42, "rotated:a.jpg") != derive_seed(42, "rotated:b.jpg"));
        std::set<std::uint64_t> seen;
        for (int i = 0; i < 1000; ++i) seen.insert(derive_seed(7, "img_" + std::to_string(i)));
        CHECK(seen.size() == 1000);
    }

    TEST_CASE("uniform01 stays in [0, 1) and uniform honours bounds") {
        Rng rng(1);
        double lo = 1, hi = 0, sum = 0;
        for (int i = 0; i < 100000; ++i) {
            const double u = rng.uniform01();
            lo = std::min(lo, u);
            hi = std::max(hi, u);
            sum += u;
        }
        CHECK(lo >= 0.0);
        CHECK(hi < 1.0);
        CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
        CHECK(rng.uniform(3.5, 3.5) == 3.5);
        for (int i = 0; i < 1000; ++i) {
            const double v = rng.uniform(-15, 15);
            CHECK((v >= -15 && v <= 15));
        }
    }

    TEST_CASE("below is roughly uniform") {
        Rng rng(99);
        std::array<int, 7> hist{};
        const int n = 70000;
        for (int i = 0; i < n; ++i) ++hist[rng.below(7)];
        double chi2 = 0;
        for (int h : hist) chi2 += (h - n / 7.0) * (h - n / 7.0) / (n / 7.0);
        CHECK(chi2 < 22.46);  // p = 0.001 at 6 dof
        CHECK(rng.below(1) == 0);
    }

    TEST_CASE("shuffle is a deterministic permutation") {
        std::vector<int> a(50), b;
        std::iota(a.begin(), a.end(), 0);
        b = a;
        Rng r1(5), r2(5);
        shuffle(std::span(a), r1);
        shuffle(std::span(b), r2);
        CHECK(a == b);
        auto sorted = a;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
        std::vector<int> c(50);
        std::iota(c.begin(), c.end(), 0);
        CHECK(a != c);
        std::vector<int> empty;
        shuffle(std::span(empty), r1);
        CHECK(empty.empty());
    }

    TEST_CASE("parallel_for visits every index once") {
        for (unsigned workers : {0u, 1u, 3u, 8u}) {
            std::vector<int> hits(257, 0);
            parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
            CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
        }
        parallel_for(0, 4, [](std::size_t) { FAIL("called on empty range"); });
    }
}

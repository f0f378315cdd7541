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


// Helpers shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ddkit/dataset.hpp"
#include "ddkit/image.hpp"
#include "ddkit/image_io.hpp"
#include "ddkit/random.hpp"

namespace ddkit::testing {

inline const std::filesystem::path kFixtureDir = DDKIT_FIXTURE_DIR;
inline const std::filesystem::path kDataDir = DDKIT_DATA_DIR;
inline const std::filesystem::path kPresetDir = DDKIT_PRESET_DIR;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "ddkit") {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline ImageBuffer random_image(int w, int h, Rng& rng) {
    std::vector<std::uint8_t> d(static_cast<std::size_t>(w) * h * 3);
    for (auto& v : d) v = static_cast<std::uint8_t>(rng.below(256));
    return ImageBuffer(w, h, std::move(d));
}

/// Textured image with a skin-toned disc, so every transform has something to change.
inline ImageBuffer scene_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    ImageBuffer img(w, h);
    const double cx = w * (0.3 + 0.4 * rng.uniform01()), cy = h * (0.3 + 0.4 * rng.uniform01());
    const double r = std::min(w, h) * 0.25;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx, dy = y - cy;
            RGB8 p{static_cast<std::uint8_t>((x * 7 + y * 3) % 90 + rng.below(20)),
                   static_cast<std::uint8_t>((x * 2 + y * 5) % 80 + rng.below(20)),
                   static_cast<std::uint8_t>((x + y) % 100 + rng.below(20))};
            if (dx * dx + dy * dy < r * r) p = {static_cast<std::uint8_t>(200 + rng.below(30)), 140, 110};
            img.set(x, y, p);
        }
    }
    return img;
}

/// Subject ids p000, p001, ...
inline std::string subject_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%03d", i);
    return buf;
}

/// `n` samples spread round-robin over `subjects` subjects and the ten
/// classes, with small images written under root/c<label>/.
inline data::DatasetManifest write_synthetic_dataset(const std::filesystem::path& root, int n, int subjects,
                                                     int w = 32, int h = 24, std::uint64_t seed = 1) {
    data::DatasetManifest m;
    for (int i = 0; i < n; ++i) {
        data::Sample s;
        s.subject = subject_id(i % subjects);
        s.label = (i / subjects) % data::kNumClasses;
        s.filename = "img_" + std::to_string(i) + ".png";
        const auto dir = root / data::class_name(s.label);
        std::filesystem::create_directories(dir);
        write_image(dir / s.filename, scene_image(w, h, seed * 1000003 + i));
        m.samples.push_back(s);
    }
    return m;
}

/// Manifest (no images) with the given per-class counts over `subjects`
/// subjects, assigned round-robin.
inline data::DatasetManifest counted_manifest(const std::array<int, data::kNumClasses>& counts, int subjects) {
    data::DatasetManifest m;
    int k = 0;
    for (int c = 0; c < data::kNumClasses; ++c) {
        for (int i = 0; i < counts[c]; ++i, ++k) {
            m.samples.push_back({subject_id(k % subjects), c, "img_" + std::to_string(k) + ".jpg",
                                 data::Provenance::kOriginal});
        }
    }
    return m;
}

/// Per-class image counts of the public distracted-driver training list.
inline constexpr std::array<int, data::kNumClasses> kStateFarmCounts{2489, 2267, 2317, 2346, 2326,
                                                                     2312, 2325, 2002, 1911, 2129};

}  // namespace ddkit::testing

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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ddkit::data {

inline constexpr int kNumClasses = 10;

inline constexpr std::array<std::string_view, kNumClasses> kClassDescriptions{
    "safe driving",       "texting - right", "talking on the phone - right", "texting - left",
    "talking on the phone - left", "operating the radio", "drinking", "reaching behind",
    "hair and makeup",    "talking to passenger",
};

/// Which transform produced a sample.
enum class Provenance { kOriginal, kRotated, kJittered, kBlurred, kSkinseg };

std::string_view to_string(Provenance p);
/// Throws ParseError for unknown tags.
Provenance provenance_from(std::string_view tag);

/// "c0" .. "c9".
std::string class_name(int label);
/// Inverse of class_name; returns -1 when `name` is not c0..c9.
int class_label(std::string_view name);

struct Sample {
    std::string subject;
    int label = 0;
    std::string filename;
    Provenance provenance = Provenance::kOriginal;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetManifest {
    std::vector<Sample> samples;
    std::uint64_t seed = 0;
    std::string source;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    /// Distinct subject ids, sorted.
    std::vector<std::string> subjects() const;
};

/// Parses `subject,classname,img[,provenance]` CSV (header required, column
/// order free). Errors name the offending line: unknown class, duplicate
/// filename within one provenance, missing column, empty field.
DatasetManifest parse_manifest(std::string_view csv_text);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// `subject,classname,img,provenance` with LF line endings.
std::string format_manifest(const DatasetManifest& m);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

struct ClassStats {
    std::array<std::size_t, kNumClasses> counts{};
    double median = 0;  // over classes that occur
    std::array<double, kNumClasses> deviation{};  // |count - median| / median
};

/// Throws ValidationError on an empty manifest.
ClassStats class_stats(const DatasetManifest& m);

struct Split {
    DatasetManifest train;
    DatasetManifest test;
    std::vector<std::string> test_subjects;  // sorted
};

/// Moves every sample of `n_test_drivers` randomly chosen subjects into the
/// test side. Subjects are sorted, then drawn with a seeded Fisher-Yates
/// shuffle; both sides keep manifest order. Throws ValidationError unless
/// 0 <= n_test_drivers < number of subjects.
Split split_by_driver(const DatasetManifest& m, int n_test_drivers, std::uint64_t seed);

/// First existing candidate among root/filename and root/c<label>/filename
/// over all roots. Throws IoError when nothing matches.
std::filesystem::path resolve_image(const Sample& s, std::span<const std::filesystem::path> roots);

}  // namespace ddkit::data

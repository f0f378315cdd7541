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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddkit/dataset.hpp"
#include "ddkit/face_blur.hpp"
#include "ddkit/haar.hpp"
#include "ddkit/image.hpp"
#include "ddkit/skin.hpp"

namespace ddkit::augment {

/// Which augmentation sets to build and how.
struct AugmentPlan {
    bool enable_rotation = true;
    double rotation_range = 45.0;  // angles drawn from [-range, +range]
    bool enable_jitter = true;
    JitterParams jitter;
    bool enable_blur_set = false;
    bool enable_skinseg_set = false;
    std::uint64_t seed = 42;

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static AugmentPlan from_json(const nlohmann::json& j);
};

AugmentPlan load_plan(const std::filesystem::path& path);

/// Inputs for the offline (blur / skin segmentation) generators.
struct OfflineConfig {
    std::optional<haar::CascadeModel> cascade;  // required for blur
    haar::DetectParams detect;
    face::FaceRegionPolicy policy;
    face::SigmaRule sigma;
    skin::SkinThresholds thresholds;
};

struct RunOptions {
    std::vector<std::filesystem::path> image_roots;  // where source images are looked up
    std::filesystem::path out_dir;
    unsigned workers = 0;  // 0 = all cores
    bool resume = false;   // keep outputs that already exist
};

/// Counts aggregated over a run. Merging is associative and commutative, so
/// worker count never changes the totals.
struct GenerationReport {
    std::size_t inputs = 0;
    std::size_t written = 0;
    std::size_t reused = 0;
    std::size_t eye_found = 0;
    std::size_t fallback_used = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    std::vector<std::pair<std::string, std::string>> errors;  // (filename, message), input order

    void merge(const GenerationReport& other);
    nlohmann::json to_json() const;
};

struct GenerationResult {
    data::DatasetManifest manifest;
    GenerationReport report;
};

/// `<stem>__<provenance><ext>` for a source filename.
std::string derived_filename(const std::string& filename, data::Provenance p);

/// Seed of the per-image stream for one transform, independent of iteration order.
std::uint64_t image_seed(std::uint64_t seed, data::Provenance p, const std::string& filename);

/// One rotated and/or one jittered copy of every input, written to
/// out_dir/c<label>/; returns inputs + derived samples, shuffled by the plan seed.
GenerationResult classical_augment(const data::DatasetManifest& m, const AugmentPlan& plan, const RunOptions& opts);

/// One derived image per input (`kind` is kBlurred or kSkinseg), in input
/// order. Blur inputs skipped by the fallback policy and inputs that fail
/// are left out of the manifest and counted in the report.
GenerationResult generate_offline(const data::DatasetManifest& m, data::Provenance kind, const OfflineConfig& config,
                                  const RunOptions& opts);

/// Concatenates then shuffles. Throws ValidationError when a filename repeats
/// within one provenance.
data::DatasetManifest ensemble(std::span<const data::DatasetManifest> manifests, std::uint64_t seed);

/// Every set enabled in `plan` (originals always included), ensembled.
GenerationResult run_plan(const data::DatasetManifest& m, const AugmentPlan& plan, const OfflineConfig& config,
                          const RunOptions& opts);

enum class Preset {
    kClassical,  // originals + rotated + jittered            = 3N
    kPaperFull,  // originals + rotated(N/2) + jittered(N/2)
                 //   + blurred + skinseg                      = 4N
    kAllSets,    // originals + rotated + jittered + blurred + skinseg = 5N
};

std::string_view to_string(Preset p);
/// "classical", "paper-full", "all-sets". Throws ValidationError otherwise.
Preset preset_from(std::string_view name);

/// paper-full splits the originals 50/50 (seeded) between rotation and
/// jitter and forces the fixed-region blur fallback so every input yields a
/// blurred image.
GenerationResult run_preset(const data::DatasetManifest& m, Preset preset, const AugmentPlan& plan,
                            const OfflineConfig& config, const RunOptions& opts);

}  // namespace ddkit::augment

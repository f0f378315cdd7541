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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddkit/augment.hpp"
#include "ddkit/face_blur.hpp"
#include "ddkit/haar.hpp"
#include "ddkit/skin.hpp"

namespace ddkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kSummarySchemaVersion = 1;

/// Settings shared by every subcommand. Loaded from a JSON config file, then
/// overridden by command-line flags.
struct RunConfig {
    std::vector<std::filesystem::path> image_roots;
    std::optional<std::filesystem::path> out;
    std::uint64_t seed = 42;
    unsigned workers = 0;
    int test_drivers = 5;
    augment::AugmentPlan plan;
    std::optional<std::filesystem::path> cascade;
    haar::DetectParams detect;
    face::FaceRegionPolicy policy;
    face::SigmaRule sigma;
    std::optional<std::filesystem::path> thresholds_path;
    std::optional<skin::SkinThresholds> thresholds;  // inline thresholds win over thresholds_path

    /// Relative paths are resolved against `base_dir`. Unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    nlohmann::json to_json() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json detect_params_to_json(const haar::DetectParams& p);
haar::DetectParams detect_params_from_json(const nlohmann::json& j);
nlohmann::json policy_to_json(const face::FaceRegionPolicy& p);
face::FaceRegionPolicy policy_from_json(const nlohmann::json& j);
face::Fallback fallback_from(std::string_view s);

/// Hex FNV-1a-64 of a file's bytes, prefixed "fnv1a64:".
std::string hash_file(const std::filesystem::path& path);

/// Runs the tool with argv-style arguments (args[0] is the program name).
/// Returns the process exit code: 0 success, 1 partial failure, 2 config error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ddkit::cli

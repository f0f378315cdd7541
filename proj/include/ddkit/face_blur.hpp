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

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ddkit/haar.hpp"
#include "ddkit/image.hpp"

namespace ddkit::face {

enum class Fallback {
    kSkip,         // keep the original, report skipped
    kFixedRegion,  // blur a fixed normalized rectangle instead
};

/// Rectangle in [0, 1] image-relative coordinates.
struct NormRect {
    double x0 = 0.45;
    double y0 = 0.0;
    double x1 = 0.95;
    double y1 = 0.45;
};

/// Face box geometry relative to the detected eye box.
struct FaceRegionPolicy {
    double width_factor = 3.0;
    double up_factor = 1.5;
    double down_factor = 3.5;
    Fallback fallback = Fallback::kSkip;
    NormRect fixed_region;

    void validate() const;
};

/// Blur strength for a region: either max(w, h) / divisor or a fixed sigma.
struct SigmaRule {
    enum class Mode { kRelative, kFixed };
    Mode mode = Mode::kRelative;
    double value = 6.0;

    double sigma_for(const Rect& region) const;
};

enum class BlurStatus { kEyeFound, kFallbackUsed, kSkipped };

std::string_view to_string(BlurStatus s);

struct BlurOutcome {
    ImageBuffer image;
    BlurStatus status = BlurStatus::kSkipped;
    std::optional<Rect> region;  // set unless skipped
};

/// Largest box; ties go to the smaller top, then the smaller left.
std::optional<haar::Detection> select_primary_eye(std::span<const haar::Detection> dets);

/// Head box around an eye: `width_factor * eye.w` wide and centered on the
/// eye, from `up_factor * eye.h` above the eye to `down_factor * eye.h`
/// below it, clamped to the image.
Rect extrapolate_face_region(const Rect& eye, int img_w, int img_h, const FaceRegionPolicy& policy);

Rect fixed_region_rect(const NormRect& r, int img_w, int img_h);

/// Gaussian blur restricted to `region`; other pixels are copied unchanged.
ImageBuffer blur_region(const ImageBuffer& img, const Rect& region, double sigma);

BlurOutcome blur_face(const ImageBuffer& img, const haar::CascadeModel& model, const FaceRegionPolicy& policy = {},
                      const SigmaRule& sigma_rule = {}, const haar::DetectParams& detect_params = {});

}  // namespace ddkit::face

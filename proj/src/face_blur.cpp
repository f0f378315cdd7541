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

#include "ddkit/face_blur.hpp"

#include <algorithm>
#include <cmath>

#include "ddkit/error.hpp"

namespace ddkit::face {

void FaceRegionPolicy::validate() const {
    if (!(width_factor > 0) || !(up_factor > 0) || !(down_factor > 0)) {
        throw ValidationError("face region factors must be positive");
    }
    const auto& r = fixed_region;
    const bool inside = r.x0 >= 0 && r.y0 >= 0 && r.x1 <= 1 && r.y1 <= 1 && r.x0 < r.x1 && r.y0 < r.y1;
    if (!inside) throw ValidationError("fixed face region must be a non-empty rectangle within the unit square");
}

double SigmaRule::sigma_for(const Rect& region) const {
    if (!(value > 0)) throw ValidationError("sigma rule value must be positive");
    if (mode == Mode::kFixed) return value;
    return std::max(region.w, region.h) / value;
}

std::string_view to_string(BlurStatus s) {
    switch (s) {
        case BlurStatus::kEyeFound: return "eye_found";
        case BlurStatus::kFallbackUsed: return "fallback_used";
        case BlurStatus::kSkipped: return "skipped";
    }
    return "unknown";
}

std::optional<haar::Detection> select_primary_eye(std::span<const haar::Detection> dets) {
    if (dets.empty()) return std::nullopt;
    const auto best = std::min_element(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
        if (a.box.area() != b.box.area()) return a.box.area() > b.box.area();
        if (a.box.y != b.box.y) return a.box.y < b.box.y;
        return a.box.x < b.box.x;
    });
    return *best;
}

Rect extrapolate_face_region(const Rect& eye, int img_w, int img_h, const FaceRegionPolicy& policy) {
    policy.validate();
    if (eye.w <= 0 || eye.h <= 0 || eye.x < 0 || eye.y < 0 || eye.right() > img_w || eye.bottom() > img_h) {
        throw ValidationError("eye box must lie within the image");
    }
    const double cx = eye.x + eye.w / 2.0;
    const double half = policy.width_factor * eye.w / 2.0;
    const int left = std::max(0, static_cast<int>(std::floor(cx - half)));
    const int right = std::min(img_w, static_cast<int>(std::ceil(cx + half)));
    const int top = std::max(0, static_cast<int>(std::floor(eye.y - policy.up_factor * eye.h)));
    const int bottom = std::min(img_h, static_cast<int>(std::ceil(eye.bottom() + policy.down_factor * eye.h)));
    return {left, top, right - left, bottom - top};
}

Rect fixed_region_rect(const NormRect& r, int img_w, int img_h) {
    const int left = std::clamp(static_cast<int>(std::floor(r.x0 * img_w)), 0, img_w - 1);
    const int top = std::clamp(static_cast<int>(std::floor(r.y0 * img_h)), 0, img_h - 1);
    const int right = std::clamp(static_cast<int>(std::ceil(r.x1 * img_w)), left + 1, img_w);
    const int bottom = std::clamp(static_cast<int>(std::ceil(r.y1 * img_h)), top + 1, img_h);
    return {left, top, right - left, bottom - top};
}

ImageBuffer blur_region(const ImageBuffer& img, const Rect& region, double sigma) {
    ImageBuffer out = img;
    paste(out, gaussian_blur(crop(img, region), sigma), region.x, region.y);
    return out;
}

BlurOutcome blur_face(const ImageBuffer& img, const haar::CascadeModel& model, const FaceRegionPolicy& policy,
                      const SigmaRule& sigma_rule, const haar::DetectParams& detect_params) {
    policy.validate();
    const auto dets = haar::detect(img, model, detect_params);
    Rect region;
    BlurStatus status;
    if (const auto eye = select_primary_eye(dets)) {
        region = extrapolate_face_region(eye->box, img.width(), img.height(), policy);
        status = BlurStatus::kEyeFound;
    } else if (policy.fallback == Fallback::kFixedRegion) {
        region = fixed_region_rect(policy.fixed_region, img.width(), img.height());
        status = BlurStatus::kFallbackUsed;
    } else {
        return {img, BlurStatus::kSkipped, std::nullopt};
    }
    return {blur_region(img, region, sigma_rule.sigma_for(region)), status, region};
}

}  // namespace ddkit::face

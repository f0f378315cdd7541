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
#include <vector>

#include "json.hpp"

#include "ddkit/image.hpp"

namespace ddkit::skin {

enum class ColorSpace { kRgb, kHsv, kYCbCr, kNormRgb };

/// Inclusive bounds. For the hue channel min > max denotes the wrapped
/// interval [min, 360] + [0, max].
struct ChannelRange {
    double min = 0;
    double max = 0;

    friend bool operator==(const ChannelRange&, const ChannelRange&) = default;
};

struct SpaceThresholds {
    bool enabled = false;
    std::array<ChannelRange, 3> channels{};

    friend bool operator==(const SpaceThresholds&, const SpaceThresholds&) = default;
};

/// Per-space channel ranges. Units: RGB and YCbCr 0-255; HSV hue in
/// degrees [0, 360], saturation and value in [0, 1]; normalized RGB in [0, 1].
struct SkinThresholds {
    SpaceThresholds rgb;
    SpaceThresholds hsv;
    SpaceThresholds ycbcr;
    SpaceThresholds nrgb;
    double mask_smooth_sigma = 2.0;  // 0 disables smoothing
    double mask_keep_threshold = 0.5;

    SpaceThresholds& space(ColorSpace s);
    const SpaceThresholds& space(ColorSpace s) const;

    /// Throws ValidationError on out-of-domain bounds, min > max on a
    /// non-hue channel, bad smoothing parameters, or no enabled space.
    void validate() const;

    /// Every space enabled with its whole domain; smoothing off.
    static SkinThresholds full_range();
    /// Built-in starting point, identical to presets/default.json.
    static SkinThresholds defaults();
    /// Domain of each channel of a space.
    static std::array<ChannelRange, 3> domain(ColorSpace s);

    nlohmann::json to_json() const;
    /// Parses and validates. Throws ParseError on schema problems and
    /// ValidationError on contract violations.
    static SkinThresholds from_json(const nlohmann::json& j);

    friend bool operator==(const SkinThresholds&, const SkinThresholds&) = default;
};

SkinThresholds load_thresholds(const std::filesystem::path& path);
void save_thresholds(const std::filesystem::path& path, const SkinThresholds& t);

/// Boolean raster, one byte (0 or 1) per pixel.
class SkinMask {
public:
    SkinMask(int width, int height, std::vector<std::uint8_t> bits);

    int width() const { return width_; }
    int height() const { return height_; }
    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    std::span<const std::uint8_t> bits() const { return bits_; }
    std::size_t count() const;

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

/// True when the pixel lies inside the ranges of every enabled space.
bool in_ranges(RGB8 p, const SkinThresholds& t);

/// Conjunction of the enabled spaces, optionally de-speckled by blurring the
/// 0/1 mask with `mask_smooth_sigma` and keeping values >= `mask_keep_threshold`.
SkinMask compute_skin_mask(const ImageBuffer& img, const SkinThresholds& t);

/// Skin pixels copied, others set to black. Throws ValidationError on a size mismatch.
ImageBuffer apply_mask(const ImageBuffer& img, const SkinMask& mask);

ImageBuffer skin_segment(const ImageBuffer& img, const SkinThresholds& t);

}  // namespace ddkit::skin

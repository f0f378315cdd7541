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
#include <span>
#include <vector>

#include "ddkit/random.hpp"

namespace ddkit {

struct RGB8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const RGB8&, const RGB8&) = default;
};

/// Interleaved 8-bit RGB raster, row-major. Always non-empty.
class ImageBuffer {
public:
    static constexpr int kChannels = 3;

    /// Zero-filled image. Throws ValidationError for non-positive dims.
    ImageBuffer(int width, int height);
    ImageBuffer(int width, int height, RGB8 fill);
    /// Adopts `data`, which must hold width * height * 3 samples.
    ImageBuffer(int width, int height, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

    std::span<const std::uint8_t> data() const { return data_; }
    std::span<std::uint8_t> data() { return data_; }

    RGB8 at(int x, int y) const {
        const auto* p = &data_[index(x, y)];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, RGB8 v) {
        auto* p = &data_[index(x, y)];
        p[0] = v.r;
        p[1] = v.g;
        p[2] = v.b;
    }
    std::uint8_t sample(int x, int y, int c) const { return data_[index(x, y) + c]; }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::size_t index(int x, int y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> data_;
};

/// Axis-aligned pixel rectangle.
struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const { return x + w; }
    int bottom() const { return y + h; }
    long long area() const { return static_cast<long long>(w) * h; }
    bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }

    friend bool operator==(const Rect&, const Rect&) = default;
};

double iou(const Rect& a, const Rect& b);

/// Channel-standardized float image, interleaved like ImageBuffer.
/// Only `normalize` produces one.
class NormalizedTensor {
public:
    int width() const { return width_; }
    int height() const { return height_; }
    std::span<const float> data() const { return data_; }
    float at(int x, int y, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }

private:
    friend NormalizedTensor normalize(const ImageBuffer&, const std::array<float, 3>&,
                                      const std::array<float, 3>&);
    NormalizedTensor(int w, int h, std::vector<float> d) : width_(w), height_(h), data_(std::move(d)) {}

    int width_;
    int height_;
    std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Color spaces

struct HsvPixel {
    double h = 0;  // degrees, [0, 360)
    double s = 0;  // [0, 1]
    double v = 0;  // [0, 1]
};

struct YCbCrPixel {
    std::uint8_t y = 0;
    std::uint8_t cb = 128;
    std::uint8_t cr = 128;

    friend bool operator==(const YCbCrPixel&, const YCbCrPixel&) = default;
};

/// Chromaticity; components sum to 1.
struct NormRgbPixel {
    double r = 1.0 / 3;
    double g = 1.0 / 3;
    double b = 1.0 / 3;
};

/// Hexcone model. Achromatic pixels get h = 0.
HsvPixel rgb_to_hsv(RGB8 p);
/// Inverse of rgb_to_hsv; h is taken modulo 360, s and v are clamped.
RGB8 hsv_to_rgb(const HsvPixel& p);
/// Full-range BT.601, rounded to nearest and clamped.
YCbCrPixel rgb_to_ycbcr(RGB8 p);
/// Black maps to (1/3, 1/3, 1/3).
NormRgbPixel rgb_to_norm_rgb(RGB8 p);
/// BT.601 luma, rounded: (299 R + 587 G + 114 B) / 1000.
std::uint8_t luma(RGB8 p);

std::vector<std::uint8_t> to_gray(const ImageBuffer& img);

// ---------------------------------------------------------------------------
// Filtering and geometry

/// Normalized 1-D Gaussian taps for radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Mirror an out-of-range index into [0, n) with edge duplication
/// (... c b a | a b c ... c b a | a ...), valid for any offset.
int reflect_index(int i, int n);

/// Separable Gaussian blur of a single float plane, reflect borders.
std::vector<float> blur_plane(std::span<const float> plane, int width, int height, double sigma);

/// Separable Gaussian blur of each channel. Throws ValidationError if sigma <= 0.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

/// Counter-clockwise rotation (degrees, |angle| <= 180) about the image
/// center with bilinear sampling. Samples falling outside the source take `fill`.
ImageBuffer rotate(const ImageBuffer& img, double angle_deg, RGB8 fill = {});

/// Half-pixel-centered bilinear resize.
ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height);

/// Window of the requested size at offset ((W - w) / 2, (H - h) / 2).
ImageBuffer center_crop(const ImageBuffer& img, int width, int height);

ImageBuffer crop(const ImageBuffer& img, const Rect& r);
void paste(ImageBuffer& dst, const ImageBuffer& src, int x, int y);

inline constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};

/// (x / 255 - mean[c]) / std[c] per channel.
NormalizedTensor normalize(const ImageBuffer& img, const std::array<float, 3>& mean,
                           const std::array<float, 3>& std);

/// Resize to 256x256, center crop 224x224, ImageNet normalization.
NormalizedTensor preprocess_standard(const ImageBuffer& img);

// ---------------------------------------------------------------------------
// Photometric jitter

struct FactorRange {
    double lo = 1.0;
    double hi = 1.0;
};

struct JitterParams {
    FactorRange brightness{0.8, 1.2};
    FactorRange contrast{0.8, 1.2};
    FactorRange saturation{0.8, 1.2};
    FactorRange hue_shift_deg{-18.0, 18.0};

    /// Throws ValidationError unless every range is ordered, factors are
    /// positive and the hue range lies within [-180, 180].
    void validate() const;

    static JitterParams identity() { return {{1, 1}, {1, 1}, {1, 1}, {0, 0}}; }
};

/// Concrete factors drawn for one image.
struct JitterDraw {
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue_shift_deg = 0.0;
};

/// Draws brightness, contrast, saturation, hue (in that order) from `rng`.
JitterDraw draw_jitter(const JitterParams& params, Rng& rng);

/// Applies brightness, contrast, saturation then hue shift. Intermediate
/// values are clamped to [0, 255] after each step; factors of exactly 1
/// (or a zero hue shift) leave the image untouched.
ImageBuffer apply_jitter(const ImageBuffer& img, const JitterDraw& draw);

inline ImageBuffer color_jitter(const ImageBuffer& img, const JitterParams& params, Rng& rng) {
    return apply_jitter(img, draw_jitter(params, rng));
}

}  // namespace ddkit

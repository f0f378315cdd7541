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

#include "ddkit/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ddkit/error.hpp"

namespace ddkit {

namespace {

void check_dims(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ValidationError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
}

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double clamp255(double v) { return std::clamp(v, 0.0, 255.0); }

// Hexcone conversion on real-valued RGB in [0, 255].
HsvPixel hsv_from(double r, double g, double b) {
    r /= 255.0;
    g /= 255.0;
    b /= 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    HsvPixel out;
    out.v = mx;
    out.s = mx > 0 ? delta / mx : 0.0;
    if (delta > 0) {
        double h;
        if (mx == r) {
            h = 60.0 * ((g - b) / delta);
        } else if (mx == g) {
            h = 60.0 * ((b - r) / delta + 2.0);
        } else {
            h = 60.0 * ((r - g) / delta + 4.0);
        }
        if (h < 0) h += 360.0;
        if (h >= 360.0) h -= 360.0;
        out.h = h;
    }
    return out;
}

// Returns RGB in [0, 255] as reals.
std::array<double, 3> rgb_from(const HsvPixel& p) {
    double h = std::fmod(p.h, 360.0);
    if (h < 0) h += 360.0;
    const double s = std::clamp(p.s, 0.0, 1.0);
    const double v = std::clamp(p.v, 0.0, 1.0);
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    const double m = v - c;
    return {(r1 + m) * 255.0, (g1 + m) * 255.0, (b1 + m) * 255.0};
}

// Horizontal then vertical pass over an interleaved buffer, double accumulators.
template <typename In>
std::vector<double> separable_blur(const In* src, int w, int h, int channels, const std::vector<double>& k) {
    const int radius = static_cast<int>(k.size() / 2);
    const auto stride = static_cast<std::size_t>(w) * channels;
    std::vector<double> tmp(stride * h);
    for (int y = 0; y < h; ++y) {
        const In* row = src + y * stride;
        double* out = tmp.data() + y * stride;
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                double acc = 0;
                for (int t = -radius; t <= radius; ++t) {
                    acc += k[t + radius] * static_cast<double>(row[reflect_index(x + t, w) * channels + c]);
                }
                out[x * channels + c] = acc;
            }
        }
    }
    std::vector<double> dst(stride * h);
    for (int y = 0; y < h; ++y) {
        double* out = dst.data() + y * stride;
        for (int t = -radius; t <= radius; ++t) {
            const double wt = k[t + radius];
            const double* row = tmp.data() + reflect_index(y + t, h) * stride;
            for (std::size_t i = 0; i < stride; ++i) out[i] += wt * row[i];
        }
    }
    return dst;
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height) : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(pixel_count() * kChannels, 0);
}

ImageBuffer::ImageBuffer(int width, int height, RGB8 fill) : ImageBuffer(width, height) {
    for (std::size_t i = 0; i < data_.size(); i += kChannels) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != pixel_count() * kChannels) {
        throw ValidationError("image data holds " + std::to_string(data_.size()) + " samples, expected " +
                              std::to_string(pixel_count() * kChannels));
    }
}

double iou(const Rect& a, const Rect& b) {
    const int ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const int iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = static_cast<double>(ix) * iy;
    const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

HsvPixel rgb_to_hsv(RGB8 p) { return hsv_from(p.r, p.g, p.b); }

RGB8 hsv_to_rgb(const HsvPixel& p) {
    const auto rgb = rgb_from(p);
    return {to_u8(rgb[0]), to_u8(rgb[1]), to_u8(rgb[2])};
}

YCbCrPixel rgb_to_ycbcr(RGB8 p) {
    const double r = p.r, g = p.g, b = p.b;
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    const double cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    const double cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    return {to_u8(y), to_u8(cb), to_u8(cr)};
}

NormRgbPixel rgb_to_norm_rgb(RGB8 p) {
    const int sum = p.r + p.g + p.b;
    if (sum == 0) return {};
    const double inv = 1.0 / sum;
    return {p.r * inv, p.g * inv, p.b * inv};
}

std::uint8_t luma(RGB8 p) {
    return static_cast<std::uint8_t>((299 * p.r + 587 * p.g + 114 * p.b + 500) / 1000);
}

std::vector<std::uint8_t> to_gray(const ImageBuffer& img) {
    std::vector<std::uint8_t> out(img.pixel_count());
    const auto d = img.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = luma({d[3 * i], d[3 * i + 1], d[3 * i + 2]});
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0) || !std::isfinite(sigma)) {
        throw ValidationError("gaussian sigma must be positive and finite, got " + std::to_string(sigma));
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

int reflect_index(int i, int n) {
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

std::vector<float> blur_plane(std::span<const float> plane, int width, int height, double sigma) {
    check_dims(width, height);
    if (plane.size() != static_cast<std::size_t>(width) * height) {
        throw ValidationError("plane size does not match dimensions");
    }
    const auto k = gaussian_kernel(sigma);
    const auto blurred = separable_blur(plane.data(), width, height, 1, k);
    return {blurred.begin(), blurred.end()};
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const auto blurred = separable_blur(img.data().data(), img.width(), img.height(), 3, k);
    std::vector<std::uint8_t> out(blurred.size());
    std::transform(blurred.begin(), blurred.end(), out.begin(), to_u8);
    return {img.width(), img.height(), std::move(out)};
}

ImageBuffer rotate(const ImageBuffer& img, double angle_deg, RGB8 fill) {
    if (!(std::abs(angle_deg) <= 180.0)) {
        throw ValidationError("rotation angle must lie in [-180, 180], got " + std::to_string(angle_deg));
    }
    if (angle_deg == 0.0) return img;

    const int w = img.width();
    const int h = img.height();
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    constexpr double kEdge = 1e-6;

    ImageBuffer out(w, h, fill);
    const auto src = img.data();
    auto dst = out.data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            double sx = cx + dx * cs - dy * sn;
            double sy = cy + dx * sn + dy * cs;
            if (sx < -kEdge || sy < -kEdge || sx > w - 1 + kEdge || sy > h - 1 + kEdge) continue;
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < 3; ++c) {
                const double top = src[(y0 * w + x0) * 3 + c] * (1 - fx) + src[(y0 * w + x1) * 3 + c] * fx;
                const double bot = src[(y1 * w + x0) * 3 + c] * (1 - fx) + src[(y1 * w + x1) * 3 + c] * fx;
                dst[(static_cast<std::size_t>(y) * w + x) * 3 + c] = to_u8(top * (1 - fy) + bot * fy);
            }
        }
    }
    return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height) {
    check_dims(width, height);
    if (width == img.width() && height == img.height()) return img;

    const int sw = img.width();
    const int sh = img.height();
    const double scale_x = static_cast<double>(sw) / width;
    const double scale_y = static_cast<double>(sh) / height;
    const auto src = img.data();
    ImageBuffer out(width, height);
    auto dst = out.data();
    for (int y = 0; y < height; ++y) {
        const double sy = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, sh - 1);
        const double fy = sy - y0;
        for (int x = 0; x < width; ++x) {
            const double sx = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, sw - 1);
            const double fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = src[(y0 * sw + x0) * 3 + c] * (1 - fx) + src[(y0 * sw + x1) * 3 + c] * fx;
                const double bot = src[(y1 * sw + x0) * 3 + c] * (1 - fx) + src[(y1 * sw + x1) * 3 + c] * fx;
                dst[(static_cast<std::size_t>(y) * width + x) * 3 + c] = to_u8(top * (1 - fy) + bot * fy);
            }
        }
    }
    return out;
}

ImageBuffer crop(const ImageBuffer& img, const Rect& r) {
    if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.right() > img.width() || r.bottom() > img.height()) {
        throw ValidationError("crop rectangle outside image bounds");
    }
    ImageBuffer out(r.w, r.h);
    const auto src = img.data();
    auto dst = out.data();
    const auto row_bytes = static_cast<std::size_t>(r.w) * 3;
    for (int y = 0; y < r.h; ++y) {
        const auto* from = src.data() + (static_cast<std::size_t>(r.y + y) * img.width() + r.x) * 3;
        std::copy_n(from, row_bytes, dst.data() + y * row_bytes);
    }
    return out;
}

void paste(ImageBuffer& dst, const ImageBuffer& src, int x, int y) {
    if (x < 0 || y < 0 || x + src.width() > dst.width() || y + src.height() > dst.height()) {
        throw ValidationError("paste target outside image bounds");
    }
    const auto row_bytes = static_cast<std::size_t>(src.width()) * 3;
    for (int r = 0; r < src.height(); ++r) {
        std::copy_n(src.data().data() + r * row_bytes, row_bytes,
                    dst.data().data() + (static_cast<std::size_t>(y + r) * dst.width() + x) * 3);
    }
}

ImageBuffer center_crop(const ImageBuffer& img, int width, int height) {
    check_dims(width, height);
    if (width > img.width() || height > img.height()) {
        throw ValidationError("center crop " + std::to_string(width) + "x" + std::to_string(height) +
                              " larger than source " + std::to_string(img.width()) + "x" +
                              std::to_string(img.height()));
    }
    return crop(img, {(img.width() - width) / 2, (img.height() - height) / 2, width, height});
}

NormalizedTensor normalize(const ImageBuffer& img, const std::array<float, 3>& mean,
                           const std::array<float, 3>& std) {
    for (float s : std) {
        if (!(s > 0)) throw ValidationError("normalization std must be positive");
    }
    const auto src = img.data();
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto c = i % 3;
        out[i] = (static_cast<float>(src[i]) / 255.0f - mean[c]) / std[c];
    }
    return {img.width(), img.height(), std::move(out)};
}

NormalizedTensor preprocess_standard(const ImageBuffer& img) {
    return normalize(center_crop(resize_bilinear(img, 256, 256), 224, 224), kImageNetMean, kImageNetStd);
}

void JitterParams::validate() const {
    auto check = [](const FactorRange& r, const char* name, bool factor) {
        if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
            throw ValidationError(std::string("jitter range '") + name + "' must satisfy lo <= hi");
        }
        if (factor && !(r.lo > 0)) {
            throw ValidationError(std::string("jitter factor range '") + name + "' must be positive");
        }
    };
    check(brightness, "brightness", true);
    check(contrast, "contrast", true);
    check(saturation, "saturation", true);
    check(hue_shift_deg, "hue", false);
    if (hue_shift_deg.lo < -180 || hue_shift_deg.hi > 180) {
        throw ValidationError("jitter hue shift must lie within [-180, 180] degrees");
    }
}

JitterDraw draw_jitter(const JitterParams& params, Rng& rng) {
    params.validate();
    JitterDraw d;
    d.brightness = rng.uniform(params.brightness.lo, params.brightness.hi);
    d.contrast = rng.uniform(params.contrast.lo, params.contrast.hi);
    d.saturation = rng.uniform(params.saturation.lo, params.saturation.hi);
    d.hue_shift_deg = rng.uniform(params.hue_shift_deg.lo, params.hue_shift_deg.hi);
    return d;
}

ImageBuffer apply_jitter(const ImageBuffer& img, const JitterDraw& draw) {
    const auto src = img.data();
    std::vector<double> px(src.begin(), src.end());
    const std::size_t n = img.pixel_count();

    auto gray_of = [&](std::size_t i) {
        return 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
    };

    if (draw.brightness != 1.0) {
        for (auto& v : px) v = clamp255(v * draw.brightness);
    }
    if (draw.contrast != 1.0) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += gray_of(i);
        mean /= static_cast<double>(n);
        for (auto& v : px) v = clamp255(draw.contrast * v + (1.0 - draw.contrast) * mean);
    }
    if (draw.saturation != 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = gray_of(i);
            for (int c = 0; c < 3; ++c) {
                px[3 * i + c] = clamp255(draw.saturation * px[3 * i + c] + (1.0 - draw.saturation) * g);
            }
        }
    }
    if (draw.hue_shift_deg != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            auto hsv = hsv_from(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
            hsv.h += draw.hue_shift_deg;
            const auto rgb = rgb_from(hsv);
            for (int c = 0; c < 3; ++c) px[3 * i + c] = clamp255(rgb[c]);
        }
    }

    std::vector<std::uint8_t> out(px.size());
    std::transform(px.begin(), px.end(), out.begin(), to_u8);
    return {img.width(), img.height(), std::move(out)};
}

}  // namespace ddkit

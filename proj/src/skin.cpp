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

#include "ddkit/skin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "ddkit/error.hpp"
#include "ddkit/image_io.hpp"

namespace ddkit::skin {

namespace {

constexpr std::array<std::pair<ColorSpace, const char*>, 4> kSpaces{{
    {ColorSpace::kRgb, "rgb"},
    {ColorSpace::kHsv, "hsv"},
    {ColorSpace::kYCbCr, "ycbcr"},
    {ColorSpace::kNormRgb, "nrgb"},
}};

bool within(double v, const ChannelRange& r) { return v >= r.min && v <= r.max; }

bool within_hue(double h, const ChannelRange& r) {
    if (r.min <= r.max) return within(h, r);
    return h >= r.min || h <= r.max;
}

}  // namespace

SpaceThresholds& SkinThresholds::space(ColorSpace s) {
    switch (s) {
        case ColorSpace::kRgb: return rgb;
        case ColorSpace::kHsv: return hsv;
        case ColorSpace::kYCbCr: return ycbcr;
        case ColorSpace::kNormRgb: return nrgb;
    }
    return rgb;
}

const SpaceThresholds& SkinThresholds::space(ColorSpace s) const {
    return const_cast<SkinThresholds*>(this)->space(s);
}

std::array<ChannelRange, 3> SkinThresholds::domain(ColorSpace s) {
    switch (s) {
        case ColorSpace::kRgb:
        case ColorSpace::kYCbCr: return {{{0, 255}, {0, 255}, {0, 255}}};
        case ColorSpace::kHsv: return {{{0, 360}, {0, 1}, {0, 1}}};
        case ColorSpace::kNormRgb: return {{{0, 1}, {0, 1}, {0, 1}}};
    }
    return {};
}

SkinThresholds SkinThresholds::full_range() {
    SkinThresholds t;
    for (auto [s, name] : kSpaces) t.space(s) = {true, domain(s)};
    t.mask_smooth_sigma = 0;
    return t;
}

SkinThresholds SkinThresholds::defaults() {
    SkinThresholds t;
    t.rgb = {true, {{{95, 255}, {40, 255}, {20, 255}}}};
    t.hsv = {true, {{{335, 50}, {0.1, 0.75}, {0.3, 1.0}}}};
    t.ycbcr = {true, {{{0, 255}, {77, 127}, {133, 173}}}};
    t.nrgb = {false, domain(ColorSpace::kNormRgb)};
    return t;
}

void SkinThresholds::validate() const {
    bool any = false;
    for (auto [s, name] : kSpaces) {
        const auto& sp = space(s);
        any = any || sp.enabled;
        const auto dom = domain(s);
        for (int c = 0; c < 3; ++c) {
            const auto& r = sp.channels[c];
            const std::string where = std::string(name) + " channel " + std::to_string(c);
            if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min < dom[c].min || r.max > dom[c].max ||
                r.max < dom[c].min || r.min > dom[c].max) {
                throw ValidationError(where + ": bounds outside [" + std::to_string(dom[c].min) + ", " +
                                      std::to_string(dom[c].max) + "]");
            }
            const bool hue = s == ColorSpace::kHsv && c == 0;
            if (!hue && r.min > r.max) throw ValidationError(where + ": min exceeds max");
        }
    }
    if (!any) throw ValidationError("skin thresholds: at least one color space must be enabled");
    if (!(mask_smooth_sigma >= 0) || !std::isfinite(mask_smooth_sigma)) {
        throw ValidationError("mask_smooth_sigma must be >= 0");
    }
    if (!(mask_keep_threshold >= 0 && mask_keep_threshold <= 1)) {
        throw ValidationError("mask_keep_threshold must lie in [0, 1]");
    }
}

nlohmann::json SkinThresholds::to_json() const {
    nlohmann::json j;
    for (auto [s, name] : kSpaces) {
        const auto& sp = space(s);
        auto channels = nlohmann::json::array();
        for (const auto& r : sp.channels) channels.push_back({r.min, r.max});
        j[name] = {{"enabled", sp.enabled}, {"channels", channels}};
    }
    j["mask_smooth_sigma"] = mask_smooth_sigma;
    j["mask_keep_threshold"] = mask_keep_threshold;
    return j;
}

SkinThresholds SkinThresholds::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("skin thresholds: expected a JSON object");
    SkinThresholds t;
    for (auto& [key, value] : j.items()) {
        const bool known = key == "mask_smooth_sigma" || key == "mask_keep_threshold" ||
                           std::any_of(kSpaces.begin(), kSpaces.end(), [&](auto p) { return key == p.second; });
        if (!known) throw ParseError("skin thresholds: unknown key '" + key + "'");
    }
    for (auto [s, name] : kSpaces) {
        auto& sp = t.space(s);
        if (!j.contains(name)) {
            sp = {false, domain(s)};
            continue;
        }
        const auto& node = j.at(name);
        if (!node.is_object() || !node.contains("enabled") || !node.at("enabled").is_boolean() ||
            !node.contains("channels") || !node.at("channels").is_array() || node.at("channels").size() != 3) {
            throw ParseError(std::string("skin thresholds: '") + name +
                             "' needs {\"enabled\": bool, \"channels\": [[min,max] x 3]}");
        }
        sp.enabled = node.at("enabled").get<bool>();
        for (int c = 0; c < 3; ++c) {
            const auto& pair = node.at("channels").at(c);
            if (!pair.is_array() || pair.size() != 2 || !pair.at(0).is_number() || !pair.at(1).is_number()) {
                throw ParseError(std::string("skin thresholds: '") + name + "' channel " + std::to_string(c) +
                                 " must be [min, max]");
            }
            sp.channels[c] = {pair.at(0).get<double>(), pair.at(1).get<double>()};
        }
    }
    auto number = [&](const char* key, double fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number()) throw ParseError(std::string("skin thresholds: '") + key + "' must be a number");
        return j.at(key).get<double>();
    };
    t.mask_smooth_sigma = number("mask_smooth_sigma", 0.0);
    t.mask_keep_threshold = number("mask_keep_threshold", 0.5);
    t.validate();
    return t;
}

SkinThresholds load_thresholds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return SkinThresholds::from_json(j);
}

void save_thresholds(const std::filesystem::path& path, const SkinThresholds& t) {
    t.validate();
    const auto text = t.to_json().dump(2) + "\n";
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

SkinMask::SkinMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    if (width <= 0 || height <= 0 || bits_.size() != static_cast<std::size_t>(width) * height) {
        throw ValidationError("skin mask size does not match dimensions");
    }
}

std::size_t SkinMask::count() const {
    return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](auto b) { return b != 0; }));
}

bool in_ranges(RGB8 p, const SkinThresholds& t) {
    if (t.rgb.enabled) {
        const auto& c = t.rgb.channels;
        if (!within(p.r, c[0]) || !within(p.g, c[1]) || !within(p.b, c[2])) return false;
    }
    if (t.hsv.enabled) {
        const auto hsv = rgb_to_hsv(p);
        const auto& c = t.hsv.channels;
        if (!within_hue(hsv.h, c[0]) || !within(hsv.s, c[1]) || !within(hsv.v, c[2])) return false;
    }
    if (t.ycbcr.enabled) {
        const auto y = rgb_to_ycbcr(p);
        const auto& c = t.ycbcr.channels;
        if (!within(y.y, c[0]) || !within(y.cb, c[1]) || !within(y.cr, c[2])) return false;
    }
    if (t.nrgb.enabled) {
        const auto n = rgb_to_norm_rgb(p);
        const auto& c = t.nrgb.channels;
        if (!within(n.r, c[0]) || !within(n.g, c[1]) || !within(n.b, c[2])) return false;
    }
    return true;
}

SkinMask compute_skin_mask(const ImageBuffer& img, const SkinThresholds& t) {
    t.validate();
    const auto n = img.pixel_count();
    const auto d = img.data();
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) {
        bits[i] = in_ranges({d[3 * i], d[3 * i + 1], d[3 * i + 2]}, t) ? 1 : 0;
    }
    if (t.mask_smooth_sigma > 0) {
        std::vector<float> plane(bits.begin(), bits.end());
        const auto smooth = blur_plane(plane, img.width(), img.height(), t.mask_smooth_sigma);
        const auto keep = static_cast<float>(t.mask_keep_threshold);
        for (std::size_t i = 0; i < n; ++i) bits[i] = smooth[i] >= keep ? 1 : 0;
    }
    return {img.width(), img.height(), std::move(bits)};
}

ImageBuffer apply_mask(const ImageBuffer& img, const SkinMask& mask) {
    if (mask.width() != img.width() || mask.height() != img.height()) {
        throw ValidationError("mask dimensions do not match image");
    }
    ImageBuffer out = img;
    auto d = out.data();
    const auto bits = mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (!bits[i]) d[3 * i] = d[3 * i + 1] = d[3 * i + 2] = 0;
    }
    return out;
}

ImageBuffer skin_segment(const ImageBuffer& img, const SkinThresholds& t) {
    return apply_mask(img, compute_skin_mask(img, t));
}

}  // namespace ddkit::skin

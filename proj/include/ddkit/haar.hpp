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
#include <string_view>
#include <vector>

#include "ddkit/image.hpp"

namespace ddkit::haar {

struct WeightedRect {
    Rect rect;
    double weight = 0;
};

/// Single-split decision stump over one Haar feature.
struct WeakClassifier {
    std::vector<WeightedRect> feature;  // 2 or 3 rects
    double node_threshold = 0;
    double leaf_left = 0;   // taken when the normalized feature value < threshold
    double leaf_right = 0;
};

struct Stage {
    double threshold = 0;
    std::vector<WeakClassifier> weak;
};

/// Boosted cascade of upright Haar stumps over a fixed base window.
struct CascadeModel {
    int window_w = 0;
    int window_h = 0;
    std::vector<Stage> stages;

    /// Throws ValidationError if a rect leaves the window, a stage is
    /// empty or a weight is not finite.
    void validate() const;
};

/// Parses the new-style cascade XML (stageType BOOST, featureType HAAR).
/// Throws ParseError naming the offending element on malformed input,
/// tilted features, tree-shaped weak classifiers or other feature types.
CascadeModel parse_cascade(std::string_view xml_text);
CascadeModel load_cascade(const std::filesystem::path& path);

/// Summed-area tables over an 8-bit gray plane, (w + 1) x (h + 1) each.
/// Entry (x, y) holds the sum over all pixels with px < x and py < y.
class IntegralImage {
public:
    IntegralImage(std::span<const std::uint8_t> gray, int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    std::int64_t sum_at(int x, int y) const { return sum_[idx(x, y)]; }
    std::int64_t sqsum_at(int x, int y) const { return sqsum_[idx(x, y)]; }

    std::int64_t rect_sum(const Rect& r) const {
        return sum_[idx(r.x, r.y)] - sum_[idx(r.right(), r.y)] - sum_[idx(r.x, r.bottom())] +
               sum_[idx(r.right(), r.bottom())];
    }
    std::int64_t rect_sqsum(const Rect& r) const {
        return sqsum_[idx(r.x, r.y)] - sqsum_[idx(r.right(), r.y)] - sqsum_[idx(r.x, r.bottom())] +
               sqsum_[idx(r.right(), r.bottom())];
    }

private:
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (width_ + 1) + x; }

    int width_;
    int height_;
    std::vector<std::int64_t> sum_;
    std::vector<std::int64_t> sqsum_;
};

struct Detection {
    Rect box;
    int neighbor_count = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// How the detector covers object sizes larger than the base window.
enum class Pyramid {
    kImage,     // downscale the image, evaluate the cascade at base size
    kFeatures,  // keep the image, scale every feature rectangle
};

struct DetectParams {
    double scale_factor = 1.1;
    int min_neighbors = 3;
    int min_size = 0;  // smallest window side in pixels; 0 = the base window
    int max_size = 0;  // 0 = unbounded
    double group_eps = 0.2;
    std::optional<Rect> roi;
    Pyramid pyramid = Pyramid::kImage;

    void validate() const;
};

/// Clusters similar rectangles (transitive closure of the side-tolerance
/// predicate), averages each cluster and keeps clusters with more than
/// `min_neighbors` members. Output sorted by (y, x, w, h).
std::vector<Detection> group_rectangles(std::span<const Rect> raw, int min_neighbors, double eps = 0.2);

/// Windows accepted by every stage, before grouping.
std::vector<Rect> detect_raw(const ImageBuffer& img, const CascadeModel& model, const DetectParams& params);

/// Multi-scale sliding-window detection followed by grouping.
std::vector<Detection> detect(const ImageBuffer& img, const CascadeModel& model, const DetectParams& params = {});

}  // namespace ddkit::haar

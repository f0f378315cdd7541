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

#include "ddkit/haar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "ddkit/error.hpp"
#include "ddkit/image_io.hpp"

namespace ddkit::haar {

namespace {

namespace pt = boost::property_tree;

std::vector<double> numbers_in(const std::string& text, const std::string& where) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            throw ParseError(where + ": not a number '" + tok + "'");
        }
        out.push_back(v);
    }
    return out;
}

const pt::ptree& require(const pt::ptree& node, const std::string& key, const std::string& where) {
    auto child = node.get_child_optional(key);
    if (!child) throw ParseError(where + ": missing <" + key + "> element");
    return *child;
}

std::string text_of(const pt::ptree& node) {
    auto s = node.data();
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

int int_of(const pt::ptree& node, const std::string& key, const std::string& where) {
    const auto v = numbers_in(text_of(require(node, key, where)), where + "/" + key);
    if (v.size() != 1 || v[0] != std::floor(v[0])) throw ParseError(where + "/" + key + ": expected an integer");
    return static_cast<int>(v[0]);
}

// Children named "_" in document order.
std::vector<const pt::ptree*> items(const pt::ptree& node) {
    std::vector<const pt::ptree*> out;
    for (const auto& [name, child] : node) {
        if (name == "_") out.push_back(&child);
    }
    return out;
}

struct ScaledRect {
    Rect rect;
    double weight;
};

struct ScaledWeak {
    int first = 0;  // index into rect pool
    int count = 0;
    double threshold = 0;
    double left = 0;
    double right = 0;
};

struct ScaledStage {
    int first = 0;
    int count = 0;
    double threshold = 0;
};

// Cascade with every feature rescaled to one window size. Rect weights are
// re-balanced so each feature stays zero-sum after coordinate rounding.
struct ScaledCascade {
    int win_w = 0;
    int win_h = 0;
    Rect norm;
    std::vector<ScaledRect> rects;
    std::vector<ScaledWeak> weak;
    std::vector<ScaledStage> stages;

    ScaledCascade(const CascadeModel& model, double factor) {
        win_w = static_cast<int>(std::lround(model.window_w * factor));
        win_h = static_cast<int>(std::lround(model.window_h * factor));
        const int inset = static_cast<int>(std::lround(factor));
        norm = {inset, inset, static_cast<int>(std::lround((model.window_w - 2) * factor)),
                static_cast<int>(std::lround((model.window_h - 2) * factor))};
        for (const auto& st : model.stages) {
            ScaledStage ss{static_cast<int>(weak.size()), static_cast<int>(st.weak.size()), st.threshold};
            for (const auto& wc : st.weak) {
                ScaledWeak sw{static_cast<int>(rects.size()), static_cast<int>(wc.feature.size()), wc.node_threshold,
                              wc.leaf_left, wc.leaf_right};
                double area0 = 0;
                double rest = 0;
                for (std::size_t k = 0; k < wc.feature.size(); ++k) {
                    const auto& r = wc.feature[k].rect;
                    Rect s{static_cast<int>(std::lround(r.x * factor)), static_cast<int>(std::lround(r.y * factor)),
                           static_cast<int>(std::lround(r.w * factor)), static_cast<int>(std::lround(r.h * factor))};
                    s.w = std::max(1, std::min(s.w, win_w - s.x));
                    s.h = std::max(1, std::min(s.h, win_h - s.y));
                    if (k == 0) {
                        area0 = static_cast<double>(s.area());
                    } else {
                        rest += wc.feature[k].weight * static_cast<double>(s.area());
                    }
                    rects.push_back({s, wc.feature[k].weight});
                }
                if (wc.feature.size() > 1) rects[sw.first].weight = -rest / area0;
                weak.push_back(sw);
            }
            stages.push_back(ss);
        }
    }

    bool accepts(const IntegralImage& ii, int x, int y) const {
        const Rect nr{x + norm.x, y + norm.y, norm.w, norm.h};
        const double area = static_cast<double>(nr.area());
        const double s = static_cast<double>(ii.rect_sum(nr));
        const double sq = static_cast<double>(ii.rect_sqsum(nr));
        const double var = area * sq - s * s;
        if (!(var > 0)) return false;
        const double nf = std::sqrt(var);
        for (const auto& st : stages) {
            double stage_sum = 0;
            for (int w = st.first; w < st.first + st.count; ++w) {
                const auto& wc = weak[w];
                double value = 0;
                for (int k = wc.first; k < wc.first + wc.count; ++k) {
                    const auto& r = rects[k].rect;
                    value += rects[k].weight * static_cast<double>(ii.rect_sum({x + r.x, y + r.y, r.w, r.h}));
                }
                stage_sum += value < wc.threshold * nf ? wc.left : wc.right;
            }
            if (stage_sum < st.threshold) return false;
        }
        return true;
    }
};

// Union-find over indices.
struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

bool similar(const Rect& a, const Rect& b, double eps) {
    const double delta = eps * (std::min(a.w, b.w) + std::min(a.h, b.h)) * 0.5;
    return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta && std::abs(a.right() - b.right()) <= delta &&
           std::abs(a.bottom() - b.bottom()) <= delta;
}

// Half-pixel-centered bilinear resize of a gray plane.
std::vector<std::uint8_t> resize_gray(const std::vector<std::uint8_t>& src, int sw, int sh, int dw, int dh) {
    if (sw == dw && sh == dh) return src;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(dw) * dh);
    const double scale_x = static_cast<double>(sw) / dw;
    const double scale_y = static_cast<double>(sh) / dh;
    for (int y = 0; y < dh; ++y) {
        const double fy_src = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(fy_src);
        const int y1 = std::min(y0 + 1, sh - 1);
        const double fy = fy_src - y0;
        for (int x = 0; x < dw; ++x) {
            const double fx_src = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(fx_src);
            const int x1 = std::min(x0 + 1, sw - 1);
            const double fx = fx_src - x0;
            const double top = src[y0 * sw + x0] * (1 - fx) + src[y0 * sw + x1] * fx;
            const double bot = src[y1 * sw + x0] * (1 - fx) + src[y1 * sw + x1] * fx;
            out[static_cast<std::size_t>(y) * dw + x] =
                static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bot * fy), 0L, 255L));
        }
    }
    return out;
}

}  // namespace

void CascadeModel::validate() const {
    if (window_w <= 0 || window_h <= 0) throw ValidationError("cascade window size must be positive");
    if (stages.empty()) throw ValidationError("cascade has no stages");
    for (std::size_t s = 0; s < stages.size(); ++s) {
        if (stages[s].weak.empty()) {
            throw ValidationError("cascade stage " + std::to_string(s) + " has no weak classifiers");
        }
        for (const auto& wc : stages[s].weak) {
            if (wc.feature.empty() || wc.feature.size() > 3) {
                throw ValidationError("cascade stage " + std::to_string(s) + ": feature must have 1 to 3 rects");
            }
            for (const auto& wr : wc.feature) {
                const auto& r = wr.rect;
                if (r.x < 0 || r.y < 0 || r.w <= 0 || r.h <= 0 || r.right() > window_w || r.bottom() > window_h) {
                    throw ValidationError("cascade stage " + std::to_string(s) + ": feature rect outside window");
                }
                if (!std::isfinite(wr.weight)) {
                    throw ValidationError("cascade stage " + std::to_string(s) + ": non-finite rect weight");
                }
            }
        }
    }
}

CascadeModel parse_cascade(std::string_view xml_text) {
    pt::ptree doc;
    try {
        std::istringstream in{std::string(xml_text)};
        pt::read_xml(in, doc, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(std::string("malformed cascade XML: ") + e.what());
    }
    auto storage = doc.get_child_optional("opencv_storage");
    if (!storage) throw ParseError("missing <opencv_storage> root element");
    const std::string root = "opencv_storage";
    std::string cascade_key;
    for (const auto& [name, child] : *storage) {
        if (name != "<xmlattr>") {
            cascade_key = name;
            break;
        }
    }
    if (cascade_key.empty()) throw ParseError(root + ": empty storage");
    const auto& cascade = storage->get_child(cascade_key);
    const std::string where = root + "/" + cascade_key;
    if (!cascade.get_child_optional("stageType")) {
        throw ParseError(where + ": missing <stageType>; old-style cascades are not supported");
    }
    if (text_of(cascade.get_child("stageType")) != "BOOST") {
        throw ParseError(where + "/stageType: unsupported stage type '" + text_of(cascade.get_child("stageType")) + "'");
    }
    const auto feature_type = text_of(require(cascade, "featureType", where));
    if (feature_type != "HAAR") {
        throw ParseError(where + "/featureType: unsupported feature type '" + feature_type + "'");
    }

    CascadeModel model;
    model.window_w = int_of(cascade, "width", where);
    model.window_h = int_of(cascade, "height", where);

    // Features first, so weak classifiers can be materialized by index.
    std::vector<std::vector<WeightedRect>> features;
    const auto feature_nodes = items(require(cascade, "features", where));
    for (std::size_t f = 0; f < feature_nodes.size(); ++f) {
        const auto fw = where + "/features/_[" + std::to_string(f) + "]";
        const auto& node = *feature_nodes[f];
        if (auto tilted = node.get_child_optional("tilted")) {
            const auto v = numbers_in(text_of(*tilted), fw + "/tilted");
            if (!v.empty() && v[0] != 0) throw ParseError(fw + "/tilted: tilted features are not supported");
        }
        std::vector<WeightedRect> rects;
        const auto rect_nodes = items(require(node, "rects", fw));
        for (std::size_t r = 0; r < rect_nodes.size(); ++r) {
            const auto rw = fw + "/rects/_[" + std::to_string(r) + "]";
            const auto v = numbers_in(text_of(*rect_nodes[r]), rw);
            if (v.size() != 5) throw ParseError(rw + ": expected 'x y w h weight'");
            rects.push_back({{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                              static_cast<int>(v[3])},
                             v[4]});
        }
        if (rects.empty() || rects.size() > 3) throw ParseError(fw + "/rects: expected 1 to 3 rects");
        features.push_back(std::move(rects));
    }

    const auto stage_nodes = items(require(cascade, "stages", where));
    if (stage_nodes.empty()) throw ParseError(where + "/stages: no stages");
    for (std::size_t s = 0; s < stage_nodes.size(); ++s) {
        const auto sw = where + "/stages/_[" + std::to_string(s) + "]";
        Stage stage;
        const auto thr = numbers_in(text_of(require(*stage_nodes[s], "stageThreshold", sw)), sw + "/stageThreshold");
        if (thr.size() != 1) throw ParseError(sw + "/stageThreshold: expected one value");
        stage.threshold = thr[0];
        const auto weak_nodes = items(require(*stage_nodes[s], "weakClassifiers", sw));
        if (weak_nodes.empty()) throw ParseError(sw + "/weakClassifiers: stage has no weak classifiers");
        for (std::size_t w = 0; w < weak_nodes.size(); ++w) {
            const auto ww = sw + "/weakClassifiers/_[" + std::to_string(w) + "]";
            const auto nodes = numbers_in(text_of(require(*weak_nodes[w], "internalNodes", ww)), ww + "/internalNodes");
            if (nodes.size() != 4) {
                throw ParseError(ww + "/internalNodes: only single-split stumps are supported");
            }
            const auto leaves = numbers_in(text_of(require(*weak_nodes[w], "leafValues", ww)), ww + "/leafValues");
            if (leaves.size() != 2) throw ParseError(ww + "/leafValues: expected two leaf values");
            const auto fidx = static_cast<long>(nodes[2]);
            if (fidx < 0 || static_cast<std::size_t>(fidx) >= features.size()) {
                throw ParseError(ww + "/internalNodes: feature index " + std::to_string(fidx) + " out of range");
            }
            stage.weak.push_back({features[fidx], nodes[3], leaves[0], leaves[1]});
        }
        model.stages.push_back(std::move(stage));
    }

    try {
        model.validate();
    } catch (const ValidationError& e) {
        throw ParseError(where + ": " + e.what());
    }
    return model;
}

CascadeModel load_cascade(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return parse_cascade(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

IntegralImage::IntegralImage(std::span<const std::uint8_t> gray, int width, int height)
    : width_(width), height_(height) {
    if (width <= 0 || height <= 0 || gray.size() != static_cast<std::size_t>(width) * height) {
        throw ValidationError("integral image needs a non-empty plane matching its dimensions");
    }
    const auto n = static_cast<std::size_t>(width + 1) * (height + 1);
    sum_.assign(n, 0);
    sqsum_.assign(n, 0);
    for (int y = 0; y < height; ++y) {
        std::int64_t row = 0;
        std::int64_t row_sq = 0;
        for (int x = 0; x < width; ++x) {
            const std::int64_t v = gray[static_cast<std::size_t>(y) * width + x];
            row += v;
            row_sq += v * v;
            sum_[idx(x + 1, y + 1)] = sum_[idx(x + 1, y)] + row;
            sqsum_[idx(x + 1, y + 1)] = sqsum_[idx(x + 1, y)] + row_sq;
        }
    }
}

void DetectParams::validate() const {
    if (!(scale_factor > 1.0)) throw ValidationError("detect scale_factor must exceed 1");
    if (min_neighbors < 0) throw ValidationError("detect min_neighbors must be non-negative");
    if (min_size < 0 || max_size < 0) throw ValidationError("detect size limits must be non-negative");
    if (!(group_eps >= 0)) throw ValidationError("detect group_eps must be non-negative");
}

std::vector<Detection> group_rectangles(std::span<const Rect> raw, int min_neighbors, double eps) {
    if (!(eps >= 0)) throw ValidationError("group eps must be non-negative");
    DisjointSets sets(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (std::size_t j = i + 1; j < raw.size(); ++j) {
            if (similar(raw[i], raw[j], eps)) sets.unite(static_cast<int>(i), static_cast<int>(j));
        }
    }
    struct Acc {
        double x = 0, y = 0, w = 0, h = 0;
        int n = 0;
    };
    std::vector<Acc> acc(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& a = acc[sets.find(static_cast<int>(i))];
        a.x += raw[i].x;
        a.y += raw[i].y;
        a.w += raw[i].w;
        a.h += raw[i].h;
        ++a.n;
    }
    std::vector<Detection> out;
    for (const auto& a : acc) {
        if (a.n == 0 || a.n <= min_neighbors) continue;
        const double inv = 1.0 / a.n;
        out.push_back({{static_cast<int>(std::lround(a.x * inv)), static_cast<int>(std::lround(a.y * inv)),
                        static_cast<int>(std::lround(a.w * inv)), static_cast<int>(std::lround(a.h * inv))},
                       a.n});
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.box.y, a.box.x, a.box.w, a.box.h, b.neighbor_count) <
               std::tie(b.box.y, b.box.x, b.box.w, b.box.h, a.neighbor_count);
    });
    return out;
}

std::vector<Rect> detect_raw(const ImageBuffer& img, const CascadeModel& model, const DetectParams& params) {
    params.validate();
    Rect region{0, 0, img.width(), img.height()};
    if (params.roi) {
        const auto& r = *params.roi;
        if (r.x < 0 || r.y < 0 || r.w <= 0 || r.h <= 0 || r.right() > img.width() || r.bottom() > img.height()) {
            throw ValidationError("detect roi outside image bounds");
        }
        region = r;
    }
    auto gray = to_gray(img);
    if (params.roi) {
        std::vector<std::uint8_t> sub(static_cast<std::size_t>(region.w) * region.h);
        for (int y = 0; y < region.h; ++y) {
            std::copy_n(gray.data() + static_cast<std::size_t>(region.y + y) * img.width() + region.x, region.w,
                        sub.data() + static_cast<std::size_t>(y) * region.w);
        }
        gray = std::move(sub);
    }

    std::vector<Rect> hits;
    if (params.pyramid == Pyramid::kFeatures) {
        const IntegralImage ii(gray, region.w, region.h);
        for (double factor = 1.0;; factor *= params.scale_factor) {
            const ScaledCascade sc(model, factor);
            if (sc.win_w > region.w || sc.win_h > region.h) break;
            if (params.max_size > 0 && (sc.win_w > params.max_size || sc.win_h > params.max_size)) break;
            if (sc.win_w < params.min_size || sc.win_h < params.min_size) continue;
            if (sc.norm.w <= 0 || sc.norm.h <= 0) continue;
            const double step = factor > 2.0 ? factor : 2.0 * factor;
            for (int iy = 0;; ++iy) {
                const int y = static_cast<int>(std::lround(iy * step));
                if (y + sc.win_h > region.h) break;
                for (int ix = 0;; ++ix) {
                    const int x = static_cast<int>(std::lround(ix * step));
                    if (x + sc.win_w > region.w) break;
                    if (sc.accepts(ii, x, y)) hits.push_back({region.x + x, region.y + y, sc.win_w, sc.win_h});
                }
            }
        }
        return hits;
    }

    const ScaledCascade base(model, 1.0);
    for (double factor = 1.0;; factor *= params.scale_factor) {
        const int win_w = static_cast<int>(std::lround(model.window_w * factor));
        const int win_h = static_cast<int>(std::lround(model.window_h * factor));
        if (win_w > region.w || win_h > region.h) break;
        if (params.max_size > 0 && (win_w > params.max_size || win_h > params.max_size)) break;
        if (win_w < params.min_size || win_h < params.min_size) continue;
        const int sw = static_cast<int>(std::lround(region.w / factor));
        const int sh = static_cast<int>(std::lround(region.h / factor));
        if (sw < model.window_w || sh < model.window_h) break;
        const auto scaled = resize_gray(gray, region.w, region.h, sw, sh);
        const IntegralImage ii(scaled, sw, sh);
        const int step = factor > 2.0 ? 1 : 2;
        for (int y = 0; y + model.window_h <= sh; y += step) {
            for (int x = 0; x + model.window_w <= sw; x += step) {
                if (!base.accepts(ii, x, y)) continue;
                Rect r{region.x + static_cast<int>(std::lround(x * factor)),
                       region.y + static_cast<int>(std::lround(y * factor)), win_w, win_h};
                r.w = std::min(r.w, region.right() - r.x);
                r.h = std::min(r.h, region.bottom() - r.y);
                hits.push_back(r);
            }
        }
    }
    return hits;
}

std::vector<Detection> detect(const ImageBuffer& img, const CascadeModel& model, const DetectParams& params) {
    const auto raw = detect_raw(img, model, params);
    auto dets = group_rectangles(raw, params.min_neighbors, params.group_eps);
    const Rect region = params.roi.value_or(Rect{0, 0, img.width(), img.height()});
    for (auto& d : dets) {
        auto& b = d.box;
        b.x = std::clamp(b.x, region.x, region.right() - 1);
        b.y = std::clamp(b.y, region.y, region.bottom() - 1);
        b.w = std::clamp(b.w, 1, region.right() - b.x);
        b.h = std::clamp(b.h, 1, region.bottom() - b.y);
    }
    return dets;
}

}  // namespace ddkit::haar

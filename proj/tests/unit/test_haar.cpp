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

#include <fstream>

#include "doctest.h"
#include "json.hpp"

#include "ddkit/error.hpp"
#include "ddkit/haar.hpp"
#include "ddkit/image_io.hpp"
#include "support.hpp"

using namespace ddkit;
using namespace ddkit::haar;
namespace dt = ddkit::testing;

namespace {

const CascadeModel& eye_cascade() {
    static const CascadeModel m = load_cascade(dt::kDataDir / "haarcascade_eye.xml");
    return m;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("haar") {
    TEST_CASE("shipped eye cascade") {
        const auto& m = eye_cascade();
        // <width>/<height> of the shipped file
        CHECK(m.window_w == 20);
        CHECK(m.window_h == 20);
        CHECK(m.stages.size() == 24);
        CHECK(m.stages.front().weak.size() == 6);
        CHECK_NOTHROW(m.validate());
    }

    TEST_CASE("minimal cascade fixture") {
        const auto m = load_cascade(dt::kFixtureDir / "cascades" / "minimal.xml");
        CHECK(m.window_w == 4);
        REQUIRE(m.stages.size() == 1);
        REQUIRE(m.stages[0].weak.size() == 1);
        const auto& wc = m.stages[0].weak[0];
        CHECK(wc.feature.size() == 2);
        CHECK(wc.node_threshold == doctest::Approx(0.1));
        CHECK(wc.leaf_left == 0.0);
        CHECK(wc.leaf_right == 1.0);
        CHECK(m.stages[0].threshold == 0.5);
    }

    TEST_CASE("parse errors name the element") {
        const auto good = read_text(dt::kFixtureDir / "cascades" / "minimal.xml");
        CHECK_THROWS_AS(parse_cascade(good.substr(0, good.size() / 2)), ParseError);
        CHECK_THROWS_AS(parse_cascade("not xml at all"), ParseError);

        auto tilted = good;
        tilted.replace(tilted.find("<rects>"), 7, "<tilted>1</tilted><rects>");
        try {
            parse_cascade(tilted);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("features/_[0]/tilted") != std::string::npos);
        }

        auto lbp = good;
        lbp.replace(lbp.find(">HAAR<"), 6, ">LBP<");
        try {
            parse_cascade(lbp);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("featureType") != std::string::npos);
        }

        auto tree = good;
        tree.replace(tree.find("0 -1 0 1.0e-01"), 14, "1 -1 0 0.1 0 -2 0 0.2");
        try {
            parse_cascade(tree);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("weakClassifiers/_[0]/internalNodes") != std::string::npos);
        }
    }

    TEST_CASE("integral image") {
        const std::vector<std::uint8_t> g{1, 2, 3, 4};
        IntegralImage ii(g, 2, 2);
        CHECK(ii.rect_sum({0, 0, 2, 2}) == 10);
        CHECK(ii.rect_sqsum({0, 0, 2, 2}) == 30);
        CHECK(ii.rect_sum({1, 0, 1, 2}) == 6);
        for (int i = 0; i <= 2; ++i) {
            CHECK(ii.sum_at(i, 0) == 0);
            CHECK(ii.sum_at(0, i) == 0);
        }
        const std::vector<std::uint8_t> zeros(25, 0);
        IntegralImage z(zeros, 5, 5);
        for (int y = 0; y <= 5; ++y)
            for (int x = 0; x <= 5; ++x) CHECK((z.sum_at(x, y) == 0 && z.sqsum_at(x, y) == 0));
        CHECK_THROWS_AS(IntegralImage(g, 3, 2), ValidationError);
    }

    TEST_CASE("integral image rect sums equal brute force") {
        Rng rng(77);
        std::vector<std::uint8_t> g(32 * 32);
        for (auto& v : g) v = static_cast<std::uint8_t>(rng.below(256));
        IntegralImage ii(g, 32, 32);
        for (int t = 0; t < 100; ++t) {
            const int x = static_cast<int>(rng.below(32)), y = static_cast<int>(rng.below(32));
            const int w = 1 + static_cast<int>(rng.below(32 - x)), h = 1 + static_cast<int>(rng.below(32 - y));
            std::int64_t s = 0, sq = 0;
            for (int yy = y; yy < y + h; ++yy)
                for (int xx = x; xx < x + w; ++xx) {
                    s += g[yy * 32 + xx];
                    sq += g[yy * 32 + xx] * g[yy * 32 + xx];
                }
            CHECK(ii.rect_sum({x, y, w, h}) == s);
            CHECK(ii.rect_sqsum({x, y, w, h}) == sq);
        }
    }

    TEST_CASE("group rectangles") {
        const std::vector<Rect> same{{10, 10, 20, 20}, {10, 10, 20, 20}};
        auto g = group_rectangles(same, 1);
        REQUIRE(g.size() == 1);
        CHECK(g[0].neighbor_count == 2);
        CHECK(g[0].box == Rect{10, 10, 20, 20});

        const std::vector<Rect> apart{{0, 0, 10, 10}, {200, 200, 10, 10}};
        CHECK(group_rectangles(apart, 1).empty());

        // mean of x: (50+52+48+51+49)/5 = 50, y: (60+58+62+61+59)/5 = 60, w: (40+42+38+41+39)/5 = 40
        const std::vector<Rect> jitter{{50, 60, 40, 40}, {52, 58, 42, 42}, {48, 62, 38, 38}, {51, 61, 41, 41},
                                       {49, 59, 39, 39}};
        g = group_rectangles(jitter, 3);
        REQUIRE(g.size() == 1);
        CHECK(g[0].box == Rect{50, 60, 40, 40});
        CHECK(g[0].neighbor_count == 5);
        CHECK(group_rectangles(jitter, 5).empty());
    }

    TEST_CASE("blank image yields nothing") {
        ImageBuffer blank(160, 120, RGB8{128, 128, 128});
        CHECK(detect(blank, eye_cascade()).empty());
    }

    TEST_CASE("fixture detections") {
        const auto ann = nlohmann::json::parse(read_text(dt::kFixtureDir / "eyes" / "annotations.json"));
        const auto& entry = ann.at(0);
        const auto img = read_image(dt::kFixtureDir / "eyes" / entry.at("file").get<std::string>());
        DetectParams p;
        const auto d3 = detect(img, eye_cascade(), p);
        REQUIRE_FALSE(d3.empty());
        double best = 0;
        for (const auto& d : d3) {
            for (const auto& e : entry.at("eyes")) {
                const auto a = e.get<std::array<int, 4>>();
                best = std::max(best, iou(d.box, {a[0], a[1], a[2], a[3]}));
            }
            CHECK(d.box.x >= 0);
            CHECK(d.box.right() <= img.width());
            CHECK(d.box.bottom() <= img.height());
        }
        CHECK(best >= 0.5);

        // deterministic
        CHECK(detect(img, eye_cascade(), p) == d3);

        // every group surviving min_neighbors = 3 also survives at 0
        p.min_neighbors = 0;
        const auto d0 = detect(img, eye_cascade(), p);
        CHECK(d0.size() >= d3.size());
        for (const auto& d : d3) {
            const bool found = std::any_of(d0.begin(), d0.end(), [&](const Detection& e) { return e.box == d.box; });
            CHECK(found);
        }
        p.min_neighbors = 10;
        CHECK(detect(img, eye_cascade(), p).size() <= d3.size());
    }

    TEST_CASE("region of interest") {
        const auto img = read_image(dt::kFixtureDir / "eyes" / "driver_00.png");
        DetectParams p;
        p.roi = Rect{380, 160, 140, 100};
        const auto dets = detect(img, eye_cascade(), p);
        REQUIRE_FALSE(dets.empty());
        for (const auto& d : dets) {
            CHECK(d.box.x >= 380);
            CHECK(d.box.y >= 160);
            CHECK(d.box.right() <= 520);
            CHECK(d.box.bottom() <= 260);
        }
        p.roi = Rect{0, 0, 100, 100};
        CHECK(detect(img, eye_cascade(), p).empty());
    }

    TEST_CASE("feature-scaling pyramid also finds the fixture eye") {
        const auto img = read_image(dt::kFixtureDir / "eyes" / "driver_00.png");
        DetectParams p;
        p.pyramid = Pyramid::kFeatures;
        const auto dets = detect(img, eye_cascade(), p);
        double best = 0;
        for (const auto& d : dets) best = std::max(best, iou(d.box, {419, 207, 28, 28}));
        CHECK(best >= 0.5);
    }

    TEST_CASE("detect params validation") {
        DetectParams p;
        p.scale_factor = 1.0;
        CHECK_THROWS_AS(p.validate(), ValidationError);
        p = {};
        p.min_neighbors = -1;
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
}

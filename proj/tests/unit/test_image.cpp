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

#include <cmath>
#include <numbers>

#include "doctest.h"

#include "ddkit/error.hpp"
#include "ddkit/image.hpp"
#include "ddkit/image_io.hpp"
#include "support.hpp"

using namespace ddkit;
using ddkit::testing::random_image;

namespace {

// Mirror with edge duplication, written independently of reflect_index.
int mirror(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

// Dense 2-D Gaussian convolution: g(dx) g(dy) evaluated per tap, no separation.
ImageBuffer dense_blur(const ImageBuffer& img, double sigma) {
    const int r = static_cast<int>(std::ceil(3 * sigma));
    double norm = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) norm += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    ImageBuffer out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double acc[3] = {0, 0, 0};
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / norm;
                    const auto p = img.at(mirror(x + dx, img.width()), mirror(y + dy, img.height()));
                    acc[0] += w * p.r;
                    acc[1] += w * p.g;
                    acc[2] += w * p.b;
                }
            }
            auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
            out.set(x, y, {q(acc[0]), q(acc[1]), q(acc[2])});
        }
    }
    return out;
}

int max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
    int m = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST_SUITE("imaging") {
    TEST_CASE("image buffer rejects bad dimensions") {
        CHECK_THROWS_AS(ImageBuffer(0, 4), ValidationError);
        CHECK_THROWS_AS(ImageBuffer(4, -1), ValidationError);
        CHECK_THROWS_AS(ImageBuffer(2, 2, std::vector<std::uint8_t>(11)), ValidationError);
        ImageBuffer ok(3, 2, RGB8{1, 2, 3});
        CHECK(ok.data().size() == 18);
        CHECK(ok.at(2, 1) == RGB8{1, 2, 3});
    }

    TEST_CASE("hsv reference values") {
        auto red = rgb_to_hsv({255, 0, 0});
        CHECK(red.h == 0.0);
        CHECK(red.s == 1.0);
        CHECK(red.v == 1.0);
        auto gray = rgb_to_hsv({128, 128, 128});
        CHECK(gray.h == 0.0);
        CHECK(gray.s == 0.0);
        CHECK(gray.v == doctest::Approx(0.50196).epsilon(1e-4));
        // by hand: max = G = 200, delta = 190, h = 60 * (2 + (57 - 10) / 190)
        auto p = rgb_to_hsv({10, 200, 57});
        CHECK(p.h == doctest::Approx(60.0 * (2.0 + 47.0 / 190.0)).epsilon(1e-12));
        CHECK(p.s == doctest::Approx(0.95).epsilon(1e-12));
        CHECK(p.v == doctest::Approx(200.0 / 255.0).epsilon(1e-12));
        // negative hue wraps into [0, 360)
        auto m = rgb_to_hsv({255, 0, 10});
        CHECK(m.h >= 0.0);
        CHECK(m.h < 360.0);
        CHECK(m.h == doctest::Approx(360.0 - 60.0 * 10.0 / 255.0));
    }

    TEST_CASE("hsv round trip over a 16^3 grid") {
        for (int r = 0; r < 256; r += 17)
            for (int g = 0; g < 256; g += 17)
                for (int b = 0; b < 256; b += 17) {
                    const RGB8 p{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                 static_cast<std::uint8_t>(b)};
                    const auto q = hsv_to_rgb(rgb_to_hsv(p));
                    CHECK(std::abs(q.r - p.r) <= 1);
                    CHECK(std::abs(q.g - p.g) <= 1);
                    CHECK(std::abs(q.b - p.b) <= 1);
                }
    }

    TEST_CASE("ycbcr full range bt601") {
        CHECK(rgb_to_ycbcr({255, 255, 255}) == YCbCrPixel{255, 128, 128});
        CHECK(rgb_to_ycbcr({0, 0, 0}) == YCbCrPixel{0, 128, 128});
        // 0.299*200 + 0.587*30 + 0.114*99 = 88.696; Cb = 133.815; Cr = 207.389
        CHECK(rgb_to_ycbcr({200, 30, 99}) == YCbCrPixel{89, 134, 207});
        // pure blue pushes Cb to 255.5 before clamping
        CHECK(rgb_to_ycbcr({0, 0, 255}).cb == 255);
    }

    TEST_CASE("normalized rgb") {
        auto eq = rgb_to_norm_rgb({100, 100, 100});
        CHECK(eq.r == doctest::Approx(1.0 / 3));
        CHECK(eq.b == doctest::Approx(1.0 / 3));
        auto red = rgb_to_norm_rgb({255, 0, 0});
        CHECK(red.r == 1.0);
        CHECK(red.g == 0.0);
        auto black = rgb_to_norm_rgb({0, 0, 0});
        CHECK(black.r == doctest::Approx(1.0 / 3));
        CHECK(black.g == doctest::Approx(1.0 / 3));
        CHECK(black.b == doctest::Approx(1.0 / 3));
        auto p = rgb_to_norm_rgb({12, 200, 41});
        CHECK(p.r + p.g + p.b == doctest::Approx(1.0));
    }

    TEST_CASE("luma matches the integer formula") {
        CHECK(luma({255, 255, 255}) == 255);
        CHECK(luma({0, 0, 0}) == 0);
        CHECK(luma({200, 30, 99}) == 89);
    }

    TEST_CASE("gaussian kernel") {
        CHECK_THROWS_AS(gaussian_kernel(0.0), ValidationError);
        CHECK_THROWS_AS(gaussian_kernel(-1.0), ValidationError);
        const auto k = gaussian_kernel(1.5);
        CHECK(k.size() == 2 * 5 + 1);  // radius ceil(4.5)
        double sum = 0;
        for (double v : k) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(k[0] == doctest::Approx(k[10]));
    }

    TEST_CASE("reflect index") {
        CHECK(reflect_index(-1, 5) == 0);
        CHECK(reflect_index(-2, 5) == 1);
        CHECK(reflect_index(5, 5) == 4);
        CHECK(reflect_index(6, 5) == 3);
        CHECK(reflect_index(2, 5) == 2);
        for (int i = -40; i < 40; ++i) CHECK(reflect_index(i, 3) == mirror(i, 3));
        CHECK(reflect_index(-7, 1) == 0);
    }

    TEST_CASE("blur of a constant image is the same constant") {
        ImageBuffer img(13, 9, RGB8{77, 140, 3});
        for (double s : {0.5, 1.0, 3.0, 10.0}) CHECK(gaussian_blur(img, s) == img);
        CHECK_THROWS_AS(gaussian_blur(img, 0.0), ValidationError);
    }

    TEST_CASE("blur conserves energy of a centered impulse") {
        const int n = 21;
        std::vector<float> plane(n * n, 0.0f);
        plane[10 * n + 10] = 255.0f;
        const auto out = blur_plane(plane, n, n, 1.0);
        double sum = 0;
        for (float v : out) sum += v;
        CHECK(std::abs(sum - 255.0) <= 0.001 * 255.0);

        ImageBuffer img(n, n);
        img.set(10, 10, {255, 255, 255});
        const auto b = gaussian_blur(img, 1.0);
        long total = 0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) total += b.at(x, y).r;
        CHECK(std::abs(total - 255) <= 8);  // per-sample rounding only
    }

    TEST_CASE("blur matches dense 2-D convolution") {
        Rng rng(11);
        for (int t = 0; t < 5; ++t) {
            const auto img = random_image(8, 8, rng);
            CHECK(max_abs_diff(gaussian_blur(img, 1.5), dense_blur(img, 1.5)) <= 1);
        }
        const auto odd = random_image(5, 17, rng);
        CHECK(max_abs_diff(gaussian_blur(odd, 2.2), dense_blur(odd, 2.2)) <= 1);
    }

    TEST_CASE("blur output stays within input range") {
        Rng rng(5);
        for (int t = 0; t < 10; ++t) {
            const auto img = random_image(12, 10, rng);
            const auto out = gaussian_blur(img, 0.5 + t * 0.4);
            for (int c = 0; c < 3; ++c) {
                int lo = 255, hi = 0, olo = 255, ohi = 0;
                for (int y = 0; y < 10; ++y)
                    for (int x = 0; x < 12; ++x) {
                        lo = std::min<int>(lo, img.sample(x, y, c));
                        hi = std::max<int>(hi, img.sample(x, y, c));
                        olo = std::min<int>(olo, out.sample(x, y, c));
                        ohi = std::max<int>(ohi, out.sample(x, y, c));
                    }
                CHECK(olo >= lo);
                CHECK(ohi <= hi);
            }
        }
    }

    TEST_CASE("rotate") {
        Rng rng(3);
        const auto img = random_image(20, 14, rng);
        CHECK(rotate(img, 0.0) == img);
        CHECK_THROWS_AS(rotate(img, 181.0), ValidationError);

        ImageBuffer white(31, 31, RGB8{255, 255, 255});
        const auto r45 = rotate(white, 45.0, RGB8{0, 0, 0});
        CHECK(r45.at(0, 0) == RGB8{0, 0, 0});
        CHECK(r45.at(30, 0) == RGB8{0, 0, 0});
        CHECK(r45.at(0, 30) == RGB8{0, 0, 0});
        CHECK(r45.at(30, 30) == RGB8{0, 0, 0});
        CHECK(r45.at(15, 15) == RGB8{255, 255, 255});
        const auto filled = rotate(white, 45.0, RGB8{9, 8, 7});
        CHECK(filled.at(0, 0) == RGB8{9, 8, 7});
    }

    TEST_CASE("rotate +90 then -90 restores the interior") {
        Rng rng(17);
        ImageBuffer img(24, 24);
        for (int y = 2; y < 22; ++y)
            for (int x = 2; x < 22; ++x)
                img.set(x, y, {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                               static_cast<std::uint8_t>(rng.below(256))});
        const auto back = rotate(rotate(img, 90.0), -90.0);
        for (int y = 2; y < 22; ++y)
            for (int x = 2; x < 22; ++x)
                for (int c = 0; c < 3; ++c) CHECK(std::abs(back.sample(x, y, c) - img.sample(x, y, c)) <= 2);
    }

    TEST_CASE("rotate +90 moves the top edge to the left edge") {
        // counter-clockwise: the top-right corner lands at the top-left
        ImageBuffer img(9, 9);
        img.set(8, 0, {255, 0, 0});
        const auto r = rotate(img, 90.0);
        CHECK(r.at(0, 0) == RGB8{255, 0, 0});
    }

    TEST_CASE("resize, crop and standard preprocessing") {
        Rng rng(2);
        const auto img = random_image(16, 12, rng);
        CHECK(resize_bilinear(img, 16, 12) == img);
        const auto up = resize_bilinear(ImageBuffer(4, 4, RGB8{10, 20, 30}), 9, 7);
        CHECK(up.at(8, 6) == RGB8{10, 20, 30});

        const auto big = random_image(256, 256, rng);
        const auto c = center_crop(big, 224, 224);
        CHECK(c.width() == 224);
        CHECK(c.at(0, 0) == big.at(16, 16));
        CHECK(c.at(223, 223) == big.at(239, 239));
        CHECK_THROWS_AS(center_crop(img, 17, 4), ValidationError);

        const auto t = preprocess_standard(random_image(640, 480, rng));
        CHECK(t.width() == 224);
        CHECK(t.height() == 224);
        for (float v : t.data()) CHECK(std::isfinite(v));
    }

    TEST_CASE("normalize constants and inverse") {
        ImageBuffer img(1, 1, RGB8{124, 116, 104});
        const auto t = normalize(img, kImageNetMean, kImageNetStd);
        CHECK(std::abs(t.at(0, 0, 0)) < 0.01f);
        CHECK(kImageNetMean[0] == 0.485f);
        CHECK(kImageNetStd[2] == 0.225f);
        Rng rng(8);
        const auto r = random_image(7, 5, rng);
        const auto n = normalize(r, kImageNetMean, kImageNetStd);
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 7; ++x)
                for (int ch = 0; ch < 3; ++ch) {
                    const double back = (n.at(x, y, ch) * kImageNetStd[ch] + kImageNetMean[ch]) * 255.0;
                    CHECK(std::abs(back - r.sample(x, y, ch)) <= 0.5);
                }
    }

    TEST_CASE("color jitter") {
        Rng rng(1);
        const auto img = random_image(10, 10, rng);
        Rng a(4);
        CHECK(color_jitter(img, JitterParams::identity(), a) == img);

        ImageBuffer gray(4, 4, RGB8{100, 100, 100});
        JitterDraw bright;
        bright.brightness = 2.0;
        CHECK(apply_jitter(gray, bright).at(1, 1) == RGB8{200, 200, 200});

        Rng r1(99), r2(99);
        CHECK(color_jitter(img, JitterParams{}, r1) == color_jitter(img, JitterParams{}, r2));

        JitterParams bad;
        bad.brightness = {1.2, 0.8};
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = {};
        bad.contrast = {0.0, 1.0};
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }

    TEST_CASE("jitter draws stay in range") {
        Rng rng(21);
        JitterParams p;
        for (int i = 0; i < 1000; ++i) {
            const auto d = draw_jitter(p, rng);
            CHECK(d.brightness >= 0.8);
            CHECK(d.brightness <= 1.2);
            CHECK(d.hue_shift_deg >= -18.0);
            CHECK(d.hue_shift_deg <= 18.0);
        }
    }

    TEST_CASE("zero saturation factor gives gray pixels") {
        Rng rng(6);
        const auto img = random_image(6, 6, rng);
        JitterDraw d;
        d.saturation = 1e-9;
        const auto out = apply_jitter(img, d);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) {
                const auto p = out.at(x, y);
                CHECK(std::abs(p.r - p.g) <= 1);
                CHECK(std::abs(p.g - p.b) <= 1);
            }
    }

    TEST_CASE("iou") {
        CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
        CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
        CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
    }

    TEST_CASE("png and jpeg round trip") {
        ddkit::testing::TempDir dir;
        Rng rng(12);
        const auto img = random_image(19, 7, rng);
        write_image(dir / "a.png", img);
        CHECK(read_image(dir / "a.png") == img);
        write_image(dir / "b.jpg", img);
        const auto j = read_image(dir / "b.jpg");
        CHECK(j.width() == 19);
        CHECK(j.height() == 7);
        CHECK_THROWS_AS(write_image(dir / "c.bmp", img), IoError);
        const std::vector<std::uint8_t> junk{1, 2, 3, 4};
        CHECK_THROWS_AS(decode_image(junk), IoError);
        CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
    }
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "pupilfield/lightfield.hpp"

using namespace pupilfield;
using lf::Image;
using lf::LightField4D;

namespace {

// Pixel-aligned configuration: d_MLI = 0.1 mm = 10 px.
spc::SpcConfig aligned_config(int micro = 9) {
    spc::SpcConfig c;
    c.f_M = 100.0;
    c.X = 40.0;
    c.o_f = 500.0;
    c.d = 125.0;
    c.f_m = 1.0;
    c.d_ML = 0.1 * 85.0 / 86.0;
    c.mla_thickness = 0.1;
    c.s_px = 0.01;
    c.sensor_px = {micro * 10, micro * 10};
    c.micro_count = {micro, micro};
    return c;
}

LightField4D random_lightfield(int spatial, int views, unsigned seed) {
    LightField4D field(spatial, spatial, views, views);
    field.delta_st_mm = 0.1;
    field.delta_uv_mm = 0.85;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    for (auto& v : field.samples) v = d(rng);
    return field;
}

Image random_image(int w, int h, unsigned seed) {
    Image img(w, h);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    for (auto& v : img.samples) v = d(rng);
    return img;
}

}  // namespace

TEST_CASE("devignette") {
    SUBCASE("raw equal to white yields ones") {
        const Image raw = random_image(12, 9, 1);
        const auto out = lf::devignette(raw, raw);
        for (std::size_t i = 0; i < out.image.samples.size(); ++i)
            if (raw.samples[i] > 1e-6f)
                CHECK(out.image.samples[i] == doctest::Approx(1.0f));
    }
    SUBCASE("constant white rescales") {
        const Image raw = random_image(8, 8, 2);
        Image white(8, 8, 0.5f);
        const auto out = lf::devignette(raw, white);
        for (std::size_t i = 0; i < raw.samples.size(); ++i)
            CHECK(out.image.samples[i] == doctest::Approx(raw.samples[i] * 2.0f));
    }
    SUBCASE("dark white pixels are masked and counted") {
        Image raw(4, 4, 1.0f);
        Image white(4, 4, 1.0f);
        white.at(2, 1) = 0.0f;
        const auto out = lf::devignette(raw, white);
        CHECK(out.masked_count == 1);
        CHECK(out.image.at(2, 1) == 0.0f);
        CHECK(out.mask[1 * 4 + 2] == 1);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(lf::devignette(Image(4, 4), Image(5, 4)), lf::ModelError);
    }
}

TEST_CASE("decode and interleave are mutually inverse bijections") {
    const auto c = aligned_config();
    const Image raw = random_image(90, 90, 3);
    const auto field = lf::decode(raw, c);
    CHECK(field.i_n == 9);
    CHECK(field.k_n == 10);
    CHECK(field.center_k == 5);
    const Image back = lf::interleave(field);
    CHECK(back.samples == raw.samples);  // bit exact

    const auto field2 = lf::decode(back, c);
    CHECK(field2.samples == field.samples);
}

TEST_CASE("decode refuses misaligned configs with guidance") {
    auto c = aligned_config();
    c.d_ML = 0.1;  // d_MLI = 10.1176 px
    try {
        lf::decode(random_image(90, 90, 4), c);
        FAIL("expected a ModelError");
    } catch (const lf::ModelError& e) {
        CHECK(std::string(e.what()).find("design_spc") != std::string::npos);
    }
}

TEST_CASE("1x1 microimages decode to the raw image itself") {
    auto c = aligned_config();
    // Make the MIC pitch exactly one pixel.
    c.s_px = c.d_ML * 86.0 / 85.0;
    c.sensor_px = {9, 9};
    const Image raw = random_image(9, 9, 5);
    const auto field = lf::decode(raw, c);
    CHECK(field.k_n == 1);
    CHECK(field.l_n == 1);
    CHECK(field.samples == raw.samples);
}

TEST_CASE("refocus at zero shift is the per-pixel view mean") {
    const auto field = random_lightfield(11, 5, 6);
    const auto out = lf::refocus(field, 0.0);
    CHECK(out.image.width == 11);
    CHECK(out.image.height == 11);
    CHECK(out.origin_i == 0);
    for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
            double acc = 0.0;
            for (int k = 0; k < 5; ++k)
                for (int l = 0; l < 5; ++l) acc += field.at(i, j, k, l);
            CHECK(out.image.at(i, j) == doctest::Approx(acc / 25.0).epsilon(1e-6));
        }
}

TEST_CASE("integer shifts reproduce the integer-translated average bitwise") {
    const auto field = random_lightfield(15, 3, 7);
    const int shift = 2;
    const auto out = lf::refocus(field, static_cast<double>(shift));

    // Direct integer-shifted average over the same crop.
    const int kc = field.center_k, lc = field.center_l;
    for (int j = 0; j < out.image.height; ++j)
        for (int i = 0; i < out.image.width; ++i) {
            double acc = 0.0;
            for (int k = 0; k < field.k_n; ++k)
                for (int l = 0; l < field.l_n; ++l)
                    acc += field.at(out.origin_i + i + shift * (k - kc),
                                    out.origin_j + j + shift * (l - lc), k, l);
            const float expected = static_cast<float>(acc / (field.k_n * field.l_n));
            CHECK(out.image.at(i, j) == expected);  // bit comparable
        }
}

TEST_CASE("refocus crops border pixels lacking support") {
    const auto field = random_lightfield(20, 5, 8);
    const auto out = lf::refocus(field, 1.5);
    // Offsets span 1.5 * (-2..2) = [-3, 3]: ceil(3) lost on each side.
    CHECK(out.origin_i == 3);
    CHECK(out.image.width == 20 - 6);
    CHECK_THROWS_AS(lf::refocus(field, 7.0), lf::ModelError);  // < 8 px overlap
}

TEST_CASE("parallel refocus matches the serial reference bitwise") {
    const auto field = random_lightfield(21, 5, 9);
    for (const double s : {-1.3, -0.25, 0.0, 0.6, 2.0}) {
        const auto par = lf::refocus(field, s);
        const auto ser = lf::reference::refocus(field, s);
        CHECK(par.origin_i == ser.origin_i);
        CHECK(par.image.samples == ser.image.samples);
    }
}

TEST_CASE("focus measure") {
    SUBCASE("constant image scores zero") {
        CHECK(lf::focus_measure(Image(16, 16, 0.7f)) == 0.0);
    }
    SUBCASE("offset invariance") {
        const Image img = random_image(16, 16, 10);
        Image shifted = img;
        for (auto& v : shifted.samples) v += 5.0f;
        CHECK(lf::focus_measure(shifted) ==
              doctest::Approx(lf::focus_measure(img)).epsilon(1e-4));
    }
    SUBCASE("quadratic homogeneity") {
        const Image img = random_image(16, 16, 11);
        Image scaled = img;
        for (auto& v : scaled.samples) v *= 3.0f;
        CHECK(lf::focus_measure(scaled) ==
              doctest::Approx(9.0 * lf::focus_measure(img)).epsilon(1e-6));
    }
    SUBCASE("reflection invariance") {
        const Image img = random_image(17, 13, 12);
        Image mirrored(img.width, img.height);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                mirrored.at(img.width - 1 - x, y) = img.at(x, y);
        CHECK(lf::focus_measure(mirrored) ==
              doctest::Approx(lf::focus_measure(img)).epsilon(1e-9));
    }
    SUBCASE("too-small images are rejected") {
        CHECK_THROWS_AS(lf::focus_measure(Image(2, 5)), lf::ModelError);
    }
    SUBCASE("parallel equals serial") {
        const Image img = random_image(33, 29, 13);
        CHECK(lf::focus_measure(img) == lf::reference::focus_measure(img));
    }
}

TEST_CASE("metric lookup matches integer indexing on lattice points") {
    const auto field = random_lightfield(9, 5, 14);
    for (int i = 0; i < 9; i += 2)
        for (int k = 0; k < 5; ++k) {
            const double s = i * field.delta_st_mm;
            const double u = k * field.delta_uv_mm;
            CHECK(field.metric_sample(s, s, u, u) == field.at(i, i, k, k));
        }
    // Between lattice points the lookup interpolates.
    const float mid = field.metric_sample(0.5 * field.delta_st_mm, 0.0, 0.0, 0.0);
    const float expect = 0.5f * (field.at(0, 0, 0, 0) + field.at(1, 0, 0, 0));
    CHECK(mid == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("best_shift flags degenerate and multimodal profiles") {
    SUBCASE("constant texture is ambiguous") {
        LightField4D field(24, 24, 3, 3);
        field.delta_st_mm = 0.1;
        field.delta_uv_mm = 0.85;
        for (auto& v : field.samples) v = 0.25f;
        const auto report = lf::best_shift(field, -1.0, 1.0);
        CHECK(report.flag == lf::FocusSearchFlag::ambiguous);
    }
    SUBCASE("empty search range") {
        const auto field = random_lightfield(10, 5, 15);
        CHECK_THROWS_AS(lf::best_shift(field, 5.0, 6.0), lf::ModelError);
        CHECK_THROWS_AS(lf::best_shift(field, 1.0, -1.0), lf::ModelError);
    }
}

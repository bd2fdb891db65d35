#include <doctest.h>

#include <cmath>
#include <random>

#include "pupilfield/error_models.hpp"

using namespace pupilfield;
using error_models::ErrorFlag;
using spc::SpcConfig;

namespace {

SpcConfig preset_a() {
    SpcConfig c;
    c.f_M = 100.0;
    c.X = 40.0;
    c.o_f = 500.0;
    c.d = 125.0;
    c.f_m = 1.0;
    c.d_ML = 0.1;
    c.mla_thickness = 0.1;
    c.s_px = 0.01;
    c.sensor_px = {650, 650};
    c.micro_count = {65, 65};
    return c;
}

SpcConfig random_finite_config(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> fd(20.0, 200.0);
    std::uniform_real_distribution<double> xr(-0.8, 0.8);
    std::uniform_real_distribution<double> od(2.5, 50.0);
    std::uniform_real_distribution<double> fm(0.5, 3.0);
    SpcConfig c;
    c.f_M = fd(rng);
    c.X = xr(rng) * c.f_M;
    c.o_f = od(rng) * c.f_M;
    c.d = c.f_M * c.o_f / (c.o_f - c.f_M);
    c.f_m = fm(rng);
    c.d_ML = 0.1;
    c.s_px = 0.01;
    c.sensor_px = {650, 650};
    c.micro_count = {65, 65};
    return c;
}

}  // namespace

TEST_CASE("worked error values at twice the focus distance") {
    const auto c = preset_a();
    CHECK(error_models::shift_error(c, 1000.0).value ==
          doctest::Approx(-0.0588235).epsilon(1e-5));
    CHECK(error_models::distance_error_naive_model(c, 1000.0).value ==
          doctest::Approx(0.0666667).epsilon(1e-5));
    CHECK(error_models::distance_error_naive_shift(c, 1000.0).value ==
          doctest::Approx(-0.0526316).epsilon(1e-5));
}

TEST_CASE("errors vanish exactly at the focus distance") {
    const auto c = preset_a();
    const auto e = error_models::shift_error(c, 500.0);
    CHECK(e.value == 0.0);
    CHECK(e.flag == ErrorFlag::continuity);
    CHECK(error_models::distance_error_naive_model(c, 500.0).value == 0.0);
    CHECK(error_models::distance_error_naive_shift(c, 500.0).value == 0.0);
}

TEST_CASE("errors vanish identically for X = 0") {
    auto c = preset_a();
    c.X = 0.0;
    for (const double o : {150.0, 380.0, 500.0, 740.0, 2600.0}) {
        CHECK(error_models::shift_error(c, o).value == 0.0);
        CHECK(error_models::distance_error_naive_model(c, o).value == 0.0);
        CHECK(error_models::distance_error_naive_shift(c, o).value == 0.0);
    }
}

TEST_CASE("lambda closed forms match the compositions") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> ld(0.3, 3.0);
    // Guards keep the comparison away from the poles, where the closed
    // forms' denominators cancel and the 1e-12 absolute tolerance cannot be
    // meaningful in double precision.
    const auto well_conditioned = [](double t1, double t2) {
        const double den = t1 - t2;
        return den != 0.0 && (std::abs(t1) + std::abs(t2)) / std::abs(den) < 10.0;
    };
    int checked = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto c = random_finite_config(rng);
        const double lambda = ld(rng);
        const double o = lambda * c.o_f;
        if (o <= 1.02 * c.f_M) continue;

        const auto es = error_models::shift_error(c, o);
        if (es.flag == ErrorFlag::none) {
            const double closed = error_models::shift_error_lambda(c, lambda);
            if (std::abs(closed) <= 1.0)
                CHECK(std::abs(es.value - closed) < 1e-12);
        }
        const auto em = error_models::distance_error_naive_model(c, o);
        if (em.flag == ErrorFlag::none &&
            well_conditioned(lambda * c.o_f * (1.0 - c.X / c.d),
                             c.X * (lambda - 1.0) * lambda)) {
            const double closed = error_models::distance_error_naive_model_lambda(c, lambda);
            if (std::abs(closed) <= 1.0)
                CHECK(std::abs(em.value - closed) < 1e-12);
        }
        const auto eo = error_models::distance_error_naive_shift(c, o);
        if (eo.flag == ErrorFlag::none &&
            well_conditioned(lambda * c.o_f * (c.X / c.f_M - 1.0),
                             lambda * lambda * c.X)) {
            const double closed = error_models::distance_error_naive_shift_lambda(c, lambda);
            if (std::abs(closed) <= 1.0)
                CHECK(std::abs(eo.value - closed) < 1e-12);
        }
        checked++;
    }
    CHECK(checked > 9000);
}

TEST_CASE("shift error converges for distant objects") {
    const auto c = preset_a();
    const double limit = c.X / (c.o_f * (c.X / c.d - 1.0));
    CHECK(limit == doctest::Approx(-0.1176471).epsilon(1e-6));
    const auto far = error_models::shift_error(c, 1e6 * c.o_f);
    CHECK(std::abs(far.value - limit) < 1e-6);
}

TEST_CASE("shift error is monotonic in lambda for X/d < 1") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = random_finite_config(rng);
        double prev = error_models::shift_error_lambda(c, 0.3);
        bool increasing = true, decreasing = true;
        for (double lambda = 0.4; lambda < 8.0; lambda += 0.2) {
            const double v = error_models::shift_error_lambda(c, lambda);
            increasing &= v >= prev;
            decreasing &= v <= prev;
            prev = v;
        }
        CHECK((increasing || decreasing));
    }
}

TEST_CASE("naive-model distance error carries the sign of X") {
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<double> ld(0.3, 4.0);
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = random_finite_config(rng);
        if (c.X == 0.0) continue;
        const double lambda = ld(rng);
        if (std::abs(lambda - 1.0) < 0.05) continue;
        const double o = lambda * c.o_f;
        if (o <= 1.02 * c.f_M) continue;
        // Positive-denominator region of the lambda form.
        const double denom = lambda * c.o_f * (1.0 - c.X / c.d) -
                             c.X * (lambda - 1.0) * lambda;
        if (denom <= 0.0) continue;
        const auto e = error_models::distance_error_naive_model(c, o);
        if (e.flag != ErrorFlag::none) continue;
        CHECK(std::signbit(e.value) == std::signbit(c.X));
    }
}

TEST_CASE("error sweep tabulation") {
    const auto c = preset_a();
    SUBCASE("X = 0 gives all-zero error columns") {
        auto zero_x = c;
        zero_x.X = 0.0;
        const auto records = error_models::error_sweep(zero_x, {0.5, 1.0, 2.0});
        for (const auto& r : records) {
            CHECK(r.e_shift == 0.0);
            CHECK(r.e_dist_naive_model == 0.0);
            CHECK(r.e_dist_naive_shift == 0.0);
        }
    }
    SUBCASE("worked row at lambda = 2") {
        const auto records = error_models::error_sweep(c, {2.0});
        REQUIRE(records.size() == 1);
        CHECK(records[0].o_mm == doctest::Approx(1000.0));
        CHECK(records[0].e_shift == doctest::Approx(-0.0588235).epsilon(1e-5));
        CHECK(records[0].e_dist_naive_model == doctest::Approx(0.0666667).epsilon(1e-5));
        CHECK(records[0].e_dist_naive_shift == doctest::Approx(-0.0526316).epsilon(1e-5));
    }
    SUBCASE("lambda = 1 is flagged as the removable singularity") {
        const auto records = error_models::error_sweep(c, {1.0});
        REQUIRE(records.size() == 1);
        CHECK(records[0].e_shift == 0.0);
        CHECK(records[0].flags.find("continuity") != std::string::npos);
    }
    SUBCASE("points below the focal length are flagged and skipped") {
        const auto records = error_models::error_sweep(c, {0.1, 2.0});
        REQUIRE(records.size() == 2);
        CHECK(records[0].flags.find("below_focal_length") != std::string::npos);
        CHECK(std::isnan(records[0].e_shift));
        CHECK(records[1].flags.empty());
    }
    SUBCASE("a pole is reported as a flag, not a value") {
        // The naive-model pole of the worked configuration sits at
        // lambda o_f (1 - X/d) = X (lambda - 1) lambda, i.e. lambda = 9.5.
        const auto records = error_models::error_sweep(c, {9.5});
        REQUIRE(records.size() == 1);
        CHECK(records[0].flags.find("pole_naive_model") != std::string::npos);
        CHECK(std::isnan(records[0].e_dist_naive_model));
        // The sweep continues: the shift error at the same point is finite.
        CHECK(std::isfinite(records[0].e_shift));
    }
}

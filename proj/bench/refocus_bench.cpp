#include <benchmark/benchmark.h>

#include "pupilfield/lightfield.hpp"
#include "pupilfield/spc.hpp"
#include "pupilfield/synth.hpp"

using namespace pupilfield;

namespace {

spc::SpcConfig bench_config() {
    spc::SpcConfig c;
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

lf::LightField4D bench_field() {
    synth::PatternSpec p;
    p.physical_width_mm = 2.2 * synth::required_pattern_halfwidth(bench_config(), 1000.0, 65, 9);
    p.resolution = 512;
    return synth::synth_lightfield(bench_config(), p, 1000.0, 9, 9).lightfield;
}

void BM_RefocusParallel(benchmark::State& state) {
    const auto field = bench_field();
    for (auto _ : state) {
        auto result = lf::refocus(field, -1.25);
        benchmark::DoNotOptimize(result.image.samples.data());
    }
}

void BM_RefocusSerial(benchmark::State& state) {
    const auto field = bench_field();
    for (auto _ : state) {
        auto result = lf::reference::refocus(field, -1.25);
        benchmark::DoNotOptimize(result.image.samples.data());
    }
}

void BM_SynthParallel(benchmark::State& state) {
    const auto c = bench_config();
    synth::PatternSpec p;
    p.physical_width_mm = 2.2 * synth::required_pattern_halfwidth(c, 1000.0, 65, 9);
    p.resolution = 512;
    for (auto _ : state) {
        auto result = synth::synth_lightfield(c, p, 1000.0, 9, 9);
        benchmark::DoNotOptimize(result.lightfield.samples.data());
    }
}

void BM_SynthSerial(benchmark::State& state) {
    const auto c = bench_config();
    synth::PatternSpec p;
    p.physical_width_mm = 2.2 * synth::required_pattern_halfwidth(c, 1000.0, 65, 9);
    p.resolution = 512;
    for (auto _ : state) {
        auto result = synth::reference::synth_lightfield(c, p, 1000.0, 9, 9);
        benchmark::DoNotOptimize(result.lightfield.samples.data());
    }
}

void BM_FocusMeasureParallel(benchmark::State& state) {
    const auto img = lf::refocus(bench_field(), -1.25).image;
    for (auto _ : state) benchmark::DoNotOptimize(lf::focus_measure(img));
}

void BM_FocusMeasureSerial(benchmark::State& state) {
    const auto img = lf::refocus(bench_field(), -1.25).image;
    for (auto _ : state) benchmark::DoNotOptimize(lf::reference::focus_measure(img));
}

}  // namespace

BENCHMARK(BM_RefocusParallel);
BENCHMARK(BM_RefocusSerial);
BENCHMARK(BM_SynthParallel);
BENCHMARK(BM_SynthSerial);
BENCHMARK(BM_FocusMeasureParallel);
BENCHMARK(BM_FocusMeasureSerial);

BENCHMARK_MAIN();

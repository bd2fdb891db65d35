#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "pupilfield/io.hpp"

using namespace pupilfield;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
    const auto dir = fs::temp_directory_path() / "pupilfield-io-tests";
    fs::create_directories(dir);
    return dir.string();
}

const char* kPrescriptionJson = R"({
  "name": "test doublet",
  "ambient_index": 1.0,
  "surfaces": [
    {"radius_mm": 61.47, "thickness_mm": 6.0, "ior_after": 1.517, "semi_aperture_mm": 15.0, "is_stop": false},
    {"radius_mm": -44.64, "thickness_mm": 2.5, "ior_after": 1.649, "semi_aperture_mm": 15.0, "is_stop": false},
    {"radius_mm": -129.94, "thickness_mm": 20.0, "ior_after": 1.0, "semi_aperture_mm": 15.0, "is_stop": false},
    {"radius_mm": "planar", "thickness_mm": 0.0, "ior_after": 1.0, "semi_aperture_mm": 8.0, "is_stop": true}
  ]
})";

}  // namespace

TEST_CASE("prescription load -> save -> load is byte-identical") {
    const auto p = io::parse_prescription(kPrescriptionJson);
    CHECK(p.surfaces.size() == 4);
    CHECK(p.surfaces[3].planar());
    CHECK(p.stop_index == 3);
    const std::string once = io::serialize_prescription(p);
    const std::string twice = io::serialize_prescription(io::parse_prescription(once));
    CHECK(once == twice);
}

TEST_CASE("prescription parser rejects bad inputs") {
    CHECK_THROWS_AS(io::parse_prescription("{not json"), io::IoError);
    CHECK_THROWS_AS(io::parse_prescription("{\"name\":\"x\"}"), io::IoError);
    CHECK_THROWS_AS(io::parse_prescription(R"({"surfaces":[
        {"radius_mm": 10.0, "thickness_mm": 0.0, "ior_after": 0.5,
         "semi_aperture_mm": 5.0}]})"),
                    io::IoError);
}

TEST_CASE("config with inline main-lens values round trips byte-identically") {
    const char* json = R"({
      "f_M": 100.0, "X": 40.0, "o_f": 500.0,
      "f_m": 1.0, "d_ML": 0.09883720930232558, "mla_thickness": 0.1,
      "s_px": 0.01, "sensor_px": [650, 650], "micro_count": [65, 65]
    })";
    const auto c = io::parse_config(json);
    CHECK(c.d == doctest::Approx(125.0).epsilon(1e-12));
    const std::string once = io::serialize_config(c);
    const std::string twice = io::serialize_config(io::parse_config(once));
    CHECK(once == twice);
}

TEST_CASE("config accepts the infinite-focus sentinel") {
    const char* json = R"({
      "f_M": 100.0, "X": 40.0, "o_f": "inf",
      "f_m": 1.0, "d_ML": 0.1, "mla_thickness": 0.1,
      "s_px": 0.01, "sensor_px": [650, 650], "micro_count": [65, 65]
    })";
    const auto c = io::parse_config(json);
    CHECK(c.infinite_focus());
    CHECK(c.d == 100.0);
    const std::string out = io::serialize_config(c);
    CHECK(out.find("\"inf\"") != std::string::npos);
    CHECK(io::parse_config(out).infinite_focus());
}

TEST_CASE("config can reference a prescription for its main-lens values") {
    const auto dir = temp_dir();
    io::write_file(dir + "/lens.json", kPrescriptionJson);
    const std::string cfg = R"({
      "prescription": "lens.json", "o_f": 500.0,
      "f_m": 1.0, "d_ML": 0.1, "mla_thickness": 0.1,
      "s_px": 0.01, "sensor_px": [650, 650], "micro_count": [65, 65]
    })";
    io::write_file(dir + "/config.json", cfg);
    const auto c = io::load_config(dir + "/config.json");
    const auto p = io::parse_prescription(kPrescriptionJson);
    const auto s = optics::paraxial_summary(p);
    CHECK(c.f_M == s.f_M);
    CHECK(c.X == s.X);
    const auto preset = io::load_preset(dir + "/config.json");
    CHECK(preset.prescription.has_value());
    CHECK(preset.name == "config");
}

TEST_CASE("LF4D container layout and round trip") {
    lf::LightField4D field(3, 2, 2, 2);
    field.delta_st_mm = 0.1;
    field.delta_uv_mm = 0.85;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    for (auto& v : field.samples) v = d(rng);

    const auto bytes = io::serialize_lightfield(field);
    // magic + 6 u32 + 2 f64 + 24 f32 samples
    CHECK(bytes.size() == 4 + 24 + 16 + 24 * 4);
    CHECK(bytes[0] == 'L');
    CHECK(bytes[1] == 'F');
    CHECK(bytes[2] == '4');
    CHECK(bytes[3] == 'D');
    // dims in (k,l,i,j) little-endian order
    CHECK(bytes[4] == 2);
    CHECK(bytes[8] == 2);
    CHECK(bytes[12] == 3);
    CHECK(bytes[16] == 2);

    const auto back = io::parse_lightfield(bytes);
    CHECK(back.samples == field.samples);
    CHECK(back.delta_st_mm == field.delta_st_mm);
    CHECK(back.center_k == field.center_k);
    CHECK(io::serialize_lightfield(back) == bytes);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(io::parse_lightfield(truncated), io::IoError);
}

TEST_CASE("16-bit PGM round trip preserves quantized samples") {
    const auto dir = temp_dir();
    lf::Image img(7, 5);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    for (auto& v : img.samples) v = d(rng);
    io::save_pgm(dir + "/a.pgm", img);
    const auto once = io::load_pgm(dir + "/a.pgm");
    io::save_pgm(dir + "/b.pgm", once);
    CHECK(io::read_file(dir + "/a.pgm") == io::read_file(dir + "/b.pgm"));
    for (std::size_t i = 0; i < img.samples.size(); ++i)
        CHECK(std::abs(once.samples[i] - img.samples[i]) < 1.0f / 65535.0f);
}

TEST_CASE("float image container round trips exactly") {
    const auto dir = temp_dir();
    lf::Image img(6, 4);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<float> d(0.0f, 2.0f);
    for (auto& v : img.samples) v = d(rng);
    io::save_image_f32(dir + "/img.lf4d", img);
    const auto back = io::load_image_f32(dir + "/img.lf4d");
    CHECK(back.samples == img.samples);
    CHECK(back.width == 6);
}

TEST_CASE("sweep CSV round trips losslessly") {
    std::vector<experiments::SweepRecord> records(3);
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    for (auto& r : records) {
        r.o_mm = 500.0 + 100.0 * d(rng);
        r.lambda = d(rng);
        r.s_measured = d(rng);
        r.s_model = d(rng);
        r.s_naive = d(rng);
        r.o_from_s_naive = d(rng) * 300.0;
        r.o_from_s_model = d(rng) * 300.0;
        r.e_measured = d(rng) / 50.0;
        r.e_model = d(rng) / 50.0;
    }
    records[1].flags = "continuity";
    const std::string csv = io::serialize_sweep(records, "preset=test views=9");
    std::string comment;
    const auto back = io::parse_sweep(csv, &comment);
    CHECK(comment == "preset=test views=9");
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].o_mm == records[i].o_mm);  // exact: shortest round trip
        CHECK(back[i].s_measured == records[i].s_measured);
        CHECK(back[i].e_model == records[i].e_model);
        CHECK(back[i].flags == records[i].flags);
    }
    // Byte-identical second pass.
    CHECK(io::serialize_sweep(back, comment) == csv);
}

TEST_CASE("error sweep CSV round trips losslessly") {
    std::vector<error_models::ErrorRecord> records(2);
    records[0] = {1.0, 500.0, 0.0, 0.0, 0.0, "continuity"};
    records[1] = {2.0, 1000.0, -0.0588235294117647, 0.0666666666666666, -0.052631578947368, ""};
    const std::string csv = io::serialize_error_sweep(records, "preset=a");
    std::string comment;
    const auto back = io::parse_error_sweep(csv, &comment);
    REQUIRE(back.size() == 2);
    CHECK(back[1].e_shift == records[1].e_shift);
    CHECK(io::serialize_error_sweep(back, comment) == csv);
}

TEST_CASE("format_double emits shortest exact representations") {
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(125.0) == "125");
    CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(io::format_double(std::nan("")) == "nan");
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> d(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = d(rng);
        CHECK(std::stod(io::format_double(v)) == v);
    }
}

TEST_CASE("manifests hash their inputs deterministically") {
    const auto dir = temp_dir();
    io::write_file(dir + "/in.txt", "payload");
    const auto h1 = io::hash_inputs({dir + "/in.txt"});
    const auto h2 = io::hash_inputs({dir + "/in.txt"});
    CHECK(h1 == h2);
    io::write_file(dir + "/in.txt", "payload2");
    CHECK(io::hash_inputs({dir + "/in.txt"}) != h1);

    io::RunManifest m;
    m.subcommand = "spc tables";
    m.inputs = {dir + "/in.txt"};
    m.out_dir = dir + "/out";
    m.tool_version = "pupilfield test";
    m.input_hash = h1;
    io::write_manifest(m);
    CHECK(fs::exists(dir + "/out/manifest.json"));
}

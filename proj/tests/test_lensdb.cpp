#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "pupilfield/io.hpp"
#include "pupilfield/lensdb.hpp"

using namespace pupilfield;
namespace fs = std::filesystem;

namespace {

const std::string kPresetDir = PUPILFIELD_PRESET_DIR;

std::string fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "pupilfield-lensdb" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("collection analysis matches per-prescription summaries") {
    const auto dir = fresh_dir("bundled");
    for (const char* name :
         {"displaced_stop_lens.json", "thin_stop_lens.json", "doublet_lens.json"})
        fs::copy_file(kPresetDir + "/prescriptions/" + name, fs::path(dir) / name);

    const auto result = lensdb::analyze_collection(dir);
    REQUIRE(result.records.size() == 3);
    CHECK(result.failures.empty());
    for (const auto& rec : result.records) {
        // Identity with the optics pipeline, file by file.
        const auto p = io::load_prescription(dir + "/" + rec.name + ".json");
        const auto s = optics::paraxial_summary(p);
        CHECK(rec.f_M == s.f_M);
        CHECK(rec.X == s.X);
        CHECK(rec.ratio * rec.f_M == doctest::Approx(rec.X).epsilon(1e-9));
    }
}

TEST_CASE("afocal prescriptions are skipped with a named diagnostic") {
    const auto dir = fresh_dir("afocal");
    fs::copy_file(kPresetDir + "/prescriptions/doublet_lens.json",
                  fs::path(dir) / "doublet_lens.json");
    io::write_file(dir + "/window.json", R"json({
      "name": "plane window, afocal",
      "surfaces": [
        {"radius_mm": "planar", "thickness_mm": 1.0, "ior_after": 1.5,
         "semi_aperture_mm": 10.0, "is_stop": true},
        {"radius_mm": "planar", "thickness_mm": 0.0, "ior_after": 1.0,
         "semi_aperture_mm": 10.0, "is_stop": false}
      ]
    })json");
    const auto result = lensdb::analyze_collection(dir);
    CHECK(result.records.size() == 1);
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].find("window") != std::string::npos);
}

TEST_CASE("duplicate files produce duplicate records") {
    const auto dir = fresh_dir("dup");
    fs::copy_file(kPresetDir + "/prescriptions/doublet_lens.json",
                  fs::path(dir) / "a.json");
    fs::copy_file(kPresetDir + "/prescriptions/doublet_lens.json",
                  fs::path(dir) / "b.json");
    const auto result = lensdb::analyze_collection(dir);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].f_M == result.records[1].f_M);
    CHECK(result.records[0].X == result.records[1].X);
}

TEST_CASE("three-point least squares oracle") {
    // (0,0), (1,1), (2,4): slope 2, intercept -1/3, r = 4/sqrt(52/3).
    const std::vector<lensdb::LensRecord> recs{
        {"a", 0.0, 0.0, 0.0}, {"b", 1.0, 1.0, 1.0}, {"c", 2.0, 4.0, 2.0}};
    const auto rep = lensdb::regression(recs);
    CHECK(std::abs(rep.slope - 2.0) < 1e-9);
    CHECK(std::abs(rep.intercept - (-1.0 / 3.0)) < 1e-9);
    const double r_oracle = 4.0 / std::sqrt(2.0 * (78.0 / 9.0));
    CHECK(std::abs(rep.pearson_r - r_oracle) < 1e-9);
    CHECK(rep.pearson_r == doctest::Approx(0.96077).epsilon(1e-4));
    CHECK(rep.r_squared == doctest::Approx(0.92308).epsilon(1e-4));
    CHECK(std::abs(rep.r_squared - rep.pearson_r * rep.pearson_r) < 1e-12);
}

TEST_CASE("collinear data fits perfectly") {
    std::vector<lensdb::LensRecord> recs;
    for (int i = 0; i < 12; ++i) {
        const double f = 30.0 + 17.0 * i;
        recs.push_back({"l" + std::to_string(i), f, 0.7 * f - 50.0, 0.0});
    }
    const auto rep = lensdb::regression(recs);
    CHECK(rep.slope == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(rep.intercept == doctest::Approx(-50.0).epsilon(1e-12));
    CHECK(rep.pearson_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("regression invariances") {
    std::vector<lensdb::LensRecord> recs{{"a", 35.0, 10.0, 0.0},
                                         {"b", 50.0, -20.0, 0.0},
                                         {"c", 85.0, 41.0, 0.0},
                                         {"d", 135.0, 60.0, 0.0},
                                         {"e", 200.0, 155.0, 0.0}};
    const auto rep = lensdb::regression(recs);

    SUBCASE("record order does not matter") {
        auto shuffled = recs;
        std::swap(shuffled[0], shuffled[4]);
        std::swap(shuffled[1], shuffled[3]);
        const auto rep2 = lensdb::regression(shuffled);
        CHECK(rep2.slope == doctest::Approx(rep.slope).epsilon(1e-12));
        CHECK(rep2.pearson_r == doctest::Approx(rep.pearson_r).epsilon(1e-12));
    }
    SUBCASE("uniform scaling leaves the dimensionless outputs unchanged") {
        auto scaled = recs;
        for (auto& r : scaled) {
            r.f_M *= 2.5;
            r.X *= 2.5;
        }
        const auto rep2 = lensdb::regression(scaled);
        CHECK(rep2.slope == doctest::Approx(rep.slope).epsilon(1e-9));
        CHECK(rep2.intercept == doctest::Approx(2.5 * rep.intercept).epsilon(1e-9));
        CHECK(rep2.pearson_r == doctest::Approx(rep.pearson_r).epsilon(1e-12));
        CHECK(rep2.r_squared == doctest::Approx(rep.r_squared).epsilon(1e-12));
    }
    SUBCASE("census bins are nested and independent per record") {
        // |X|/f_M ratios: 0.286, 0.4, 0.482, 0.444, 0.775
        CHECK(rep.census_below_5pct == 0);
        CHECK(rep.census_above_25pct == 5);
        CHECK(rep.census_above_50pct == 1);
        CHECK(rep.census_above_50pct <= rep.census_above_25pct);
    }
    SUBCASE("constant focal lengths are rejected") {
        std::vector<lensdb::LensRecord> flat{{"a", 50.0, 1.0, 0.0},
                                             {"b", 50.0, 2.0, 0.0}};
        CHECK_THROWS_AS(lensdb::regression(flat), optics::OpticsError);
    }
}

TEST_CASE("lens stats serialization carries the report block") {
    lensdb::CollectionResult coll;
    coll.records = {{"a", 100.0, 40.0, 0.4}, {"b", 50.0, -1.0, -0.02}};
    coll.failures = {"broken: no surfaces"};
    const auto rep = lensdb::regression(coll.records);
    const auto csv = io::serialize_lens_stats(coll, rep);
    CHECK(csv.find("name,f_M_mm,X_mm,ratio") != std::string::npos);
    CHECK(csv.find("# report: n=2") != std::string::npos);
    CHECK(csv.find("# census:") != std::string::npos);
    CHECK(csv.find("# failed: broken") != std::string::npos);
}

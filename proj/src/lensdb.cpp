#include "pupilfield/lensdb.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "pupilfield/io.hpp"
#include "pupilfield/runtime.hpp"

namespace pupilfield::lensdb {

namespace fs = std::filesystem;

LensRecord analyze_prescription(const optics::LensPrescription& p,
                                const std::string& name) {
    const auto summary = optics::paraxial_summary(p);
    LensRecord r;
    r.name = name.empty() ? p.name : name;
    r.f_M = summary.f_M;
    r.X = summary.X;
    r.ratio = summary.X / summary.f_M;
    return r;
}

CollectionResult analyze_collection(const std::string& directory) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw optics::OpticsError("analyze_collection: no prescription files in " +
                                  directory);

    struct Slot {
        bool ok = false;
        LensRecord record;
        std::string failure;
    };
    std::vector<Slot> slots(files.size());

#pragma omp parallel for schedule(static) num_threads(thread_budget())
    for (std::size_t idx = 0; idx < files.size(); ++idx) {
        const std::string stem = fs::path(files[idx]).stem().string();
        try {
            const auto p = io::load_prescription(files[idx]);
            slots[idx].record = analyze_prescription(p, stem);
            slots[idx].ok = true;
        } catch (const std::exception& e) {
            slots[idx].failure = stem + ": " + e.what();
        }
    }

    CollectionResult result;
    for (const auto& s : slots) {
        if (s.ok)
            result.records.push_back(s.record);
        else
            result.failures.push_back(s.failure);
    }
    if (result.records.empty())
        throw optics::OpticsError("analyze_collection: no prescription analyzed successfully");
    return result;
}

RegressionReport regression(const std::vector<LensRecord>& records) {
    const int n = static_cast<int>(records.size());
    if (n < 2) throw optics::OpticsError("regression: need at least 2 records");

    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& r : records) {
        mean_x += r.f_M;
        mean_y += r.X;
    }
    mean_x /= n;
    mean_y /= n;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& r : records) {
        const double dx = r.f_M - mean_x;
        const double dy = r.X - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0)
        throw optics::OpticsError("regression: constant f_M, slope undefined");

    RegressionReport rep;
    rep.n = n;
    rep.slope = sxy / sxx;
    rep.intercept = mean_y - rep.slope * mean_x;
    rep.pearson_r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;

    // R^2 from residuals, an independent route that must agree with r^2 for
    // the simple linear fit.
    double ss_res = 0.0;
    for (const auto& r : records) {
        const double res = r.X - (rep.slope * r.f_M + rep.intercept);
        ss_res += res * res;
    }
    rep.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;

    for (const auto& r : records) {
        const double limit = std::abs(r.f_M);
        if (std::abs(r.X) < 0.05 * limit) rep.census_below_5pct++;
        if (std::abs(r.X) > 0.25 * limit) rep.census_above_25pct++;
        if (std::abs(r.X) > 0.5 * limit) rep.census_above_50pct++;
    }
    return rep;
}

}  // namespace pupilfield::lensdb

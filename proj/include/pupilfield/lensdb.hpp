#pragma once

#include <string>
#include <vector>

#include "pupilfield/optics.hpp"

namespace pupilfield::lensdb {

struct LensRecord {
    std::string name;
    double f_M = 0.0;
    double X = 0.0;
    double ratio = 0.0;  ///< X / f_M
};

struct RegressionReport {
    int n = 0;
    double slope = 0.0;       ///< of the fit X = slope * f_M + intercept
    double intercept = 0.0;   ///< mm
    double pearson_r = 0.0;
    double r_squared = 0.0;   ///< 1 - SS_res / SS_tot (independent route)
    int census_below_5pct = 0;   ///< |X| < 0.05 f_M
    int census_above_25pct = 0;  ///< |X| > 0.25 f_M
    int census_above_50pct = 0;  ///< |X| > 0.5 f_M
};

struct CollectionResult {
    std::vector<LensRecord> records;
    /// One line per file that failed to load or analyze (kept out of the
    /// statistics).
    std::vector<std::string> failures;
};

/// Paraxial analysis of every *.json prescription in a directory, in
/// filename order. Unloadable or afocal files are reported, not fatal.
CollectionResult analyze_collection(const std::string& directory);

LensRecord analyze_prescription(const optics::LensPrescription& p,
                                const std::string& name);

/// Ordinary least squares X = slope * f_M + intercept plus the Pearson
/// correlation of (f_M, X) and the |X|-threshold census.
RegressionReport regression(const std::vector<LensRecord>& records);

}  // namespace pupilfield::lensdb

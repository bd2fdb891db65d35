#pragma once

#include <string>
#include <vector>

#include "pupilfield/spc.hpp"

namespace pupilfield::error_models {

enum class ErrorFlag {
    none,
    continuity,  ///< removable singularity at lambda = 1, exact 0 returned
    pole         ///< true pole, no finite value
};

struct FlaggedError {
    double value = 0.0;
    ErrorFlag flag = ErrorFlag::none;
};

/// One sampled point of the three relative-error families. Poles are
/// recorded per component in `flags` and the component holds NaN.
struct ErrorRecord {
    double lambda = 0.0;  ///< o / o_f
    double o_mm = 0.0;
    double e_shift = 0.0;             ///< E_S
    double e_dist_naive_model = 0.0;  ///< E_o~
    double e_dist_naive_shift = 0.0;  ///< E_S~
    std::string flags;                ///< semicolon-joined tokens, may be empty
};

/// E_S(o) = (S~(o) - S(o)) / S(o), evaluated by composing the two shift
/// models. Exactly 0 at o = o_f (continuity flag) and for X = 0 configs.
FlaggedError shift_error(const spc::SpcConfig& c, double o_mm);

/// E_o~(o) = (o~(S(o)) - o) / o: correct shift, naive distance inversion.
FlaggedError distance_error_naive_model(const spc::SpcConfig& c, double o_mm);

/// E_S~(o) = (o(S~(o)) - o) / o: naive shift, exit-pupil distance inversion.
FlaggedError distance_error_naive_shift(const spc::SpcConfig& c, double o_mm);

/// Closed lambda forms (cross-checks of the compositions above; only defined
/// for finite-focus configs).
double shift_error_lambda(const spc::SpcConfig& c, double lambda);
double distance_error_naive_model_lambda(const spc::SpcConfig& c, double lambda);
double distance_error_naive_shift_lambda(const spc::SpcConfig& c, double lambda);

/// One record per lambda, computed via the composition forms. Per-point
/// poles are flagged in the record and the sweep continues.
std::vector<ErrorRecord> error_sweep(const spc::SpcConfig& c,
                                     const std::vector<double>& lambdas);

}  // namespace pupilfield::error_models

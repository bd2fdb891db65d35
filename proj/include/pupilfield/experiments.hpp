#pragma once

#include <string>
#include <vector>

#include "pupilfield/error_models.hpp"
#include "pupilfield/lightfield.hpp"
#include "pupilfield/optics.hpp"
#include "pupilfield/spc.hpp"
#include "pupilfield/synth.hpp"

namespace pupilfield::experiments {

/// A preset bundles the camera description with the optional prescription it
/// was derived from and a display name.
struct Preset {
    std::string name;
    spc::SpcConfig config;
    std::optional<optics::LensPrescription> prescription;
};

/// One measured point of a shift or error sweep. The e fields are relative
/// quantities: e_measured composes the measured shift through the naive
/// inversion, e_model is the analytic counterpart.
struct SweepRecord {
    double o_mm = 0.0;
    double lambda = 0.0;
    double s_measured = 0.0;
    double s_model = 0.0;
    double s_naive = 0.0;
    double o_from_s_naive = 0.0;
    double o_from_s_model = 0.0;
    double e_measured = 0.0;
    double e_model = 0.0;
    std::string flags;
};

/// Inverse-direction record: fixed shift, best-scoring rendered distance.
struct InverseRecord {
    double shift_px = 0.0;
    double o_measured_mm = 0.0;
    double o_model_mm = 0.0;
    std::string flags;
};

struct FitReport {
    double a0_calc_original = 0.0;
    double a1_calc_original = 0.0;
    double a0_calc_corrected = 0.0;
    double a1_calc_corrected = 0.0;
    double a0_fit = 0.0;
    double a1_fit = 0.0;
    double rmse_original_mm = 0.0;
    double rmse_corrected_mm = 0.0;
    double rmse_fit_mm = 0.0;
};

/// Blur-spot line search results for one bundle subset of experiment I.
struct MicSubsetResult {
    double fraction = 1.0;  ///< innermost share of rays, by |microlens center|
    int rays = 0;
    double blur_min_z_mm = 0.0;
    double blur_rms_mm = 0.0;
    double axis_mean_z_mm = 0.0;
    double axis_variance_mm2 = 0.0;
};

struct MicVerifyReport {
    double exit_pupil_z_mm = 0.0;   ///< paraxial prediction, absolute z
    double mla_z_mm = 0.0;
    double pupil_to_mla_mm = 0.0;   ///< d - X
    double measured_mic_pitch_mm = 0.0;  ///< least-squares fit over the MIC grid
    double model_mic_pitch_mm = 0.0;     ///< d_ML (1 + f_m/(d - X))
    std::vector<MicSubsetResult> subsets;  ///< 25%, 50%, 100%
    synth::MicGroundTruth ground_truth;
};

/// Tuning knobs shared by the sweep experiments. Defaults match the
/// documented line-search resolution.
struct SweepSettings {
    int views = 9;
    lf::LineSearchParams line_search;
    synth::PatternKind pattern = synth::PatternKind::siemens_star;
    int spokes = 4;
    /// margin added around the model-predicted shift range of the sweep
    double shift_margin_px = 0.5;
    /// multiplicative spacing of the dense candidate-distance grid used by
    /// the sharpest-image searches
    double candidate_step = 1.008;
};

/// Default distance grid of a preset: lambda in {0.6 .. 3} times the focus
/// distance for finite presets, {2, 3, 5, 10, 20} times f_M for infinite.
std::vector<double> default_distances(const spc::SpcConfig& c);

/// Experiment I: forward-trace the MICs, back-trace the bundles, and compare
/// blur minima of the {25%, 50%, 100%} innermost subsets against the
/// paraxial exit pupil.
MicVerifyReport exp_mic_verify(const Preset& preset, int rays_per_bundle = 32);

/// Experiment II (forward direction): for each distance, render the target,
/// measure the refocusing shift by line search, and tabulate it against the
/// model. The records also carry the experiment III error composition.
std::vector<SweepRecord> exp_shift_sweep(const Preset& preset,
                                         const std::vector<double>& distances,
                                         const SweepSettings& settings = {});

/// Experiment II (inverse direction): for each shift in the grid, find the
/// rendered candidate distance whose refocused image scores highest.
std::vector<InverseRecord> exp_inverse_sweep(const Preset& preset,
                                             const std::vector<double>& shifts,
                                             const std::vector<double>& distances,
                                             const SweepSettings& settings = {});

struct ErrorSweeps {
    std::vector<SweepRecord> naive_model;  ///< experiment III
    std::vector<SweepRecord> naive_shift;  ///< experiment IV
};

/// Experiments III and IV: measured relative distance errors against the
/// analytic error models. III composes the measured shift through the naive
/// inversion; IV refocuses dense rendered candidates with the naive shift
/// and keeps the sharpest.
ErrorSweeps exp_error_sweeps(const Preset& preset,
                             const std::vector<double>& distances,
                             const SweepSettings& settings = {});

/// Experiment V: grid search plus coordinate-descent refinement of the
/// refocusing model parameters over the measured sweep, with both directly
/// calculated parameter pairs injected into the grid.
FitReport exp_pertuz_fit(const Preset& preset,
                         const std::vector<SweepRecord>& sweep);

}  // namespace pupilfield::experiments

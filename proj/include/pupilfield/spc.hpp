#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "pupilfield/optics.hpp"

namespace pupilfield::spc {

class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

constexpr double kInfiniteFocus = std::numeric_limits<double>::infinity();
/// Finite stand-in for an infinite focus distance wherever a formula needs a
/// finite o_f (Pertuz parameters, lambda parameterization).
constexpr double kInfiniteFocusSubstitute_mm = 1e9;

struct Vec2i {
    int x = 0, y = 0;
    bool operator==(const Vec2i&) const = default;
};

/// Complete standard-plenoptic-camera description. Distances follow the
/// conventions in optics.hpp; d and f_m are measured to the microlens
/// principal planes, so mla_thickness never enters the closed forms.
struct SpcConfig {
    double f_M = 0.0;           ///< main lens focal length (mm)
    double X = 0.0;             ///< H_cam -> exit pupil, signed (mm)
    double o_f = kInfiniteFocus; ///< focus distance (mm), may be infinite
    double d = 0.0;             ///< H_cam -> MLA scene-side principal plane (mm)
    double f_m = 0.0;           ///< microlens focal length = ML H_cam -> sensor (mm)
    double d_ML = 0.0;          ///< microlens pitch (mm)
    double mla_thickness = 0.0; ///< separation of the ML principal planes (mm)
    double s_px = 0.0;          ///< pixel pitch (mm)
    Vec2i sensor_px;
    Vec2i micro_count;          ///< microlens image grid (columns, rows)

    bool infinite_focus() const { return std::isinf(o_f); }
    /// Two-plane separation F = d - X.
    double F() const { return d - X; }
    /// Focus distance with the documented finite substitute applied.
    double o_f_finite() const {
        return infinite_focus() ? kInfiniteFocusSubstitute_mm : o_f;
    }

    /// Enforces the config invariants (positive distances, d consistent with
    /// o_f, d != X). Throws ModelError on violation.
    void validate() const;
};

/// All derived two-plane quantities of a config.
struct TwoPlaneGeometry {
    double F = 0.0;             ///< d - X
    double delta_st = 0.0;      ///< = d_ML
    double delta_uv = 0.0;      ///< = s_px * F / f_m
    double delta = 0.0;         ///< delta_uv / delta_st
    double delta_naive = 0.0;   ///< s_px * d / (f_m * d_ML), the X = 0 form
    double d_mli = 0.0;         ///< MIC pitch, d_ML * (1 + f_m / (d - X))
    double m_proj_correct = 0.0; ///< (1 + f_m/(d-X))^-1
    double m_proj_naive = 0.0;   ///< (1 + f_m/d)^-1
};

enum class ShiftModel { exit_pupil, naive };

enum class DistanceFlag {
    none,
    out_of_range,       ///< result <= f_M or negative (legitimate in sweeps)
    maps_to_infinity,   ///< shift sits on the pole of the inversion
    at_focus            ///< S = 0 handled by convention
};

struct FlaggedDistance {
    double o_mm = 0.0;
    DistanceFlag flag = DistanceFlag::none;
};

enum class PertuzVariant { original, corrected };

struct PertuzParams {
    double a0 = 0.0;  ///< per pixel shift
    double a1 = 0.0;  ///< per pixel shift
    PertuzVariant variant = PertuzVariant::corrected;
};

/// Derived two-plane step sizes, MIC pitch and projection scalings.
TwoPlaneGeometry geometry(const SpcConfig& c);

/// Refocusing parameter alpha = F'/F for an object at distance o (> f_M).
double alpha(const SpcConfig& c, double o_mm);

/// Sub-aperture image shift (pixels) that refocuses onto distance o.
/// The exit_pupil model evaluates
///   S = Delta * (o(f_M - d) + f_M d) / (o(f_M - X) + f_M X)
/// and the naive model the X = 0 counterpart with Delta~.
double shift_from_distance(const SpcConfig& c, double o_mm, ShiftModel model);

/// Inverse of shift_from_distance. Out-of-range results (o <= f_M or
/// negative) are flagged, not errors; a shift on the pole of the inversion
/// returns the maps_to_infinity flag with an infinite distance.
FlaggedDistance distance_from_shift(const SpcConfig& c, double shift_px,
                                    ShiftModel model);

/// Chief-ray intersection model: builds the two sensor-to-scene ray lines
/// through neighboring microlens centers from the metric disparity
/// S^ = -s_px / S, intersects them, and inverts the thin-lens equation.
/// Implemented as the literal geometric construction; its agreement with
/// distance_from_shift(exit_pupil) is an equivalence theorem, not shared
/// code. S = 0 returns o_f with the at_focus flag.
FlaggedDistance hahne_distance_from_shift(const SpcConfig& c, double shift_px);

/// Refocusing model parameters o(rho) = o_f (1 - a0 rho)/(1 - a1 rho).
/// original: a0 = f_m d_ML / (s_px d), a1 = o_f a0 / f_M.
/// corrected: a0 = -X / (Delta d),     a1 = (f_M - X) / (Delta (d - f_M)).
/// Infinite-focus configs use the documented finite substitute for o_f and
/// the matching d so that d - f_M stays nonzero.
PertuzParams pertuz_params(const SpcConfig& c, PertuzVariant variant);

/// Evaluates o(rho) = o_f (1 - a0 rho)/(1 - a1 rho). rho = -S per the
/// inverted sign convention of the model; callers flip the sign at this
/// boundary only. Throws ModelError on the pole 1 - a1 rho = 0.
double pertuz_distance(const PertuzParams& p, double o_f_mm, double rho_px);

/// Focus distance substitute pair (o_f, d) used by the Pertuz formulas for
/// a config: identity for finite focus, (1e9, f_M*1e9/(1e9-f_M)) otherwise.
std::pair<double, double> pertuz_focus_terms(const SpcConfig& c);

// --- SPC auto-configuration ------------------------------------------------

struct DesignOptions {
    /// Explicit microlens pitch / focal length; when absent they are derived
    /// from the sensor span and the working-f-number match.
    std::optional<double> d_ML;
    std::optional<double> f_m;
    double mla_thickness = 0.1;
    /// Largest relative perturbation allowed when aligning the MIC pitch to
    /// the pixel grid.
    double max_perturbation = 0.02;
};

/// Thrown when no MIC-on-pixel solution exists within the allowed
/// perturbation; carries the closest achievable MIC pitch.
class DesignError : public ModelError {
public:
    DesignError(const std::string& what, double closest_d_mli)
        : ModelError(what), closest_d_mli_mm(closest_d_mli) {}
    double closest_d_mli_mm;
};

/// Builds an SpcConfig from a paraxial summary: d from the thin-lens
/// equation, d_ML so micro_count images span the sensor, f_m by matching the
/// microlens f-number to the working f-number (d - X)/(2 * pupil radius),
/// then the smallest multiplicative perturbation of d_ML (preferred) or f_m
/// that puts the MIC pitch on an exact pixel multiple.
SpcConfig design_spc(const optics::ParaxialSummary& summary, double o_f_mm,
                     double s_px_mm, Vec2i sensor_px, Vec2i micro_count,
                     const DesignOptions& opts = {});

/// MIC pitch in pixels if it is an integer (within 1e-9 relative), else
/// nullopt. Decode requires this alignment.
std::optional<int> aligned_microimage_px(const SpcConfig& c);

}  // namespace pupilfield::spc

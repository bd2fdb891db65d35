#pragma once

#include <string>
#include <vector>

#include "pupilfield/lightfield.hpp"
#include "pupilfield/optics.hpp"
#include "pupilfield/spc.hpp"

namespace pupilfield::synth {

using spc::ModelError;

enum class PatternKind { siemens_star, checkerboard, constant };

struct PatternSpec {
    PatternKind kind = PatternKind::siemens_star;
    int spokes = 4;           ///< star only
    double period_px = 16.0;  ///< checkerboard only
    int resolution = 256;     ///< square raster, pixels
    double physical_width_mm = 100.0;

    void validate() const;
};

/// Planar target with its raster and metric footprint (centered on the
/// optical axis).
struct Target {
    lf::Image image;
    double physical_width_mm = 0.0;

    /// Bilinear intensity at metric plane coordinates (origin on the axis).
    double sample(double x_mm, double y_mm) const;
};

struct SynthResult {
    lf::LightField4D lightfield;
    std::vector<std::string> warnings;
};

/// Analytic evaluation per pixel center. Star sectors follow
/// floor(spokes * theta / pi) with boundary points tied to the lower sector.
lf::Image render_pattern(const PatternSpec& p);

Target make_target(const PatternSpec& p);

/// Geometric 4D light field of a planar target at distance o: view (k,l)
/// projects from the exit-pupil sample ((k-k_c)*D_UV, (l-l_c)*D_UV), spatial
/// sample (i,j) sits on the MLA at ((i-i_c)*D_ST, (j-j_c)*D_ST); the ray
/// through both is intersected with the conjugate plane of o and mapped to
/// the target through the main-lens magnification. The construction never
/// evaluates the shift equations, so their agreement with the measured
/// disparity is a genuine test.
SynthResult synth_lightfield(const spc::SpcConfig& c, const PatternSpec& p,
                             double o_mm, int views_x, int views_y);

/// views default to the microimage size in pixels (requires alignment).
SynthResult synth_lightfield(const spc::SpcConfig& c, const PatternSpec& p,
                             double o_mm);

/// Overload taking a pre-rendered target so sweeps can share one raster; the
/// per-distance footprint integration is still applied internally.
SynthResult synth_lightfield(const spc::SpcConfig& c, const Target& target,
                             double o_mm, int views_x, int views_y);

/// Half-width of the target footprint (mm) needed to cover every sample of
/// the given light-field geometry at distance o.
double required_pattern_halfwidth(const spc::SpcConfig& c, double o_mm,
                                  int spatial, int views);

/// Scene-plane footprint of one spatial light-field sample at distance o:
/// the microlens pitch projected through the view geometry onto the target.
double sample_footprint_mm(const spc::SpcConfig& c, double o_mm);

/// Raw mosaic of the light field plus the matching white image. With
/// vignetting enabled a strictly positive radial falloff multiplies the raw
/// image and the white image carries the same falloff.
struct RawPair {
    lf::Image raw;
    lf::Image white;
};
RawPair synth_raw(const spc::SpcConfig& c, const lf::LightField4D& lfield,
                  bool vignette);

/// Per-microlens MIC ground truth from exact forward tracing.
struct MicEntry {
    int ml_index = 0;
    double ml_center_mm = 0.0;
    double mic_mm = 0.0;       ///< mean sensor hit (NaN when no rays arrived)
    double variance_mm2 = 0.0;
    int hits = 0;
};

struct MicGroundTruth {
    std::vector<MicEntry> entries;  ///< ordered by microlens index
    double sensor_z_mm = 0.0;
    double mla_scene_z_mm = 0.0;    ///< MLA scene-side principal plane
    double mla_cam_z_mm = 0.0;      ///< MLA camera-side principal plane
    double exit_pupil_z_mm = 0.0;   ///< paraxial exit pupil, absolute z
    double stop_z_mm = 0.0;
};

/// Traces a fan of rays from the aperture-stop center through the main lens,
/// deflects them at the MLA by the ideal thin-lens rule relative to the
/// nearest microlens center, and records the per-microlens sensor hit
/// statistics. `fan_fraction` scales the fan's angular extent (1 = the span
/// that covers the whole microlens row).
MicGroundTruth mic_forward_trace(const optics::LensPrescription& p,
                                 const spc::SpcConfig& c, int rays_per_bundle,
                                 double fan_fraction = 1.0);

/// One ray per microlens from its MIC back through the microlens center,
/// extended toward the main lens. Feed into min_blur_spot/bundle_axis_stats.
std::vector<optics::Ray2D> mic_backtrace(const MicGroundTruth& g,
                                         const spc::SpcConfig& c);

namespace reference {
SynthResult synth_lightfield(const spc::SpcConfig& c, const PatternSpec& p,
                             double o_mm, int views_x, int views_y);
}

}  // namespace pupilfield::synth

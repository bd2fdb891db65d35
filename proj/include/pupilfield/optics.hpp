#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pupilfield::optics {

/// Error thrown when an operation's domain precondition is violated.
/// The message names the violated precondition.
class OpticsError : public std::runtime_error {
public:
    explicit OpticsError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Sign conventions (used consistently across the whole library):
//   * z increases from the scene toward the sensor.
//   * A radius is positive when its center of curvature lies on the sensor
//     side of the surface vertex.
//   * Positions inside a ParaxialSummary are measured from the stop plane.
//     h_cam and exit_pupil_position are positive toward the sensor, h_scene
//     is positive toward the scene.
//   * X = exit_pupil_position - h_cam, so X > 0 places the exit pupil on the
//     sensor side of H_cam and the pupil-to-MLA gap is F = d - X < d.
// ---------------------------------------------------------------------------

/// One refractive (or stop) surface of a sequential prescription.
struct OpticalSurface {
    /// Signed radius of curvature in mm; nullopt encodes a planar surface.
    std::optional<double> radius_mm;
    /// Axial distance to the next surface (mm, >= 0).
    double thickness_mm = 0.0;
    /// Refractive index of the medium behind this surface (>= 1).
    double ior_after = 1.0;
    /// Clear semi-aperture (mm, > 0).
    double semi_aperture_mm = 1.0;
    bool is_stop = false;

    bool planar() const { return !radius_mm.has_value(); }
};

/// Ordered surface list, scene side first.
struct LensPrescription {
    std::string name;
    double ambient_index = 1.0;
    std::vector<OpticalSurface> surfaces;
    /// True when no surface declared a stop and one was synthesized at the
    /// first surface during validation.
    bool stop_synthesized = false;

    /// Index of the (unique) stop surface. Only valid after validate().
    int stop_index = -1;

    /// Enforces the type invariants: at least one surface, indices >= 1,
    /// positive semi-apertures, non-negative thicknesses, exactly one stop
    /// (synthesizing one at the first surface if none is declared).
    void validate();

    /// z position of surface vertex i, with the first surface at z = 0.
    double surface_z(int i) const;
    /// z position of the stop plane.
    double stop_z() const { return surface_z(stop_index); }
    /// Medium in front of surface i.
    double index_before(int i) const {
        return i == 0 ? ambient_index : surfaces[i - 1].ior_after;
    }

    /// The same system traversed sensor-to-scene: surface order reversed,
    /// radii negated, media mirrored accordingly.
    LensPrescription reversed() const;
};

/// Meridional ray: a line in the (z, y) plane traveling toward +z.
/// `slope` is dy/dz; for near-axis rays it coincides with the angle in
/// radians.
struct Ray2D {
    double height_mm = 0.0;
    double slope = 0.0;
    double z_mm = 0.0;

    /// Height of the ray's line at axial position z.
    double height_at(double z) const { return height_mm + slope * (z - z_mm); }
    /// z where the ray crosses the optical axis (slope must be nonzero).
    double axis_crossing() const { return z_mm - height_mm / slope; }
};

/// Paraxial description of a prescription. All positions in mm from the
/// stop plane, following the sign conventions above.
struct ParaxialSummary {
    double f_M = 0.0;                 ///< effective focal length
    double h_scene = 0.0;             ///< scene-side principal plane, + toward scene
    double h_cam = 0.0;               ///< camera-side principal plane, + toward sensor
    double exit_pupil_position = 0.0; ///< + toward sensor
    double exit_pupil_radius = 0.0;
    double X = 0.0;                   ///< exit_pupil_position - h_cam

    /// Absolute z of the stop plane in prescription coordinates (first
    /// surface vertex at z = 0). Convenience for the tracing pipelines.
    double stop_z_mm = 0.0;

    std::vector<std::string> warnings;
};

/// Result of the exact meridional trace. `states` holds the ray after each
/// surface actually reached (state i = after refraction at surface i).
struct TraceResult {
    enum class Status { ok, clipped, total_internal_reflection, missed };
    std::vector<Ray2D> states;
    Status status = Status::ok;
    /// Surface where the ray was clipped or terminated (-1 if status == ok).
    int failed_surface = -1;

    bool ok() const { return status == Status::ok; }
};

/// Axis-intersection statistics of a ray bundle.
struct AxisStats {
    double mean_mm = 0.0;
    double variance_mm2 = 0.0;  ///< population variance (divide by N)
    int used = 0;
    int excluded = 0;  ///< rays parallel to the axis
};

struct BlurSpotReport {
    double best_axial_position = 0.0;
    double rms_radius_at_best = 0.0;
    double axis_intersection_mean = 0.0;
    double axis_intersection_variance = 0.0;
    /// Set when every ray in the bundle is identical (zero-radius minimum
    /// everywhere along the ray).
    bool degenerate = false;
};

/// Thin-lens image distance: 1/f = 1/o + 1/i. Accepts o = infinity and
/// returns f. Throws OpticsError for o = f (focus at infinity).
double image_distance(double f_mm, double o_mm);

/// Paraxial analysis: effective focal length from a marginal ray parallel to
/// the axis, principal planes by back-projection of that ray, exit pupil as
/// the paraxial conjugate of the stop through the surfaces behind it.
/// Throws OpticsError for afocal systems; aperture violations of the
/// marginal ray only produce warnings (the paraxial trace ignores apertures).
ParaxialSummary paraxial_summary(const LensPrescription& p);

/// Exact 2D trace: circle intersection per surface, Snell's law at each
/// interface, straight propagation between. Rays beyond a semi-aperture are
/// marked clipped; total internal reflection and missed surfaces terminate
/// the ray with the corresponding status.
TraceResult trace_meridional(const LensPrescription& p, const Ray2D& entry);

/// Mean and population variance of the rays' axis intersections
/// (z = z0 - y/slope per ray). Rays parallel to the axis are excluded and
/// counted; throws OpticsError if every ray is excluded.
AxisStats bundle_axis_stats(const std::vector<Ray2D>& rays);

/// Line search for the plane of minimum RMS bundle height: 1024-sample
/// coarse scan of [z_min, z_max] followed by parabolic refinement to 1e-4 mm.
/// The report also carries the bundle's axis-intersection statistics.
BlurSpotReport min_blur_spot(const std::vector<Ray2D>& rays, double z_min,
                             double z_max);

/// RMS of the bundle's heights evaluated at plane z.
double bundle_rms_at(const std::vector<Ray2D>& rays, double z);

}  // namespace pupilfield::optics

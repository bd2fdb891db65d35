#include "pupilfield/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pupilfield::optics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 2x2 ray-transfer matrix acting on (height, slope).
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static Mat2 translation(double t) { return {1.0, t, 0.0, 1.0}; }

    /// Paraxial refraction n1 -> n2 at a surface of radius R (nullopt =
    /// planar): u' = (n1/n2) u + y (n1 - n2) / (n2 R).
    static Mat2 refraction(std::optional<double> radius, double n1, double n2) {
        const double power = radius ? (n1 - n2) / (n2 * *radius) : 0.0;
        return {1.0, 0.0, power, n1 / n2};
    }

    Mat2 operator*(const Mat2& rhs) const {
        return {a * rhs.a + b * rhs.c, a * rhs.b + b * rhs.d,
                c * rhs.a + d * rhs.c, c * rhs.b + d * rhs.d};
    }
};

/// Composite matrix from just before surface `first` to just after surface
/// `last` (inclusive), refraction and inter-surface translations only.
Mat2 system_matrix(const LensPrescription& p, int first, int last) {
    Mat2 m;
    for (int i = first; i <= last; ++i) {
        const auto& s = p.surfaces[i];
        m = Mat2::refraction(s.radius_mm, p.index_before(i), s.ior_after) * m;
        if (i < last) m = Mat2::translation(s.thickness_mm) * m;
    }
    return m;
}

struct ParaxialRay {
    double y, u;
};

ParaxialRay apply(const Mat2& m, ParaxialRay r) {
    return {m.a * r.y + m.b * r.u, m.c * r.y + m.d * r.u};
}

}  // namespace

void LensPrescription::validate() {
    if (surfaces.empty())
        throw OpticsError("prescription must contain at least one surface");
    if (!(ambient_index >= 1.0))
        throw OpticsError("ambient_index must be >= 1");
    int stops = 0;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        const auto& s = surfaces[i];
        if (!(s.ior_after >= 1.0))
            throw OpticsError("refractive index < 1 at surface " +
                              std::to_string(i));
        if (!(s.thickness_mm >= 0.0))
            throw OpticsError("negative thickness at surface " +
                              std::to_string(i));
        if (!(s.semi_aperture_mm > 0.0))
            throw OpticsError("non-positive semi-aperture at surface " +
                              std::to_string(i));
        if (s.radius_mm && *s.radius_mm == 0.0)
            throw OpticsError("zero radius at surface " + std::to_string(i));
        if (s.is_stop) {
            stops++;
            stop_index = static_cast<int>(i);
        }
    }
    if (stops > 1) throw OpticsError("prescription declares more than one stop");
    if (stops == 0) {
        surfaces.front().is_stop = true;
        stop_synthesized = true;
        stop_index = 0;
    }
}

double LensPrescription::surface_z(int i) const {
    double z = 0.0;
    for (int k = 0; k < i; ++k) z += surfaces[k].thickness_mm;
    return z;
}

LensPrescription LensPrescription::reversed() const {
    LensPrescription r;
    r.name = name + " (reversed)";
    const int n = static_cast<int>(surfaces.size());
    r.ambient_index = surfaces.back().ior_after;
    for (int i = n - 1; i >= 0; --i) {
        OpticalSurface s;
        if (surfaces[i].radius_mm) s.radius_mm = -*surfaces[i].radius_mm;
        s.semi_aperture_mm = surfaces[i].semi_aperture_mm;
        s.is_stop = surfaces[i].is_stop;
        s.ior_after = i == 0 ? ambient_index : surfaces[i - 1].ior_after;
        s.thickness_mm = i == 0 ? 0.0 : surfaces[i - 1].thickness_mm;
        r.surfaces.push_back(s);
    }
    r.validate();
    return r;
}

double image_distance(double f_mm, double o_mm) {
    if (f_mm == 0.0) throw OpticsError("image_distance: focal length is zero");
    if (std::isinf(o_mm)) return f_mm;
    if (!(o_mm > 0.0)) throw OpticsError("image_distance: object distance must be positive");
    if (o_mm == f_mm)
        throw OpticsError("image_distance: object at focal distance, image at infinity");
    return o_mm * f_mm / (o_mm - f_mm);
}

ParaxialSummary paraxial_summary(const LensPrescription& p) {
    if (p.stop_index < 0)
        throw OpticsError("prescription not validated (no stop index)");
    const int last = static_cast<int>(p.surfaces.size()) - 1;
    const double z_last = p.surface_z(last);
    const double n_image = p.surfaces[last].ior_after;

    // Marginal ray from infinity (unit height, zero slope).
    const Mat2 m_sys = system_matrix(p, 0, last);
    const ParaxialRay out = apply(m_sys, {1.0, 0.0});
    const double f = -n_image / m_sys.c;  // -1/C scaled by the image index
    if (!std::isfinite(f) || std::abs(f) > 1e9)
        throw OpticsError("afocal system: marginal ray does not cross the axis");

    const double bfd = -out.y / out.u;            // last surface -> focal point
    const double z_h_cam = z_last + bfd - f;      // back principal plane

    // Scene-side principal plane from the reversed system.
    const LensPrescription rev = p.reversed();
    const Mat2 m_rev = system_matrix(rev, 0, last);
    const ParaxialRay rout = apply(m_rev, {1.0, 0.0});
    const double f_rev = -rev.surfaces[last].ior_after / m_rev.c;
    const double bfd_rev = -rout.y / rout.u;
    const double z_h_scene = 0.0 - bfd_rev + f_rev;  // front focal point + f

    // Exit pupil: paraxial conjugate of the stop through the rear group.
    const auto& stop = p.surfaces[p.stop_index];
    double pupil_t = 0.0;   // from the last surface
    double pupil_mag = 1.0;
    if (p.stop_index < last) {
        Mat2 m = Mat2::translation(stop.thickness_mm);
        m = system_matrix(p, p.stop_index + 1, last) * m;
        if (m.d == 0.0)
            throw OpticsError("exit pupil at infinity (telecentric rear group)");
        pupil_t = -m.b / m.d;
        pupil_mag = m.a + pupil_t * m.c;
    }
    const double z_pupil = z_last + pupil_t;
    const double z_stop = p.stop_z();

    ParaxialSummary s;
    s.f_M = f;
    s.h_cam = z_h_cam - z_stop;
    s.h_scene = z_stop - z_h_scene;
    s.exit_pupil_position = z_pupil - z_stop;
    s.exit_pupil_radius = std::abs(pupil_mag) * stop.semi_aperture_mm;
    s.X = s.exit_pupil_position - s.h_cam;
    s.stop_z_mm = z_stop;

    // Physical-plausibility warning: scale the marginal ray to the first
    // surface's clear aperture and flag surfaces it overruns.
    {
        ParaxialRay r{p.surfaces.front().semi_aperture_mm, 0.0};
        for (int i = 0; i <= last; ++i) {
            if (std::abs(r.y) > p.surfaces[i].semi_aperture_mm * (1.0 + 1e-12))
                s.warnings.push_back("marginal ray exceeds semi-aperture of surface " +
                                     std::to_string(i));
            const auto& sf = p.surfaces[i];
            r = apply(Mat2::refraction(sf.radius_mm, p.index_before(i), sf.ior_after), r);
            if (i < last) r = apply(Mat2::translation(sf.thickness_mm), r);
        }
    }
    return s;
}

namespace {

/// Intersects a ray (unit direction dz, dy) with the surface whose vertex is
/// at z_vertex. Returns the path length, or nullopt when there is no
/// intersection in front of the ray.
std::optional<double> intersect_surface(const OpticalSurface& s, double z_vertex,
                                        double z0, double y0, double dz, double dy) {
    if (s.planar()) {
        const double t = (z_vertex - z0) / dz;
        if (t < 0.0) return std::nullopt;
        return t;
    }
    const double r = *s.radius_mm;
    // Circle center on the axis at z_vertex + r.
    const double cz = z_vertex + r;
    const double oz = z0 - cz;
    const double oy = y0;
    const double b = oz * dz + oy * dy;  // |d| = 1
    const double c = oz * oz + oy * oy - r * r;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t0 = -b - sq;
    const double t1 = -b + sq;
    // Pick the hemisphere containing the vertex: closer root for r > 0,
    // farther for r < 0 (ray travels toward +z).
    const double t = r > 0.0 ? t0 : t1;
    if (t < 0.0) return std::nullopt;
    return t;
}

}  // namespace

TraceResult trace_meridional(const LensPrescription& p, const Ray2D& entry) {
    TraceResult result;
    if (!std::isfinite(entry.height_mm) || !std::isfinite(entry.slope))
        throw OpticsError("trace_meridional: non-finite entry ray");
    if (entry.z_mm > 0.0)
        throw OpticsError("trace_meridional: ray must start before the first surface");

    // Unit direction from the slope.
    const double norm = std::sqrt(1.0 + entry.slope * entry.slope);
    double dz = 1.0 / norm;
    double dy = entry.slope / norm;
    double z = entry.z_mm;
    double y = entry.height_mm;

    const int n_surf = static_cast<int>(p.surfaces.size());
    for (int i = 0; i < n_surf; ++i) {
        const auto& s = p.surfaces[i];
        const double z_vertex = p.surface_z(i);
        const auto t = intersect_surface(s, z_vertex, z, y, dz, dy);
        if (!t) {
            result.status = TraceResult::Status::missed;
            result.failed_surface = i;
            return result;
        }
        z += *t * dz;
        y += *t * dy;
        if (std::abs(y) > s.semi_aperture_mm) {
            result.status = TraceResult::Status::clipped;
            result.failed_surface = i;
            return result;
        }

        // Surface normal at the hit point, oriented against the ray.
        double nz, ny;
        if (s.planar()) {
            nz = -1.0;
            ny = 0.0;
        } else {
            const double r = *s.radius_mm;
            nz = (z - (z_vertex + r)) / r;
            ny = y / r;
            // For r > 0 this already points toward the scene; for r < 0 it
            // is flipped, which the sign of r absorbs. Re-orient explicitly:
            if (nz * dz + ny * dy > 0.0) {
                nz = -nz;
                ny = -ny;
            }
        }

        const double n1 = p.index_before(i);
        const double n2 = s.ior_after;
        const double eta = n1 / n2;
        const double cos1 = -(nz * dz + ny * dy);
        const double sin2_sq = eta * eta * (1.0 - cos1 * cos1);
        if (sin2_sq > 1.0) {
            result.status = TraceResult::Status::total_internal_reflection;
            result.failed_surface = i;
            return result;
        }
        const double cos2 = std::sqrt(1.0 - sin2_sq);
        dz = eta * dz + (eta * cos1 - cos2) * nz;
        dy = eta * dy + (eta * cos1 - cos2) * ny;
        if (dz <= 0.0) {
            // Refracted backwards: treat as terminated.
            result.status = TraceResult::Status::total_internal_reflection;
            result.failed_surface = i;
            return result;
        }
        result.states.push_back({y, dy / dz, z});
    }
    return result;
}

AxisStats bundle_axis_stats(const std::vector<Ray2D>& rays) {
    AxisStats stats;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& r : rays) {
        if (r.slope == 0.0) {
            stats.excluded++;
            continue;
        }
        const double zc = r.axis_crossing();
        sum += zc;
        sum_sq += zc * zc;
        stats.used++;
    }
    if (stats.used == 0)
        throw OpticsError("bundle_axis_stats: every ray is parallel to the axis");
    stats.mean_mm = sum / stats.used;
    stats.variance_mm2 = std::max(0.0, sum_sq / stats.used - stats.mean_mm * stats.mean_mm);
    return stats;
}

double bundle_rms_at(const std::vector<Ray2D>& rays, double z) {
    double sum_sq = 0.0;
    for (const auto& r : rays) {
        const double h = r.height_at(z);
        sum_sq += h * h;
    }
    return std::sqrt(sum_sq / static_cast<double>(rays.size()));
}

BlurSpotReport min_blur_spot(const std::vector<Ray2D>& rays, double z_min,
                             double z_max) {
    if (!(z_min < z_max)) throw OpticsError("min_blur_spot: z_min must be < z_max");
    if (rays.size() < 2) throw OpticsError("min_blur_spot: need at least 2 rays");

    BlurSpotReport report;
    const auto stats = bundle_axis_stats(rays);
    report.axis_intersection_mean = stats.mean_mm;
    report.axis_intersection_variance = stats.variance_mm2;

    bool identical = true;
    for (const auto& r : rays) {
        if (r.height_at(0.0) != rays.front().height_at(0.0) ||
            r.slope != rays.front().slope) {
            identical = false;
            break;
        }
    }
    if (identical) {
        report.degenerate = true;
        report.best_axial_position = std::clamp(stats.mean_mm, z_min, z_max);
        report.rms_radius_at_best =
            bundle_rms_at(rays, report.best_axial_position);
        return report;
    }

    // The squared RMS is quadratic in z, so the coarse scan brackets the
    // single interior minimum and one parabolic step lands on it.
    constexpr int kSamples = 1024;
    const double step = (z_max - z_min) / (kSamples - 1);
    int best = 0;
    double best_val = kInf;
    std::vector<double> vals(kSamples);
    for (int i = 0; i < kSamples; ++i) {
        vals[i] = bundle_rms_at(rays, z_min + i * step);
        if (vals[i] < best_val) {
            best_val = vals[i];
            best = i;
        }
    }

    double z_best = z_min + best * step;
    if (best > 0 && best < kSamples - 1) {
        double lo = z_best - step, mid = z_best, hi = z_best + step;
        double g_lo = vals[best - 1] * vals[best - 1];
        double g_mid = vals[best] * vals[best];
        double g_hi = vals[best + 1] * vals[best + 1];
        for (int iter = 0; iter < 40 && hi - lo > 1e-4; ++iter) {
            const double p = (mid - lo) * (g_mid - g_hi);
            const double q = (mid - hi) * (g_mid - g_lo);
            const double denom = p - q;
            double z_new = denom != 0.0
                               ? mid - 0.5 * ((mid - lo) * p - (mid - hi) * q) / denom
                               : 0.5 * (lo + hi);
            z_new = std::clamp(z_new, lo, hi);
            if (z_new == mid || z_new == lo || z_new == hi)
                z_new = 0.5 * (lo + 0.5 * (mid + hi));
            const double f_new = bundle_rms_at(rays, z_new);
            const double g_new = f_new * f_new;
            if (z_new < mid) {
                if (g_new <= g_mid) {
                    hi = mid; g_hi = g_mid; mid = z_new; g_mid = g_new;
                } else {
                    lo = z_new; g_lo = g_new;
                }
            } else {
                if (g_new <= g_mid) {
                    lo = mid; g_lo = g_mid; mid = z_new; g_mid = g_new;
                } else {
                    hi = z_new; g_hi = g_new;
                }
            }
        }
        z_best = mid;
    }
    report.best_axial_position = z_best;
    report.rms_radius_at_best = bundle_rms_at(rays, z_best);
    return report;
}

}  // namespace pupilfield::optics

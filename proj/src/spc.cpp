#include "pupilfield/spc.hpp"

#include <cmath>

namespace pupilfield::spc {

namespace {

double expected_d(double f_M, double o_f) {
    return std::isinf(o_f) ? f_M : f_M * o_f / (o_f - f_M);
}

}  // namespace

void SpcConfig::validate() const {
    if (!(f_M != 0.0)) throw ModelError("config: f_M must be nonzero");
    if (!(d > 0.0)) throw ModelError("config: d must be positive");
    if (!(f_m > 0.0)) throw ModelError("config: f_m must be positive");
    if (!(d_ML > 0.0)) throw ModelError("config: d_ML must be positive");
    if (!(s_px > 0.0)) throw ModelError("config: s_px must be positive");
    if (!(mla_thickness >= 0.0)) throw ModelError("config: mla_thickness must be >= 0");
    if (d == X) throw ModelError("config: two-plane distance F = d - X is zero");
    if (!infinite_focus() && !(o_f > f_M))
        throw ModelError("config: finite focus distance must exceed f_M");
    const double d_want = expected_d(f_M, o_f);
    if (std::abs(d - d_want) > 1e-9 * std::abs(d_want))
        throw ModelError("config: d inconsistent with o_f (expected d = f_M*o_f/(o_f-f_M))");
}

TwoPlaneGeometry geometry(const SpcConfig& c) {
    c.validate();
    TwoPlaneGeometry g;
    g.F = c.d - c.X;
    g.delta_st = c.d_ML;
    g.delta_uv = c.s_px * g.F / c.f_m;
    g.delta = g.delta_uv / g.delta_st;
    g.delta_naive = c.s_px * c.d / (c.f_m * c.d_ML);
    g.d_mli = c.d_ML * (1.0 + c.f_m / g.F);
    g.m_proj_correct = 1.0 / (1.0 + c.f_m / g.F);
    g.m_proj_naive = 1.0 / (1.0 + c.f_m / c.d);
    return g;
}

double alpha(const SpcConfig& c, double o_mm) {
    if (!(o_mm > c.f_M)) throw ModelError("alpha: object distance must exceed f_M");
    return (o_mm * (c.f_M - c.X) + c.f_M * c.X) / ((o_mm - c.f_M) * (c.d - c.X));
}

double shift_from_distance(const SpcConfig& c, double o_mm, ShiftModel model) {
    if (!(o_mm > c.f_M))
        throw ModelError("shift_from_distance: object distance must exceed f_M");
    const TwoPlaneGeometry g = geometry(c);
    const double num = o_mm * (c.f_M - c.d) + c.f_M * c.d;
    if (model == ShiftModel::naive) return g.delta_naive * num / (o_mm * c.f_M);
    const double den = o_mm * (c.f_M - c.X) + c.f_M * c.X;
    if (den == 0.0)
        throw ModelError("shift_from_distance: exit-pupil denominator vanishes");
    return g.delta * num / den;
}

FlaggedDistance distance_from_shift(const SpcConfig& c, double shift_px,
                                    ShiftModel model) {
    const TwoPlaneGeometry g = geometry(c);
    double num, den;
    if (model == ShiftModel::exit_pupil) {
        num = c.f_M * (c.d * g.delta - shift_px * c.X);
        den = shift_px * (c.f_M - c.X) - g.delta * (c.f_M - c.d);
    } else {
        num = c.f_M * c.d * g.delta_naive;
        den = shift_px * c.f_M - g.delta_naive * (c.f_M - c.d);
    }
    FlaggedDistance result;
    const double scale = std::abs(g.delta * c.f_M) + std::abs(shift_px * c.f_M);
    if (std::abs(den) <= 1e-14 * scale) {
        result.o_mm = std::numeric_limits<double>::infinity();
        result.flag = DistanceFlag::maps_to_infinity;
        return result;
    }
    result.o_mm = num / den;
    if (!(result.o_mm > c.f_M)) result.flag = DistanceFlag::out_of_range;
    return result;
}

FlaggedDistance hahne_distance_from_shift(const SpcConfig& c, double shift_px) {
    const TwoPlaneGeometry g = geometry(c);
    if (shift_px == 0.0) {
        // S^ = -s_px/S is undefined; by convention the focus distance.
        return {c.o_f, DistanceFlag::at_focus};
    }
    const double s_hat = -c.s_px / shift_px;

    // Two sensor-to-scene ray lines, z measured from the MLA toward the
    // scene. The first runs along the axis (central MIC through the central
    // microlens); the second starts at sensor height d_MLI + S^ and passes
    // through the neighboring microlens center at height d_ML.
    const double slope2 = (c.d_ML - (g.d_mli + s_hat)) / c.f_m;
    // Intersection of y = 0 with y = slope2 * z + d_ML.
    if (slope2 == 0.0)
        return {std::numeric_limits<double>::infinity(), DistanceFlag::maps_to_infinity};
    const double z_i = -c.d_ML / slope2;

    const double i_img = c.d - z_i;
    FlaggedDistance result;
    if (i_img == c.f_M) {
        result.o_mm = std::numeric_limits<double>::infinity();
        result.flag = DistanceFlag::maps_to_infinity;
        return result;
    }
    result.o_mm = i_img * c.f_M / (i_img - c.f_M);
    if (!(result.o_mm > c.f_M)) result.flag = DistanceFlag::out_of_range;
    return result;
}

std::pair<double, double> pertuz_focus_terms(const SpcConfig& c) {
    if (!c.infinite_focus()) return {c.o_f, c.d};
    const double o_f = kInfiniteFocusSubstitute_mm;
    return {o_f, c.f_M * o_f / (o_f - c.f_M)};
}

PertuzParams pertuz_params(const SpcConfig& c, PertuzVariant variant) {
    c.validate();
    const auto [o_f, d] = pertuz_focus_terms(c);
    if (d == c.f_M)
        throw ModelError("pertuz_params: d equals f_M with a finite focus distance");
    PertuzParams p;
    p.variant = variant;
    if (variant == PertuzVariant::original) {
        p.a0 = c.f_m * c.d_ML / (c.s_px * d);
        p.a1 = o_f * p.a0 / c.f_M;
    } else {
        const double delta = c.s_px * (d - c.X) / (c.f_m * c.d_ML);
        p.a0 = -c.X / (delta * d);
        p.a1 = (c.f_M - c.X) / (delta * (d - c.f_M));
    }
    return p;
}

double pertuz_distance(const PertuzParams& p, double o_f_mm, double rho_px) {
    const double den = 1.0 - p.a1 * rho_px;
    if (std::abs(den) <= 1e-12 * (1.0 + std::abs(p.a1 * rho_px)))
        throw ModelError("pertuz_distance: pole at rho = 1/a1");
    return o_f_mm * (1.0 - p.a0 * rho_px) / den;
}

std::optional<int> aligned_microimage_px(const SpcConfig& c) {
    const TwoPlaneGeometry g = geometry(c);
    const double px = g.d_mli / c.s_px;
    const double rounded = std::round(px);
    if (rounded < 1.0) return std::nullopt;
    if (std::abs(px - rounded) > 1e-9 * px) return std::nullopt;
    return static_cast<int>(rounded);
}

SpcConfig design_spc(const optics::ParaxialSummary& summary, double o_f_mm,
                     double s_px_mm, Vec2i sensor_px, Vec2i micro_count,
                     const DesignOptions& opts) {
    if (!std::isinf(o_f_mm) && !(o_f_mm > summary.f_M))
        throw ModelError("design_spc: focus distance must exceed f_M (or be infinite)");
    if (!(s_px_mm > 0.0)) throw ModelError("design_spc: pixel pitch must be positive");
    if (micro_count.x < 1 || micro_count.y < 1)
        throw ModelError("design_spc: micro_count must be at least 1x1");

    SpcConfig c;
    c.f_M = summary.f_M;
    c.X = summary.X;
    c.o_f = o_f_mm;
    c.d = expected_d(summary.f_M, o_f_mm);
    c.s_px = s_px_mm;
    c.sensor_px = sensor_px;
    c.micro_count = micro_count;
    c.mla_thickness = opts.mla_thickness;
    const double F = c.d - c.X;
    if (F <= 0.0) throw ModelError("design_spc: exit pupil behind the MLA (F <= 0)");

    if (opts.d_ML && opts.f_m) {
        c.d_ML = *opts.d_ML;
        c.f_m = *opts.f_m;
    } else {
        // Working f-number of the main lens seen from the MLA.
        if (!(summary.exit_pupil_radius > 0.0))
            throw ModelError("design_spc: summary lacks an exit pupil radius");
        const double n_work = F / (2.0 * summary.exit_pupil_radius);
        if (opts.d_ML) {
            c.d_ML = *opts.d_ML;
        } else {
            // micro_count images of pitch d_ML (1 + f_m/F) spanning the
            // sensor, with f_m = n_work * d_ML: a quadratic in d_ML.
            const double width = sensor_px.x * s_px_mm;
            const double a = micro_count.x * n_work / F;
            const double b = micro_count.x;
            const double disc = b * b + 4.0 * a * width;
            c.d_ML = (-b + std::sqrt(disc)) / (2.0 * a);
        }
        c.f_m = opts.f_m ? *opts.f_m : n_work * c.d_ML;
    }
    if (!(c.d_ML > 0.0) || !(c.f_m > 0.0))
        throw ModelError("design_spc: derived nonpositive microlens parameters");

    // MIC-on-pixel-center: force d_MLI onto an exact pixel multiple with the
    // smallest multiplicative perturbation, adjusting d_ML first, f_m second.
    const double d_mli = c.d_ML * (1.0 + c.f_m / F);
    const double target = std::max(1.0, std::round(d_mli / s_px_mm)) * s_px_mm;

    const double d_ml_adjusted = target / (1.0 + c.f_m / F);
    const double pert_d_ml = std::abs(d_ml_adjusted / c.d_ML - 1.0);
    const double f_m_adjusted = (target / c.d_ML - 1.0) * F;
    const double pert_f_m =
        f_m_adjusted > 0.0 ? std::abs(f_m_adjusted / c.f_m - 1.0) : 2.0;

    if (pert_d_ml <= opts.max_perturbation) {
        c.d_ML = d_ml_adjusted;
    } else if (pert_f_m <= opts.max_perturbation) {
        c.f_m = f_m_adjusted;
    } else {
        // Closest pitch reachable at the perturbation boundary.
        const double direction = target > d_mli ? 1.0 : -1.0;
        const double closest =
            c.d_ML * (1.0 + direction * opts.max_perturbation) * (1.0 + c.f_m / F);
        throw DesignError(
            "design_spc: no MIC-on-pixel solution within the allowed perturbation",
            closest);
    }

    const auto px = aligned_microimage_px(c);
    if (!px)
        throw ModelError("design_spc: pitch alignment failed unexpectedly");
    if (micro_count.x * *px > sensor_px.x || micro_count.y * *px > sensor_px.y)
        throw ModelError("design_spc: micro_count does not fit the sensor");

    c.validate();
    return c;
}

}  // namespace pupilfield::spc

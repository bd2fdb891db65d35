#include "pupilfield/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pupilfield::experiments {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void append_flag(std::string& flags, const std::string& token) {
    if (!flags.empty()) flags += ';';
    flags += token;
}

/// Pattern raster for one target distance: wide enough for the field of
/// view, with about two raster pixels per scene-plane sample so the bilinear
/// lookup prefilters the target at the sampling scale. The star target is
/// scale free, so per-distance rasters describe the same physical scene.
synth::PatternSpec sweep_pattern(const Preset& preset, double o_mm,
                                 const SweepSettings& settings) {
    const auto& c = preset.config;
    const int spatial = std::max(c.micro_count.x, c.micro_count.y);
    const double halfwidth =
        synth::required_pattern_halfwidth(c, o_mm, spatial, settings.views);
    const double footprint = synth::sample_footprint_mm(c, o_mm);
    synth::PatternSpec p;
    p.kind = settings.pattern;
    p.spokes = settings.spokes;
    p.physical_width_mm = 2.0 * halfwidth * 1.15;
    p.resolution = std::clamp(
        static_cast<int>(std::ceil(8.0 * p.physical_width_mm / footprint)), 128, 4096);
    return p;
}

/// Dense candidate distances spanning the targets and the given extra
/// distances, multiplicatively spaced.
std::vector<double> candidate_grid(const std::vector<double>& anchors,
                                   double step) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const double a : anchors) {
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    lo *= 0.95;
    hi *= 1.05;
    std::vector<double> grid;
    for (double o = lo; o <= hi * (1.0 + 1e-12); o *= step) grid.push_back(o);
    return grid;
}

struct RenderedCandidate {
    double o_mm = 0.0;
    lf::LightField4D field;
};

/// All candidates share one pattern raster (the same physical target seen at
/// different distances) so their focus scores are directly comparable.
std::vector<RenderedCandidate> render_candidates(const Preset& preset,
                                                 const std::vector<double>& grid,
                                                 const SweepSettings& settings) {
    const auto& c = preset.config;
    const int spatial = std::max(c.micro_count.x, c.micro_count.y);
    double halfwidth = 0.0;
    double finest_footprint = std::numeric_limits<double>::infinity();
    for (const double o : grid) {
        halfwidth = std::max(halfwidth, synth::required_pattern_halfwidth(
                                            c, o, spatial, settings.views));
        finest_footprint = std::min(finest_footprint, synth::sample_footprint_mm(c, o));
    }
    synth::PatternSpec pattern;
    pattern.kind = settings.pattern;
    pattern.spokes = settings.spokes;
    pattern.physical_width_mm = 2.0 * halfwidth * 1.15;
    pattern.resolution = std::clamp(
        static_cast<int>(std::ceil(5.0 * pattern.physical_width_mm / finest_footprint)),
        128, 4096);
    const synth::Target target = synth::make_target(pattern);

    std::vector<RenderedCandidate> out;
    out.reserve(grid.size());
    for (const double o : grid) {
        RenderedCandidate rc;
        rc.o_mm = o;
        rc.field = synth::synth_lightfield(preset.config, target, o,
                                           settings.views, settings.views)
                       .lightfield;
        out.push_back(std::move(rc));
    }
    return out;
}

/// Candidate distance whose refocused image at the given shift scores
/// highest, refined by a parabolic fit over log distance.
double sharpest_candidate(const std::vector<RenderedCandidate>& candidates,
                          double shift_px, std::string& flags) {
    std::vector<double> scores(candidates.size(), -1.0);
    int best = -1;
    int failures = 0;
    for (std::size_t idx = 0; idx < candidates.size(); ++idx) {
        try {
            scores[idx] =
                lf::focus_measure(lf::refocus(candidates[idx].field, shift_px).image);
            if (best < 0 || scores[idx] > scores[best]) best = static_cast<int>(idx);
        } catch (const spc::ModelError&) {
            failures++;
        }
    }
    if (best < 0) {
        append_flag(flags, "no_candidate_overlap");
        return kNan;
    }
    if (failures > 0) append_flag(flags, "partial_candidate_overlap");

    double o_best = candidates[best].o_mm;
    if (best > 0 && best + 1 < static_cast<int>(candidates.size()) &&
        scores[best - 1] >= 0.0 && scores[best + 1] >= 0.0) {
        const double xa = std::log(candidates[best - 1].o_mm);
        const double xb = std::log(candidates[best].o_mm);
        const double xc = std::log(candidates[best + 1].o_mm);
        const double fa = scores[best - 1], fb = scores[best], fc = scores[best + 1];
        const double p = (xb - xa) * (fb - fc);
        const double q = (xb - xc) * (fb - fa);
        const double den = p - q;
        if (den != 0.0) {
            const double vertex =
                xb - 0.5 * ((xb - xa) * p - (xb - xc) * q) / den;
            if (vertex > xa && vertex < xc) o_best = std::exp(vertex);
        }
    }
    return o_best;
}

}  // namespace

std::vector<double> default_distances(const spc::SpcConfig& c) {
    std::vector<double> out;
    if (c.infinite_focus()) {
        for (const double m : {2.0, 3.0, 5.0, 10.0, 20.0}) out.push_back(m * c.f_M);
    } else {
        for (const double l : {0.6, 0.8, 1.0, 1.25, 1.5, 2.0, 3.0})
            out.push_back(l * c.o_f);
    }
    return out;
}

MicVerifyReport exp_mic_verify(const Preset& preset, int rays_per_bundle) {
    if (!preset.prescription)
        throw spc::ModelError("exp_mic_verify: preset has no prescription");
    const auto& c = preset.config;
    const auto gt = synth::mic_forward_trace(*preset.prescription, c, rays_per_bundle);

    MicVerifyReport report;
    report.ground_truth = gt;
    report.exit_pupil_z_mm = gt.exit_pupil_z_mm;
    report.mla_z_mm = gt.mla_scene_z_mm;
    report.pupil_to_mla_mm = gt.mla_scene_z_mm - gt.exit_pupil_z_mm;
    report.model_mic_pitch_mm = spc::geometry(c).d_mli;

    // Pitch as the least-squares slope of MIC position over microlens index.
    {
        double mean_i = 0.0, mean_y = 0.0;
        int n = 0;
        for (const auto& e : gt.entries) {
            if (e.hits == 0) continue;
            mean_i += e.ml_index;
            mean_y += e.mic_mm;
            n++;
        }
        if (n < 2) throw spc::ModelError("exp_mic_verify: fewer than two MICs traced");
        mean_i /= n;
        mean_y /= n;
        double sxx = 0.0, sxy = 0.0;
        for (const auto& e : gt.entries) {
            if (e.hits == 0) continue;
            sxx += (e.ml_index - mean_i) * (e.ml_index - mean_i);
            sxy += (e.ml_index - mean_i) * (e.mic_mm - mean_y);
        }
        report.measured_mic_pitch_mm = sxy / sxx;
    }

    auto rays = synth::mic_backtrace(gt, c);
    std::sort(rays.begin(), rays.end(),
              [](const optics::Ray2D& a, const optics::Ray2D& b) {
                  return std::abs(a.height_mm) < std::abs(b.height_mm);
              });

    const double f_gap = report.pupil_to_mla_mm;
    const double z_lo = gt.exit_pupil_z_mm - f_gap;
    const double z_hi = gt.exit_pupil_z_mm + 0.9 * f_gap;
    for (const double fraction : {0.25, 0.5, 1.0}) {
        const int take = std::max<int>(
            2, static_cast<int>(std::lround(fraction * rays.size())));
        const std::vector<optics::Ray2D> subset(rays.begin(),
                                                rays.begin() + std::min<std::size_t>(take, rays.size()));
        const auto blur = optics::min_blur_spot(subset, z_lo, z_hi);
        MicSubsetResult r;
        r.fraction = fraction;
        r.rays = static_cast<int>(subset.size());
        r.blur_min_z_mm = blur.best_axial_position;
        r.blur_rms_mm = blur.rms_radius_at_best;
        r.axis_mean_z_mm = blur.axis_intersection_mean;
        r.axis_variance_mm2 = blur.axis_intersection_variance;
        report.subsets.push_back(r);
    }
    return report;
}

std::vector<SweepRecord> exp_shift_sweep(const Preset& preset,
                                         const std::vector<double>& distances,
                                         const SweepSettings& settings) {
    if (distances.empty())
        throw spc::ModelError("exp_shift_sweep: empty distance grid");
    const auto& c = preset.config;

    double s_lo = 0.0, s_hi = 0.0;
    for (const double o : distances) {
        const double s = spc::shift_from_distance(c, o, spc::ShiftModel::exit_pupil);
        s_lo = std::min(s_lo, s);
        s_hi = std::max(s_hi, s);
    }
    s_lo -= settings.shift_margin_px;
    s_hi += settings.shift_margin_px;

    std::vector<SweepRecord> records;
    for (const double o : distances) {
        SweepRecord rec;
        rec.o_mm = o;
        rec.lambda = o / c.o_f_finite();
        rec.s_model = spc::shift_from_distance(c, o, spc::ShiftModel::exit_pupil);
        rec.s_naive = spc::shift_from_distance(c, o, spc::ShiftModel::naive);
        try {
            const auto field =
                synth::synth_lightfield(c, sweep_pattern(preset, o, settings), o,
                                        settings.views, settings.views)
                    .lightfield;
            const auto focus = lf::best_shift(field, s_lo, s_hi, settings.line_search);
            rec.s_measured = focus.shift_px;
            if (focus.flag == lf::FocusSearchFlag::ambiguous)
                append_flag(rec.flags, "ambiguous");
            if (focus.flag == lf::FocusSearchFlag::multimodal)
                append_flag(rec.flags, "multimodal");

            const auto o_naive =
                spc::distance_from_shift(c, rec.s_measured, spc::ShiftModel::naive);
            const auto o_model =
                spc::distance_from_shift(c, rec.s_measured, spc::ShiftModel::exit_pupil);
            rec.o_from_s_naive = o_naive.o_mm;
            rec.o_from_s_model = o_model.o_mm;
            rec.e_measured = (o_naive.o_mm - o) / o;
            const auto analytic = error_models::distance_error_naive_model(c, o);
            rec.e_model = analytic.value;
            if (analytic.flag == error_models::ErrorFlag::pole)
                append_flag(rec.flags, "pole_naive_model");
        } catch (const spc::ModelError& e) {
            rec.s_measured = rec.o_from_s_naive = rec.o_from_s_model = kNan;
            rec.e_measured = rec.e_model = kNan;
            append_flag(rec.flags, std::string("failed:") + e.what());
        }
        records.push_back(rec);
    }
    return records;
}

std::vector<InverseRecord> exp_inverse_sweep(const Preset& preset,
                                             const std::vector<double>& shifts,
                                             const std::vector<double>& distances,
                                             const SweepSettings& settings) {
    const auto& c = preset.config;
    std::vector<double> anchors = distances;
    for (const double s : shifts) {
        const auto o = spc::distance_from_shift(c, s, spc::ShiftModel::exit_pupil);
        if (o.flag == spc::DistanceFlag::none) anchors.push_back(o.o_mm);
    }
    const auto candidates = render_candidates(
        preset, candidate_grid(anchors, settings.candidate_step), settings);

    std::vector<InverseRecord> records;
    for (const double s : shifts) {
        InverseRecord rec;
        rec.shift_px = s;
        const auto o_model = spc::distance_from_shift(c, s, spc::ShiftModel::exit_pupil);
        rec.o_model_mm = o_model.o_mm;
        if (o_model.flag == spc::DistanceFlag::out_of_range)
            append_flag(rec.flags, "model_out_of_range");
        if (o_model.flag == spc::DistanceFlag::maps_to_infinity)
            append_flag(rec.flags, "model_at_pole");
        rec.o_measured_mm = sharpest_candidate(candidates, s, rec.flags);
        records.push_back(rec);
    }
    return records;
}

ErrorSweeps exp_error_sweeps(const Preset& preset,
                             const std::vector<double>& distances,
                             const SweepSettings& settings) {
    const auto& c = preset.config;
    ErrorSweeps out;

    // Experiment III: measured shift composed through the naive inversion.
    out.naive_model = exp_shift_sweep(preset, distances, settings);

    // Experiment IV: refocus rendered candidates with the naive shift and
    // keep the sharpest; candidate grid extended to the predicted landing
    // points so quantization stays below the error scale.
    std::vector<double> anchors = distances;
    for (const double o : distances) {
        const double s_naive = spc::shift_from_distance(c, o, spc::ShiftModel::naive);
        const auto pred = spc::distance_from_shift(c, s_naive, spc::ShiftModel::exit_pupil);
        if (pred.flag == spc::DistanceFlag::none) anchors.push_back(pred.o_mm);
    }
    const auto candidates = render_candidates(
        preset, candidate_grid(anchors, settings.candidate_step), settings);

    for (const double o : distances) {
        SweepRecord rec;
        rec.o_mm = o;
        rec.lambda = o / c.o_f_finite();
        rec.s_model = spc::shift_from_distance(c, o, spc::ShiftModel::exit_pupil);
        rec.s_naive = spc::shift_from_distance(c, o, spc::ShiftModel::naive);
        rec.s_measured = rec.s_naive;  // the shift actually applied
        const auto o_naive = spc::distance_from_shift(c, rec.s_naive, spc::ShiftModel::naive);
        rec.o_from_s_naive = o_naive.o_mm;
        rec.o_from_s_model = sharpest_candidate(candidates, rec.s_naive, rec.flags);
        rec.e_measured = (rec.o_from_s_model - o) / o;
        const auto analytic = error_models::distance_error_naive_shift(c, o);
        rec.e_model = analytic.value;
        if (analytic.flag == error_models::ErrorFlag::pole)
            append_flag(rec.flags, "pole_naive_shift");
        out.naive_shift.push_back(rec);
    }
    return out;
}

namespace {

double fit_rmse(const std::vector<std::pair<double, double>>& points, double o_f,
                double a0, double a1) {
    double sum_sq = 0.0;
    for (const auto& [rho, o] : points) {
        const double den = 1.0 - a1 * rho;
        if (std::abs(den) < 1e-12) return std::numeric_limits<double>::infinity();
        const double model = o_f * (1.0 - a0 * rho) / den;
        sum_sq += (model - o) * (model - o);
    }
    return std::sqrt(sum_sq / points.size());
}

std::vector<double> fit_axis_candidates(double v_original, double v_corrected) {
    std::vector<double> magnitudes;
    const double m0 = std::abs(v_original), m1 = std::abs(v_corrected);
    const double hi = std::max(m0, m1);
    double lo = std::min(m0, m1);
    if (hi == 0.0) return {0.0};
    if (lo == 0.0) lo = hi;
    lo /= 4.0;
    const double top = hi * 4.0;
    constexpr int kSteps = 201;
    const double ratio = std::pow(top / lo, 1.0 / (kSteps - 1));
    double m = lo;
    for (int s = 0; s < kSteps; ++s, m *= ratio) {
        magnitudes.push_back(m);
        magnitudes.push_back(-m);
    }
    magnitudes.push_back(v_original);
    magnitudes.push_back(v_corrected);
    return magnitudes;
}

}  // namespace

FitReport exp_pertuz_fit(const Preset& preset,
                         const std::vector<SweepRecord>& sweep) {
    const auto& c = preset.config;
    std::vector<std::pair<double, double>> points;  // (rho, o)
    for (const auto& rec : sweep)
        if (std::isfinite(rec.s_measured) && std::isfinite(rec.o_mm))
            points.emplace_back(-rec.s_measured, rec.o_mm);
    if (points.size() < 5)
        throw spc::ModelError("exp_pertuz_fit: need at least 5 sweep points");
    {
        const double first = points.front().second;
        bool varied = false;
        for (const auto& [rho, o] : points) varied |= o != first;
        if (!varied)
            throw spc::ModelError("exp_pertuz_fit: degenerate sweep (single distance)");
    }

    const auto [o_f, d_sub] = spc::pertuz_focus_terms(c);
    (void)d_sub;
    const auto original = spc::pertuz_params(c, spc::PertuzVariant::original);
    const auto corrected = spc::pertuz_params(c, spc::PertuzVariant::corrected);

    FitReport report;
    report.a0_calc_original = original.a0;
    report.a1_calc_original = original.a1;
    report.a0_calc_corrected = corrected.a0;
    report.a1_calc_corrected = corrected.a1;
    report.rmse_original_mm = fit_rmse(points, o_f, original.a0, original.a1);
    report.rmse_corrected_mm = fit_rmse(points, o_f, corrected.a0, corrected.a1);

    const auto a0_candidates = fit_axis_candidates(original.a0, corrected.a0);
    const auto a1_candidates = fit_axis_candidates(original.a1, corrected.a1);
    double best_a0 = corrected.a0, best_a1 = corrected.a1;
    double best = report.rmse_corrected_mm;
    for (const double a0 : a0_candidates)
        for (const double a1 : a1_candidates) {
            const double rmse = fit_rmse(points, o_f, a0, a1);
            if (rmse < best) {
                best = rmse;
                best_a0 = a0;
                best_a1 = a1;
            }
        }

    // Coordinate descent with multiplicative steps down to 1e-6 relative.
    double step = 0.25;
    while (step > 1e-6) {
        bool improved = false;
        for (const int axis : {0, 1}) {
            for (const double dir : {1.0 + step, 1.0 / (1.0 + step)}) {
                const double a0 = axis == 0 ? best_a0 * dir : best_a0;
                const double a1 = axis == 1 ? best_a1 * dir : best_a1;
                const double rmse = fit_rmse(points, o_f, a0, a1);
                if (rmse < best) {
                    best = rmse;
                    best_a0 = a0;
                    best_a1 = a1;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }

    report.a0_fit = best_a0;
    report.a1_fit = best_a1;
    report.rmse_fit_mm = best;
    return report;
}

}  // namespace pupilfield::experiments

#include "pupilfield/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pupilfield/runtime.hpp"

namespace pupilfield::synth {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double star_value(int spokes, double dx, double dy) {
    const double theta = std::atan2(dy, dx);
    const double q = spokes * theta / M_PI;
    double sector = std::floor(q);
    if (q == sector) sector -= 1.0;  // boundary ties go to the lower sector
    return std::fmod(std::abs(sector), 2.0) == 0.0 ? 1.0 : 0.0;
}

double checker_value(double period, double x, double y) {
    const double cell = std::floor(x / period) + std::floor(y / period);
    return std::fmod(std::abs(cell), 2.0) == 0.0 ? 1.0 : 0.0;
}

}  // namespace

void PatternSpec::validate() const {
    if (resolution < 16) throw ModelError("pattern: resolution must be >= 16");
    if (kind == PatternKind::siemens_star && spokes < 2)
        throw ModelError("pattern: star needs at least 2 spokes");
    if (kind == PatternKind::checkerboard && !(period_px > 0.0))
        throw ModelError("pattern: checker period must be positive");
    if (!(physical_width_mm > 0.0))
        throw ModelError("pattern: physical width must be positive");
}

lf::Image render_pattern(const PatternSpec& p) {
    p.validate();
    lf::Image img(p.resolution, p.resolution);
    const double c = (p.resolution - 1) / 2.0;
    for (int y = 0; y < p.resolution; ++y) {
        for (int x = 0; x < p.resolution; ++x) {
            double v = 1.0;
            switch (p.kind) {
                case PatternKind::constant: v = 1.0; break;
                case PatternKind::siemens_star:
                    v = star_value(p.spokes, x - c, y - c);
                    break;
                case PatternKind::checkerboard:
                    v = checker_value(p.period_px, x, y);
                    break;
            }
            img.at(x, y) = static_cast<float>(v);
        }
    }
    return img;
}

Target make_target(const PatternSpec& p) {
    Target t;
    t.image = render_pattern(p);
    t.physical_width_mm = p.physical_width_mm;
    return t;
}

double Target::sample(double x_mm, double y_mm) const {
    const int res = image.width;
    const double scale = res / physical_width_mm;
    const double px = (x_mm + physical_width_mm / 2.0) * scale - 0.5;
    const double py = (y_mm + physical_width_mm / 2.0) * scale - 0.5;
    const double cx = std::clamp(px, 0.0, static_cast<double>(res - 1));
    const double cy = std::clamp(py, 0.0, static_cast<double>(res - 1));
    const int x0 = static_cast<int>(cx);
    const int y0 = static_cast<int>(cy);
    const double fx = cx - x0;
    const double fy = cy - y0;
    const int x1 = std::min(x0 + 1, res - 1);
    const int y1 = std::min(y0 + 1, res - 1);
    const double top = image.at(x0, y0) * (1.0 - fx) + image.at(x1, y0) * fx;
    const double bot = image.at(x0, y1) * (1.0 - fx) + image.at(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

namespace {

/// Separable box filter with fractional width (pixels), running-sum based.
/// Used to integrate the target over one spatial sample footprint:
/// point-sampled views are not bandlimited and defeat any sub-pixel focus
/// search, whereas a real sensor always integrates over the microlens
/// footprint.
void box_blur_axis(const float* src, float* dst, int n, int stride,
                   double width_px) {
    const double half = width_px / 2.0;
    const int reach = static_cast<int>(std::ceil(half - 0.5));
    const double end_w = half - (reach - 0.5);  // weight of the two end taps
    const auto at = [&](int i) {
        return static_cast<double>(src[std::clamp(i, 0, n - 1) * stride]);
    };
    // Running sum of the full-weight interior taps [-reach+1, reach-1].
    double run = 0.0;
    for (int t = -reach + 1; t <= reach - 1; ++t) run += at(t);
    for (int i = 0; i < n; ++i) {
        const double total = run + end_w * (at(i - reach) + at(i + reach));
        dst[i * stride] = static_cast<float>(total / width_px);
        run += at(i + reach) - at(i - reach + 1);
    }
}

void box_blur(lf::Image& img, double width_px) {
    if (width_px <= 1.0) return;
    lf::Image tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        box_blur_axis(&img.samples[static_cast<std::size_t>(y) * img.width],
                      &tmp.samples[static_cast<std::size_t>(y) * img.width],
                      img.width, 1, width_px);
    for (int x = 0; x < img.width; ++x)
        box_blur_axis(&tmp.samples[x], &img.samples[x], img.height, img.width,
                      width_px);
}

struct ProjectionGeometry {
    double delta_st, delta_uv;
    double i_img;        ///< conjugate plane of o, from H_cam
    double plane_ratio;  ///< (i_img - X) / (d - X)
    double img_to_scene; ///< y_scene = y_img * img_to_scene
};

ProjectionGeometry projection_geometry(const spc::SpcConfig& c, double o_mm) {
    if (!(o_mm > c.f_M))
        throw ModelError("synth_lightfield: target distance must exceed f_M");
    const auto g = spc::geometry(c);
    ProjectionGeometry pg;
    pg.delta_st = g.delta_st;
    pg.delta_uv = g.delta_uv;
    pg.i_img = optics::image_distance(c.f_M, o_mm);
    pg.plane_ratio = (pg.i_img - c.X) / (c.d - c.X);
    // Magnification m = -i/o maps scene to image; invert for image to scene.
    pg.img_to_scene = -o_mm / pg.i_img;
    return pg;
}

SynthResult synth_impl(const spc::SpcConfig& c, const Target& prerendered,
                       double o_mm, int views_x, int views_y, bool parallel) {
    c.validate();
    if (views_x < 1 || views_y < 1)
        throw ModelError("synth_lightfield: view counts must be >= 1");
    const ProjectionGeometry pg = projection_geometry(c, o_mm);
    // Each spatial sample integrates over the microlens footprint projected
    // onto the target plane.
    Target target = prerendered;
    const double footprint_mm =
        std::abs(pg.delta_st * pg.plane_ratio * pg.img_to_scene);
    const double raster_mm = target.physical_width_mm / target.image.width;
    box_blur(target.image, footprint_mm / raster_mm);

    SynthResult out;
    auto& field = out.lightfield;
    field = lf::LightField4D(c.micro_count.x, c.micro_count.y, views_x, views_y);
    field.delta_st_mm = pg.delta_st;
    field.delta_uv_mm = pg.delta_uv;

    const double need =
        required_pattern_halfwidth(c, o_mm, std::max(c.micro_count.x, c.micro_count.y),
                                   std::max(views_x, views_y));
    if (need > target.physical_width_mm / 2.0)
        throw ModelError("synth_lightfield: pattern does not cover the field of view at o");

    // Disparity induced between neighboring views, for the usable-range flag.
    const double induced =
        pg.delta_uv / pg.delta_st * (pg.i_img - c.d) / (pg.i_img - c.X);
    const double max_view_off = std::max(field.center_k, views_x - 1 - field.center_k);
    if (std::abs(induced) * max_view_off > field.i_n / 3.0)
        out.warnings.push_back("conjugate plane far from the MLA: view overlap below 2/3");

    const int i_c = field.i_n / 2;
    const int j_c = field.j_n / 2;

#pragma omp parallel for collapse(2) schedule(static) num_threads(thread_budget()) if (parallel)
    for (int k = 0; k < views_x; ++k) {
        for (int l = 0; l < views_y; ++l) {
            const double u = (k - field.center_k) * pg.delta_uv;
            const double v = (l - field.center_l) * pg.delta_uv;
            for (int j = 0; j < field.j_n; ++j) {
                const double t = (j - j_c) * pg.delta_st;
                const double y_img = v + (t - v) * pg.plane_ratio;
                const double y_scene = y_img * pg.img_to_scene;
                for (int i = 0; i < field.i_n; ++i) {
                    const double s = (i - i_c) * pg.delta_st;
                    const double x_img = u + (s - u) * pg.plane_ratio;
                    const double x_scene = x_img * pg.img_to_scene;
                    field.at(i, j, k, l) =
                        static_cast<float>(target.sample(x_scene, y_scene));
                }
            }
        }
    }
    return out;
}

}  // namespace

double required_pattern_halfwidth(const spc::SpcConfig& c, double o_mm,
                                  int spatial, int views) {
    const ProjectionGeometry pg = projection_geometry(c, o_mm);
    const double s_max = (spatial / 2 + 1) * pg.delta_st;
    const double u_max = (views / 2 + 1) * pg.delta_uv;
    double worst = 0.0;
    for (const double s : {-s_max, s_max})
        for (const double u : {-u_max, u_max}) {
            const double y_img = u + (s - u) * pg.plane_ratio;
            worst = std::max(worst, std::abs(y_img * pg.img_to_scene));
        }
    return worst;
}

SynthResult synth_lightfield(const spc::SpcConfig& c, const PatternSpec& p,
                             double o_mm, int views_x, int views_y) {
    return synth_impl(c, make_target(p), o_mm, views_x, views_y, true);
}

SynthResult synth_lightfield(const spc::SpcConfig& c, const Target& target,
                             double o_mm, int views_x, int views_y) {
    return synth_impl(c, target, o_mm, views_x, views_y, true);
}

double sample_footprint_mm(const spc::SpcConfig& c, double o_mm) {
    const ProjectionGeometry pg = projection_geometry(c, o_mm);
    return std::abs(pg.delta_st * pg.plane_ratio * pg.img_to_scene);
}

SynthResult synth_lightfield(const spc::SpcConfig& c, const PatternSpec& p,
                             double o_mm) {
    const auto m = spc::aligned_microimage_px(c);
    if (!m)
        throw ModelError(
            "synth_lightfield: view count defaults to the microimage size, which "
            "requires an aligned config");
    return synth_lightfield(c, p, o_mm, *m, *m);
}

namespace reference {
SynthResult synth_lightfield(const spc::SpcConfig& c, const PatternSpec& p,
                             double o_mm, int views_x, int views_y) {
    return synth_impl(c, make_target(p), o_mm, views_x, views_y, false);
}
}  // namespace reference

RawPair synth_raw(const spc::SpcConfig& c, const lf::LightField4D& field,
                  bool vignette) {
    const auto m = spc::aligned_microimage_px(c);
    if (!m || *m != field.k_n || *m != field.l_n ||
        field.i_n != c.micro_count.x || field.j_n != c.micro_count.y)
        throw ModelError("synth_raw: light field does not match the aligned config");

    RawPair out;
    out.raw = lf::interleave(field);
    out.white = lf::Image(out.raw.width, out.raw.height, 1.0f);
    if (vignette) {
        const double cx = (out.raw.width - 1) / 2.0;
        const double cy = (out.raw.height - 1) / 2.0;
        const double r0 = std::max(out.raw.width, out.raw.height) / 2.0;
        for (int y = 0; y < out.raw.height; ++y)
            for (int x = 0; x < out.raw.width; ++x) {
                const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (r0 * r0);
                const double falloff = 1.0 / ((1.0 + r2) * (1.0 + r2));  // cos^4
                out.raw.at(x, y) = static_cast<float>(out.raw.at(x, y) * falloff);
                out.white.at(x, y) = static_cast<float>(falloff);
            }
    }
    return out;
}

namespace {

/// Surfaces behind the stop as a standalone prescription, plus the z offset
/// of its first surface in the original frame.
struct RearGroup {
    optics::LensPrescription prescription;  // empty when the stop is last
    double z_offset = 0.0;
    double stop_gap = 0.0;  // stop plane -> first rear surface
};

RearGroup rear_group(const optics::LensPrescription& p) {
    RearGroup rg;
    const int last = static_cast<int>(p.surfaces.size()) - 1;
    if (p.stop_index >= last) return rg;
    rg.stop_gap = p.surfaces[p.stop_index].thickness_mm;
    rg.z_offset = p.surface_z(p.stop_index + 1);
    rg.prescription.name = p.name + " (rear group)";
    rg.prescription.ambient_index = p.surfaces[p.stop_index].ior_after;
    rg.prescription.surfaces.assign(p.surfaces.begin() + p.stop_index + 1,
                                    p.surfaces.end());
    rg.prescription.validate();
    return rg;
}

}  // namespace

MicGroundTruth mic_forward_trace(const optics::LensPrescription& p,
                                 const spc::SpcConfig& c, int rays_per_bundle,
                                 double fan_fraction) {
    if (rays_per_bundle < 8)
        throw ModelError("mic_forward_trace: need at least 8 rays per bundle");
    if (!(fan_fraction > 0.0) || fan_fraction > 1.0)
        throw ModelError("mic_forward_trace: fan fraction must be in (0, 1]");
    c.validate();
    const auto summary = optics::paraxial_summary(p);
    const double scale = std::abs(c.f_M);
    if (std::abs(summary.f_M - c.f_M) > 0.01 * scale ||
        std::abs(summary.X - c.X) > 0.01 * std::max(scale, std::abs(c.X)))
        throw ModelError("mic_forward_trace: prescription inconsistent with the config");

    MicGroundTruth gt;
    gt.stop_z_mm = summary.stop_z_mm;
    const double z_h_cam = summary.stop_z_mm + summary.h_cam;
    gt.mla_scene_z_mm = z_h_cam + c.d;
    gt.mla_cam_z_mm = gt.mla_scene_z_mm + c.mla_thickness;
    gt.sensor_z_mm = gt.mla_cam_z_mm + c.f_m;
    gt.exit_pupil_z_mm = summary.stop_z_mm + summary.exit_pupil_position;

    const RearGroup rg = rear_group(p);
    const bool has_rear = !rg.prescription.surfaces.empty();

    // Ray state at the MLA scene plane for a stop-center ray of slope u.
    const auto state_at_mla = [&](double u) -> std::optional<optics::Ray2D> {
        optics::Ray2D line{0.0, u, gt.stop_z_mm};
        if (has_rear) {
            const auto tr = optics::trace_meridional(rg.prescription,
                                                     {0.0, u, -rg.stop_gap});
            if (!tr.ok()) return std::nullopt;
            line = tr.states.back();
            line.z_mm += rg.z_offset;
        }
        return optics::Ray2D{line.height_at(gt.mla_scene_z_mm), line.slope,
                             gt.mla_scene_z_mm};
    };

    constexpr double kProbe = 1e-6;
    const auto probe = state_at_mla(kProbe);
    if (!probe || probe->height_mm == 0.0)
        throw ModelError("mic_forward_trace: cannot scale the fan (degenerate rear group)");
    const double coeff = probe->height_mm / kProbe;

    const int count = c.micro_count.x;
    const double span = count * c.d_ML / 2.0;
    const double u_max = fan_fraction * std::abs(span / coeff);
    const int n_rays = rays_per_bundle * count;

    struct Hit {
        int ml = -1;
        double y = 0.0;
    };
    std::vector<Hit> hits(n_rays);

#pragma omp parallel for schedule(static) num_threads(thread_budget())
    for (int r = 0; r < n_rays; ++r) {
        const double u = -u_max + (r + 0.5) * (2.0 * u_max / n_rays);
        const auto at_mla = state_at_mla(u);
        if (!at_mla) continue;
        const double y_mla = at_mla->height_mm;
        const double ml_real = y_mla / c.d_ML + (count - 1) / 2.0;
        const int ml = static_cast<int>(std::lround(ml_real));
        if (ml < 0 || ml >= count) continue;
        const double center = (ml - (count - 1) / 2.0) * c.d_ML;
        // Ideal thin-lens deflection relative to the microlens center; the
        // MLA thickness moves the ray axially but not in height.
        const double slope_out = at_mla->slope - (y_mla - center) / c.f_m;
        hits[r] = {ml, y_mla + slope_out * c.f_m};
    }

    std::vector<double> sum(count, 0.0), sum_sq(count, 0.0);
    std::vector<int> n(count, 0);
    for (const auto& h : hits) {
        if (h.ml < 0) continue;
        sum[h.ml] += h.y;
        sum_sq[h.ml] += h.y * h.y;
        n[h.ml]++;
    }
    for (int m = 0; m < count; ++m) {
        MicEntry e;
        e.ml_index = m;
        e.ml_center_mm = (m - (count - 1) / 2.0) * c.d_ML;
        e.hits = n[m];
        if (n[m] > 0) {
            e.mic_mm = sum[m] / n[m];
            e.variance_mm2 = std::max(0.0, sum_sq[m] / n[m] - e.mic_mm * e.mic_mm);
        } else {
            e.mic_mm = kNan;
            e.variance_mm2 = kNan;
        }
        gt.entries.push_back(e);
    }
    return gt;
}

std::vector<optics::Ray2D> mic_backtrace(const MicGroundTruth& g,
                                         const spc::SpcConfig& c) {
    if (g.entries.empty())
        throw ModelError("mic_backtrace: empty ground truth");
    std::vector<optics::Ray2D> rays;
    for (const auto& e : g.entries) {
        if (e.hits == 0) continue;
        double offset = e.mic_mm - e.ml_center_mm;
        // The on-axis microlens images the aperture center onto itself; its
        // chief ray is the axis and carries no direction. Snap the numerical
        // residue to an exactly parallel ray so the axis statistics exclude it.
        if (std::abs(offset) <= 1e-12 * std::max(c.d_ML, std::abs(e.ml_center_mm)))
            offset = 0.0;
        rays.push_back({e.ml_center_mm, offset / c.f_m, g.mla_scene_z_mm});
    }
    return rays;
}

}  // namespace pupilfield::synth

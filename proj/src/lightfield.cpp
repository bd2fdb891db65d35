#include "pupilfield/lightfield.hpp"

#include <algorithm>
#include <cmath>

#include "pupilfield/runtime.hpp"

namespace pupilfield::lf {

namespace {

/// Crop window of the spatial grid where every view has full interpolation
/// support for the given shift. Returns false when the overlap is empty.
struct CropWindow {
    int lo_i = 0, hi_i = -1, lo_j = 0, hi_j = -1;
    int width() const { return hi_i - lo_i + 1; }
    int height() const { return hi_j - lo_j + 1; }
};

bool crop_window(const LightField4D& lf, double shift_px, CropWindow& w) {
    double min_off_k = 0.0, max_off_k = 0.0, min_off_l = 0.0, max_off_l = 0.0;
    for (int k = 0; k < lf.k_n; ++k) {
        const double off = shift_px * (k - lf.center_k);
        min_off_k = std::min(min_off_k, off);
        max_off_k = std::max(max_off_k, off);
    }
    for (int l = 0; l < lf.l_n; ++l) {
        const double off = shift_px * (l - lf.center_l);
        min_off_l = std::min(min_off_l, off);
        max_off_l = std::max(max_off_l, off);
    }
    // Sample position i + off must stay in [0, i_n - 1] for linear
    // interpolation support.
    w.lo_i = static_cast<int>(std::ceil(-min_off_k));
    w.hi_i = static_cast<int>(std::floor(lf.i_n - 1 - max_off_k));
    w.lo_j = static_cast<int>(std::ceil(-min_off_l));
    w.hi_j = static_cast<int>(std::floor(lf.j_n - 1 - max_off_l));
    return w.width() > 0 && w.height() > 0;
}

/// Separable cubic B-spline sampling of view (k,l). The kernel's variance is
/// 1/3 at every sampling phase (and its higher moments barely move), unlike
/// linear interpolation whose phase-dependent attenuation makes integer
/// shifts look sharper and biases the focus line search. Used for scoring
/// only.
inline double sample_view_bspline(const LightField4D& lf, int k, int l, double x,
                                  double y) {
    const int x1 = static_cast<int>(std::floor(x));
    const int y1 = static_cast<int>(std::floor(y));
    const double tx = x - x1;
    const double ty = y - y1;
    const auto weights = [](double t, double w[4]) {
        const double t2 = t * t, t3 = t2 * t;
        w[0] = (1.0 - 3.0 * t + 3.0 * t2 - t3) / 6.0;
        w[1] = (4.0 - 6.0 * t2 + 3.0 * t3) / 6.0;
        w[2] = (1.0 + 3.0 * t + 3.0 * t2 - 3.0 * t3) / 6.0;
        w[3] = t3 / 6.0;
    };
    double wx[4], wy[4];
    weights(tx, wx);
    weights(ty, wy);
    const auto clampi = [](int v, int n) { return std::clamp(v, 0, n - 1); };
    double acc = 0.0;
    for (int dy = 0; dy < 4; ++dy) {
        const int yy = clampi(y1 - 1 + dy, lf.j_n);
        double row = 0.0;
        for (int dx = 0; dx < 4; ++dx)
            row += wx[dx] * lf.at(clampi(x1 - 1 + dx, lf.i_n), yy, k, l);
        acc += wy[dy] * row;
    }
    return acc;
}

/// Separable linear interpolation of view (k,l) at fractional (x, y).
/// The caller guarantees support.
inline double sample_view(const LightField4D& lf, int k, int l, double x, double y) {
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const double fx = x - x0;
    const double fy = y - y0;
    const int x1 = fx > 0.0 ? x0 + 1 : x0;
    const int y1 = fy > 0.0 ? y0 + 1 : y0;
    const double v00 = lf.at(x0, y0, k, l);
    const double v10 = lf.at(x1, y0, k, l);
    const double v01 = lf.at(x0, y1, k, l);
    const double v11 = lf.at(x1, y1, k, l);
    const double top = v00 * (1.0 - fx) + v10 * fx;
    const double bot = v01 * (1.0 - fx) + v11 * fx;
    return top * (1.0 - fy) + bot * fy;
}

RefocusResult refocus_impl(const LightField4D& lf, double shift_px, bool parallel) {
    CropWindow w;
    if (!crop_window(lf, shift_px, w) || w.width() < 8 || w.height() < 8)
        throw ModelError("refocus: shifted views leave less than 8x8 overlap");

    RefocusResult out;
    out.origin_i = w.lo_i;
    out.origin_j = w.lo_j;
    out.image = Image(w.width(), w.height());
    const double inv_views = 1.0 / (static_cast<double>(lf.k_n) * lf.l_n);

#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (parallel)
    for (int j = 0; j < w.height(); ++j) {
        for (int i = 0; i < w.width(); ++i) {
            double acc = 0.0;
            for (int k = 0; k < lf.k_n; ++k) {
                const double x = (w.lo_i + i) + shift_px * (k - lf.center_k);
                for (int l = 0; l < lf.l_n; ++l) {
                    const double y = (w.lo_j + j) + shift_px * (l - lf.center_l);
                    acc += sample_view(lf, k, l, x, y);
                }
            }
            out.image.at(i, j) = static_cast<float>(acc * inv_views);
        }
    }
    return out;
}

double focus_measure_impl(const Image& img, bool parallel) {
    if (img.width < 3 || img.height < 3)
        throw ModelError("focus_measure: image must be at least 3x3");
    const int w = img.width, h = img.height;
    const std::size_t n = static_cast<std::size_t>(w - 2) * (h - 2);

    // Deterministic reduction: per-row partial sums combined serially.
    std::vector<double> row_sum(h - 2, 0.0), row_sum_sq(h - 2, 0.0);
#pragma omp parallel for schedule(static) num_threads(thread_budget()) if (parallel)
    for (int j = 1; j < h - 1; ++j) {
        double s = 0.0, s2 = 0.0;
        for (int i = 1; i < w - 1; ++i) {
            const double r = -4.0 * img.at(i, j) + img.at(i - 1, j) +
                             img.at(i + 1, j) + img.at(i, j - 1) + img.at(i, j + 1);
            s += r;
            s2 += r * r;
        }
        row_sum[j - 1] = s;
        row_sum_sq[j - 1] = s2;
    }
    double sum = 0.0, sum_sq = 0.0;
    for (int j = 0; j < h - 2; ++j) {
        sum += row_sum[j];
        sum_sq += row_sum_sq[j];
    }
    const double mean = sum / static_cast<double>(n);
    return std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
}

}  // namespace

Image LightField4D::view(int k, int l) const {
    Image img(i_n, j_n);
    const std::size_t base = index(0, 0, k, l);
    std::copy_n(samples.begin() + base, static_cast<std::size_t>(i_n) * j_n,
                img.samples.begin());
    return img;
}

float LightField4D::metric_sample(double s, double t, double u, double v) const {
    const double fi = s / delta_st_mm;
    const double fj = t / delta_st_mm;
    const double fk = u / delta_uv_mm;
    const double fl = v / delta_uv_mm;
    const auto snap = [](double x) -> double {
        const double r = std::round(x);
        return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
    };
    const double ci = snap(fi), cj = snap(fj), ck = snap(fk), cl = snap(fl);

    // Multilinear over the 4D cell containing the point.
    double acc = 0.0;
    const int i0 = static_cast<int>(std::floor(ci));
    const int j0 = static_cast<int>(std::floor(cj));
    const int k0 = static_cast<int>(std::floor(ck));
    const int l0 = static_cast<int>(std::floor(cl));
    for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
            for (int dk = 0; dk < 2; ++dk)
                for (int dl = 0; dl < 2; ++dl) {
                    const double wgt = (di ? ci - i0 : 1.0 - (ci - i0)) *
                                       (dj ? cj - j0 : 1.0 - (cj - j0)) *
                                       (dk ? ck - k0 : 1.0 - (ck - k0)) *
                                       (dl ? cl - l0 : 1.0 - (cl - l0));
                    if (wgt == 0.0) continue;
                    const int i = i0 + di, j = j0 + dj, k = k0 + dk, l = l0 + dl;
                    if (i < 0 || i >= i_n || j < 0 || j >= j_n || k < 0 ||
                        k >= k_n || l < 0 || l >= l_n)
                        throw ModelError("metric_sample: coordinate outside the light field");
                    acc += wgt * at(i, j, k, l);
                }
    return static_cast<float>(acc);
}

DevignetteResult devignette(const Image& raw, const Image& white, float eps) {
    if (!raw.same_dims(white))
        throw ModelError("devignette: raw and white dimensions differ");
    DevignetteResult out;
    out.image = Image(raw.width, raw.height);
    out.mask.assign(raw.samples.size(), 0);
    for (std::size_t p = 0; p < raw.samples.size(); ++p) {
        if (white.samples[p] <= eps) {
            out.mask[p] = 1;
            out.masked_count++;
        } else {
            out.image.samples[p] = raw.samples[p] / white.samples[p];
        }
    }
    return out;
}

LightField4D decode(const Image& raw, const spc::SpcConfig& c) {
    const auto m = spc::aligned_microimage_px(c);
    if (!m)
        throw ModelError(
            "decode: MIC pitch is not an integer pixel multiple; run design_spc "
            "to align the configuration");
    const int mi = *m;
    if (raw.width != c.micro_count.x * mi || raw.height != c.micro_count.y * mi)
        throw ModelError("decode: raw dimensions do not match micro_count x microimage size");

    LightField4D lf(c.micro_count.x, c.micro_count.y, mi, mi);
    const auto g = spc::geometry(c);
    lf.delta_st_mm = g.delta_st;
    lf.delta_uv_mm = g.delta_uv;
    for (int k = 0; k < mi; ++k)
        for (int l = 0; l < mi; ++l)
            for (int j = 0; j < lf.j_n; ++j)
                for (int i = 0; i < lf.i_n; ++i)
                    lf.at(i, j, k, l) = raw.at(i * mi + k, j * mi + l);
    return lf;
}

Image interleave(const LightField4D& lf) {
    if (lf.k_n != lf.l_n)
        throw ModelError("interleave: non-square view grid cannot form a raw mosaic");
    const int m = lf.k_n;
    Image raw(lf.i_n * m, lf.j_n * m);
    for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l)
            for (int j = 0; j < lf.j_n; ++j)
                for (int i = 0; i < lf.i_n; ++i)
                    raw.at(i * m + k, j * m + l) = lf.at(i, j, k, l);
    return raw;
}

RefocusResult refocus(const LightField4D& lf, double shift_px) {
    return refocus_impl(lf, shift_px, true);
}

double focus_measure(const Image& img) { return focus_measure_impl(img, true); }

namespace reference {
RefocusResult refocus(const LightField4D& lf, double shift_px) {
    return refocus_impl(lf, shift_px, false);
}
double focus_measure(const Image& img) { return focus_measure_impl(img, false); }
}  // namespace reference

FocusReport best_shift(const LightField4D& lf, double s_min_px, double s_max_px,
                       const LineSearchParams& params) {
    if (!(s_min_px < s_max_px))
        throw ModelError("best_shift: s_min must be < s_max");

    // Score every candidate on the crop window shared by the whole range so
    // the profile is continuous in s (per-shift crops jump at integer
    // support boundaries and bias the peak).
    CropWindow wa, wb;
    if (!crop_window(lf, s_min_px, wa) || !crop_window(lf, s_max_px, wb))
        throw ModelError("best_shift: no shift in range leaves enough overlap");
    CropWindow common{std::max(wa.lo_i, wb.lo_i), std::min(wa.hi_i, wb.hi_i),
                      std::max(wa.lo_j, wb.lo_j), std::min(wa.hi_j, wb.hi_j)};
    if (common.width() < 8 || common.height() < 8)
        throw ModelError("best_shift: no shift in range leaves enough overlap");

    const double inv_views = 1.0 / (static_cast<double>(lf.k_n) * lf.l_n);
    const auto evaluate = [&](double s) -> double {
        Image img(common.width(), common.height());
#pragma omp parallel for schedule(static) num_threads(thread_budget())
        for (int j = 0; j < common.height(); ++j) {
            for (int i = 0; i < common.width(); ++i) {
                double acc = 0.0;
                for (int k = 0; k < lf.k_n; ++k) {
                    const double x = (common.lo_i + i) + s * (k - lf.center_k);
                    for (int l = 0; l < lf.l_n; ++l) {
                        const double y = (common.lo_j + j) + s * (l - lf.center_l);
                        acc += sample_view_bspline(lf, k, l, x, y);
                    }
                }
                img.at(i, j) = static_cast<float>(acc * inv_views);
            }
        }
        return focus_measure(img);
    };

    std::vector<double> shifts, scores;
    for (double s = s_min_px; s <= s_max_px + 1e-12; s += params.coarse_step_px) {
        shifts.push_back(s);
        scores.push_back(evaluate(s));
    }

    std::size_t best = 0;
    double lo_score = scores[0], hi_score = scores[0];
    for (std::size_t idx = 1; idx < scores.size(); ++idx) {
        if (scores[idx] > scores[best]) best = idx;
        lo_score = std::min(lo_score, scores[idx]);
        hi_score = std::max(hi_score, scores[idx]);
    }

    FocusReport report;
    if (hi_score - lo_score <= 1e-12 * std::max(1.0, hi_score)) {
        report.flag = FocusSearchFlag::ambiguous;
    } else {
        // Count comparable local maxima in the coarse profile.
        int peaks = 0;
        const double level = lo_score + 0.2 * (hi_score - lo_score);
        for (std::size_t idx = 1; idx + 1 < scores.size(); ++idx)
            if (scores[idx] > scores[idx - 1] && scores[idx] >= scores[idx + 1] &&
                scores[idx] >= level)
                peaks++;
        if (peaks > 1) report.flag = FocusSearchFlag::multimodal;
    }

    // Fine scan one coarse step around the best sample.
    double s_best = shifts[best];
    double f_best = scores[best];
    const double fine_lo = std::max(s_min_px, s_best - params.coarse_step_px);
    const double fine_hi = std::min(s_max_px, s_best + params.coarse_step_px);
    for (double s = fine_lo; s <= fine_hi + 1e-12; s += params.fine_step_px) {
        const double f = evaluate(s);
        if (f > f_best) {
            s_best = s;
            f_best = f;
        }
    }

    // Parabolic polish on the fine triple when it brackets the peak.
    {
        const double a = s_best - params.fine_step_px;
        const double b = s_best + params.fine_step_px;
        if (a >= s_min_px && b <= s_max_px) {
            const double fa = evaluate(a);
            const double fb = evaluate(b);
            const double denom = fa - 2.0 * f_best + fb;
            if (denom < 0.0) {
                const double vertex =
                    s_best + 0.5 * params.fine_step_px * (fa - fb) / denom;
                if (vertex > a && vertex < b) {
                    const double fv = evaluate(vertex);
                    if (fv >= f_best) {
                        s_best = vertex;
                        f_best = fv;
                    }
                }
            }
        }
    }

    report.shift_px = s_best;
    report.score = f_best;
    report.refocused = refocus(lf, s_best);
    return report;
}

}  // namespace pupilfield::lf

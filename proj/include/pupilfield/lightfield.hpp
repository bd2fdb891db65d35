#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pupilfield/spc.hpp"

namespace pupilfield::lf {

using spc::ModelError;

/// Scalar intensity grid, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> samples;

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int x, int y) { return samples[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
    bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
};

/// Integer-indexed 4D light field L(i,j,k,l): (k,l) selects the sub-aperture
/// view, (i,j) the spatial sample. Samples are stored [k][l][i][j] row-major
/// (one contiguous view image per (k,l)), matching the LF4D container.
struct LightField4D {
    int i_n = 0, j_n = 0;  ///< spatial resolution (columns, rows)
    int k_n = 0, l_n = 0;  ///< view grid (columns, rows)
    int center_k = 0, center_l = 0;  ///< the MIC view
    double delta_st_mm = 0.0;
    double delta_uv_mm = 0.0;
    std::vector<float> samples;

    LightField4D() = default;
    LightField4D(int in, int jn, int kn, int ln)
        : i_n(in), j_n(jn), k_n(kn), l_n(ln), center_k(kn / 2), center_l(ln / 2),
          samples(static_cast<std::size_t>(in) * jn * kn * ln, 0.0f) {}

    std::size_t index(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(k) * l_n + l) * j_n + j) * i_n + i;
    }
    float& at(int i, int j, int k, int l) { return samples[index(i, j, k, l)]; }
    float at(int i, int j, int k, int l) const { return samples[index(i, j, k, l)]; }

    /// View (k,l) copied out as an image.
    Image view(int k, int l) const;

    /// Metric lookup L~(s,t,u,v) = L(s/D_ST, t/D_ST, u/D_UV, v/D_UV):
    /// exact integer indexing for lattice-aligned coordinates (within 1e-9
    /// of a lattice point), separable linear interpolation otherwise.
    float metric_sample(double s, double t, double u, double v) const;
};

struct DevignetteResult {
    Image image;
    /// 1 where the white image was below threshold and the pixel was zeroed.
    std::vector<std::uint8_t> mask;
    int masked_count = 0;
};

/// Refocused image plus the crop offset of its origin inside the original
/// spatial grid.
struct RefocusResult {
    Image image;
    int origin_i = 0;
    int origin_j = 0;
};

enum class FocusSearchFlag { none, ambiguous, multimodal };

struct FocusReport {
    double shift_px = 0.0;
    double score = 0.0;  ///< variance of the Laplacian of the refocused image
    RefocusResult refocused;
    FocusSearchFlag flag = FocusSearchFlag::none;
};

struct LineSearchParams {
    double coarse_step_px = 0.05;
    double fine_step_px = 0.005;
};

/// Per-pixel raw/white normalization. Pixels whose white value is <= eps are
/// zeroed and recorded in the mask.
DevignetteResult devignette(const Image& raw, const Image& white,
                            float eps = 1e-6f);

/// De-multiplexes an aligned raw mosaic into the 4D light field: microimage
/// (i,j) occupies the m x m pixel block at (i*m, j*m) with m = d_MLI/s_px.
/// Refuses misaligned configs (run design_spc to align the MIC pitch).
LightField4D decode(const Image& raw, const spc::SpcConfig& c);

/// Inverse of decode: interleaves the views back into the raw mosaic.
Image interleave(const LightField4D& lf);

/// Shift-and-sum refocusing: view (k,l) is sampled at
/// (i + S*(k - center_k), j + S*(l - center_l)) with separable linear
/// interpolation and the views averaged. Border pixels lacking full support
/// are cropped. Requires at least 8x8 valid overlap.
RefocusResult refocus(const LightField4D& lf, double shift_px);

/// Variance of the 3x3 Laplacian response (center -4, edge neighbors 1,
/// corners 0), interior pixels only.
double focus_measure(const Image& img);

/// Line search for the sharpest refocusing shift: coarse scan, then a fine
/// scan plus parabolic polish around the best sample. Flat profiles are
/// flagged ambiguous, profiles with several comparable peaks multimodal.
FocusReport best_shift(const LightField4D& lf, double s_min_px, double s_max_px,
                       const LineSearchParams& params = {});

/// Serial reference implementations of the parallel kernels, kept for
/// equivalence testing and benchmarking.
namespace reference {
RefocusResult refocus(const LightField4D& lf, double shift_px);
double focus_measure(const Image& img);
}  // namespace reference

}  // namespace pupilfield::lf

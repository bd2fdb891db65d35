#include "pupilfield/error_models.hpp"

#include <cmath>
#include <limits>

namespace pupilfield::error_models {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool at_focus(const spc::SpcConfig& c, double o_mm) {
    return !c.infinite_focus() && o_mm == c.o_f;
}

void append_flag(std::string& flags, const std::string& token) {
    if (!flags.empty()) flags += ';';
    flags += token;
}

}  // namespace

FlaggedError shift_error(const spc::SpcConfig& c, double o_mm) {
    if (c.X == 0.0) return {0.0, ErrorFlag::none};  // exact: S~ == S identically
    if (at_focus(c, o_mm)) return {0.0, ErrorFlag::continuity};
    const double s = spc::shift_from_distance(c, o_mm, spc::ShiftModel::exit_pupil);
    if (s == 0.0) return {0.0, ErrorFlag::continuity};
    const double s_naive = spc::shift_from_distance(c, o_mm, spc::ShiftModel::naive);
    return {(s_naive - s) / s, ErrorFlag::none};
}

FlaggedError distance_error_naive_model(const spc::SpcConfig& c, double o_mm) {
    if (c.X == 0.0) return {0.0, ErrorFlag::none};
    if (at_focus(c, o_mm)) return {0.0, ErrorFlag::continuity};
    const double s = spc::shift_from_distance(c, o_mm, spc::ShiftModel::exit_pupil);
    const auto o_naive = spc::distance_from_shift(c, s, spc::ShiftModel::naive);
    if (o_naive.flag == spc::DistanceFlag::maps_to_infinity)
        return {kNan, ErrorFlag::pole};
    return {(o_naive.o_mm - o_mm) / o_mm, ErrorFlag::none};
}

FlaggedError distance_error_naive_shift(const spc::SpcConfig& c, double o_mm) {
    if (c.X == 0.0) return {0.0, ErrorFlag::none};
    if (at_focus(c, o_mm)) return {0.0, ErrorFlag::continuity};
    const double s_naive = spc::shift_from_distance(c, o_mm, spc::ShiftModel::naive);
    const auto o_back = spc::distance_from_shift(c, s_naive, spc::ShiftModel::exit_pupil);
    if (o_back.flag == spc::DistanceFlag::maps_to_infinity)
        return {kNan, ErrorFlag::pole};
    return {(o_back.o_mm - o_mm) / o_mm, ErrorFlag::none};
}

double shift_error_lambda(const spc::SpcConfig& c, double lambda) {
    if (c.infinite_focus())
        throw spc::ModelError("lambda form requires a finite focus distance");
    return c.X * (lambda - 1.0) / (lambda * c.o_f * (c.X / c.d - 1.0));
}

double distance_error_naive_model_lambda(const spc::SpcConfig& c, double lambda) {
    if (c.infinite_focus())
        throw spc::ModelError("lambda form requires a finite focus distance");
    const double dl = lambda - 1.0;
    return c.X * dl * dl /
           (lambda * c.o_f * (1.0 - c.X / c.d) - c.X * dl * lambda);
}

double distance_error_naive_shift_lambda(const spc::SpcConfig& c, double lambda) {
    if (c.infinite_focus())
        throw spc::ModelError("lambda form requires a finite focus distance");
    const double dl = lambda - 1.0;
    return c.X * dl * dl /
           (lambda * c.o_f * (c.X / c.f_M - 1.0) - lambda * lambda * c.X);
}

std::vector<ErrorRecord> error_sweep(const spc::SpcConfig& c,
                                     const std::vector<double>& lambdas) {
    c.validate();
    const double o_f = c.o_f_finite();
    std::vector<ErrorRecord> records;
    records.reserve(lambdas.size());
    for (const double lambda : lambdas) {
        ErrorRecord rec;
        rec.lambda = lambda;
        rec.o_mm = lambda * o_f;
        if (!(rec.o_mm > c.f_M)) {
            rec.e_shift = rec.e_dist_naive_model = rec.e_dist_naive_shift = kNan;
            append_flag(rec.flags, "below_focal_length");
            records.push_back(rec);
            continue;
        }
        const auto es = shift_error(c, rec.o_mm);
        const auto em = distance_error_naive_model(c, rec.o_mm);
        const auto eo = distance_error_naive_shift(c, rec.o_mm);
        rec.e_shift = es.value;
        rec.e_dist_naive_model = em.value;
        rec.e_dist_naive_shift = eo.value;
        if (es.flag == ErrorFlag::continuity || em.flag == ErrorFlag::continuity ||
            eo.flag == ErrorFlag::continuity)
            append_flag(rec.flags, "continuity");
        if (es.flag == ErrorFlag::pole) append_flag(rec.flags, "pole_shift");
        if (em.flag == ErrorFlag::pole) append_flag(rec.flags, "pole_naive_model");
        if (eo.flag == ErrorFlag::pole) append_flag(rec.flags, "pole_naive_shift");
        records.push_back(rec);
    }
    return records;
}

}  // namespace pupilfield::error_models

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pupilfield/error_models.hpp"
#include "pupilfield/experiments.hpp"
#include "pupilfield/io.hpp"
#include "pupilfield/lensdb.hpp"
#include "pupilfield/lightfield.hpp"
#include "pupilfield/optics.hpp"
#include "pupilfield/spc.hpp"
#include "pupilfield/svg.hpp"
#include "pupilfield/synth.hpp"

namespace fs = std::filesystem;
using namespace pupilfield;

namespace {

constexpr const char* kVersion = "pupilfield 0.1.0";

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitDomain = 4;

struct RunContext {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::vector<std::string> overrides;
    std::string out_dir = "pupilfield-out";
    bool svg = false;

    void finish() const {
        io::RunManifest m;
        m.subcommand = subcommand;
        m.inputs = inputs;
        m.overrides = overrides;
        m.out_dir = out_dir;
        m.tool_version = kVersion;
        m.input_hash = io::hash_inputs(inputs);
        io::write_manifest(m);
    }

    std::string path(const std::string& file) const {
        return (fs::path(out_dir) / file).string();
    }
};

double parse_focus(const std::string& text) {
    if (text == "inf") return spc::kInfiniteFocus;
    return std::stod(text);
}

spc::Vec2i parse_pair(const std::string& text, char sep) {
    const auto pos = text.find(sep);
    if (pos == std::string::npos)
        throw io::IoError("expected a pair like 1024" + std::string(1, sep) + "768");
    return {std::stoi(text.substr(0, pos)), std::stoi(text.substr(pos + 1))};
}

synth::PatternSpec parse_pattern(const std::string& text) {
    synth::PatternSpec p;
    if (text.rfind("star", 0) == 0) {
        p.kind = synth::PatternKind::siemens_star;
        const auto pos = text.find(':');
        if (pos != std::string::npos) p.spokes = std::stoi(text.substr(pos + 1));
    } else if (text.rfind("checker", 0) == 0) {
        p.kind = synth::PatternKind::checkerboard;
        const auto pos = text.find(':');
        if (pos != std::string::npos) p.period_px = std::stod(text.substr(pos + 1));
    } else if (text == "const") {
        p.kind = synth::PatternKind::constant;
    } else {
        throw io::IoError("unknown pattern '" + text + "' (star:N, checker:P, const)");
    }
    return p;
}

/// A prescription file or a summary file, told apart by their fields.
optics::ParaxialSummary load_summary_or_prescription(const std::string& path) {
    const std::string text = io::read_file(path);
    if (text.find("\"surfaces\"") != std::string::npos) {
        const auto p = io::parse_prescription(text);
        return optics::paraxial_summary(p);
    }
    return io::parse_summary(text);
}

void print_geometry(const spc::SpcConfig& c) {
    const auto g = spc::geometry(c);
    std::printf("F                  %s mm\n", io::format_double(g.F).c_str());
    std::printf("Delta_ST           %s mm\n", io::format_double(g.delta_st).c_str());
    std::printf("Delta_UV           %s mm\n", io::format_double(g.delta_uv).c_str());
    std::printf("Delta              %s\n", io::format_double(g.delta).c_str());
    std::printf("Delta (X=0)        %s\n", io::format_double(g.delta_naive).c_str());
    std::printf("d_MLI              %s mm\n", io::format_double(g.d_mli).c_str());
    std::printf("M_proj (exit pupil) %s\n", io::format_double(g.m_proj_correct).c_str());
    std::printf("M_proj (naive)      %s\n", io::format_double(g.m_proj_naive).c_str());
}

std::string geometry_csv(const spc::SpcConfig& c) {
    const auto g = spc::geometry(c);
    const auto orig = spc::pertuz_params(c, spc::PertuzVariant::original);
    const auto corr = spc::pertuz_params(c, spc::PertuzVariant::corrected);
    std::string out =
        "F_mm,delta_st_mm,delta_uv_mm,delta,delta_naive,d_mli_mm,m_proj_correct,"
        "m_proj_naive,a0_original,a1_original,a0_corrected,a1_corrected\n";
    out += io::format_double(g.F) + "," + io::format_double(g.delta_st) + "," +
           io::format_double(g.delta_uv) + "," + io::format_double(g.delta) + "," +
           io::format_double(g.delta_naive) + "," + io::format_double(g.d_mli) + "," +
           io::format_double(g.m_proj_correct) + "," +
           io::format_double(g.m_proj_naive) + "," + io::format_double(orig.a0) + "," +
           io::format_double(orig.a1) + "," + io::format_double(corr.a0) + "," +
           io::format_double(corr.a1) + "\n";
    return out;
}

std::vector<double> default_lambdas() {
    std::vector<double> l;
    for (double v = 0.25; v <= 4.0 + 1e-12; v += 0.25) l.push_back(v);
    return l;
}

void write_sweep_svg(const RunContext& ctx, const spc::SpcConfig& c,
                     const std::vector<experiments::SweepRecord>& records) {
    svg::Plot plot;
    plot.title = "Refocusing shift versus distance";
    plot.x_label = "o (mm)";
    plot.y_label = "S (px)";
    svg::Series model, measured;
    model.color = "#1f77b4";
    measured.color = "#d62728";
    measured.line = false;
    measured.markers = true;
    if (!records.empty()) {
        const double lo = records.front().o_mm, hi = records.back().o_mm;
        for (int i = 0; i <= 200; ++i) {
            const double o = lo + (hi - lo) * i / 200.0;
            model.x.push_back(o);
            model.y.push_back(spc::shift_from_distance(c, o, spc::ShiftModel::exit_pupil));
        }
    }
    for (const auto& r : records) {
        measured.x.push_back(r.o_mm);
        measured.y.push_back(r.s_measured);
    }
    plot.series = {model, measured};
    io::write_file(ctx.path("sweep_shift.svg"), svg::render(plot));
}

void write_error_svg(const RunContext& ctx,
                     const std::vector<error_models::ErrorRecord>& records) {
    svg::Plot plot;
    plot.title = "Relative errors versus lambda";
    plot.x_label = "lambda";
    plot.y_label = "relative error";
    svg::Series e1, e2, e3;
    e1.color = "#1f77b4";
    e2.color = "#d62728";
    e3.color = "#2ca02c";
    for (const auto& r : records) {
        e1.x.push_back(r.lambda);
        e1.y.push_back(r.e_shift);
        e2.x.push_back(r.lambda);
        e2.y.push_back(r.e_dist_naive_model);
        e3.x.push_back(r.lambda);
        e3.y.push_back(r.e_dist_naive_shift);
    }
    plot.series = {e1, e2, e3};
    io::write_file(ctx.path("sweep_errors.svg"), svg::render(plot));
}

void write_db_svg(const RunContext& ctx, const lensdb::CollectionResult& coll,
                  const lensdb::RegressionReport& rep) {
    svg::Plot plot;
    plot.title = "Exit pupil offset X over focal length";
    plot.x_label = "f_M (mm)";
    plot.y_label = "X (mm)";
    plot.log_x = true;
    svg::Series points, fit;
    points.line = false;
    points.markers = true;
    points.color = "#d62728";
    double lo = 1e300, hi = -1e300;
    for (const auto& r : coll.records) {
        points.x.push_back(r.f_M);
        points.y.push_back(r.X);
        lo = std::min(lo, r.f_M);
        hi = std::max(hi, r.f_M);
    }
    fit.color = "#000000";
    for (int i = 0; i <= 100; ++i) {
        const double f = lo + (hi - lo) * i / 100.0;
        fit.x.push_back(f);
        fit.y.push_back(rep.slope * f + rep.intercept);
    }
    plot.series = {fit, points};
    io::write_file(ctx.path("db_stats.svg"), svg::render(plot));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Plenoptic-camera exit-pupil modeling toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    RunContext ctx;
    for (int i = 1; i < argc; ++i) ctx.overrides.emplace_back(argv[i]);

    int rc = 0;
    const auto guard = [&](const std::string& name, auto&& body) {
        return [&ctx, name, body, &rc]() {
            ctx.subcommand = name;
            try {
                body();
                ctx.finish();
            } catch (const io::IoError& e) {
                std::cerr << "input error: " << e.what() << "\n";
                rc = kExitParse;
            } catch (const spc::DesignError& e) {
                std::cerr << "domain error: " << e.what() << " (closest d_MLI "
                          << io::format_double(e.closest_d_mli_mm) << " mm)\n";
                rc = kExitDomain;
            } catch (const std::runtime_error& e) {
                std::cerr << "domain error: " << e.what() << "\n";
                rc = kExitDomain;
            }
        };
    };

    // --- lens ---------------------------------------------------------------
    auto* lens = app.add_subcommand("lens", "Prescription analysis");
    {
        auto* summarize = lens->add_subcommand("summarize", "Paraxial summary of a prescription");
        auto path = std::make_shared<std::string>();
        summarize->add_option("prescription", *path, "prescription JSON")->required();
        summarize->add_option("--out", ctx.out_dir, "output directory");
        summarize->callback(guard("lens summarize", [&ctx, path]() {
            ctx.inputs = {*path};
            const auto p = io::load_prescription(*path);
            const auto s = optics::paraxial_summary(p);
            std::printf("f_M                %s mm\n", io::format_double(s.f_M).c_str());
            std::printf("H_scene (from stop) %s mm\n", io::format_double(s.h_scene).c_str());
            std::printf("H_cam   (from stop) %s mm\n", io::format_double(s.h_cam).c_str());
            std::printf("exit pupil position %s mm\n",
                        io::format_double(s.exit_pupil_position).c_str());
            std::printf("exit pupil radius   %s mm\n",
                        io::format_double(s.exit_pupil_radius).c_str());
            std::printf("X                  %s mm\n", io::format_double(s.X).c_str());
            for (const auto& w : s.warnings) std::printf("warning: %s\n", w.c_str());
            io::write_file(ctx.path("summary.json"), io::serialize_summary(s));
        }));

        auto* db = lens->add_subcommand("db-stats", "Batch paraxial statistics of a directory");
        auto dir = std::make_shared<std::string>();
        db->add_option("directory", *dir, "directory of prescription JSONs")->required();
        db->add_option("--out", ctx.out_dir, "output directory");
        db->add_flag("--svg", ctx.svg, "emit an SVG scatter plot");
        db->callback(guard("lens db-stats", [&ctx, dir]() {
            ctx.inputs = {};
            const auto coll = lensdb::analyze_collection(*dir);
            const auto rep = lensdb::regression(coll.records);
            std::printf("n=%d slope=%s intercept=%s mm r=%s R^2=%s\n", rep.n,
                        io::format_double(rep.slope).c_str(),
                        io::format_double(rep.intercept).c_str(),
                        io::format_double(rep.pearson_r).c_str(),
                        io::format_double(rep.r_squared).c_str());
            std::printf("census: |X|<0.05f_M: %d, |X|>0.25f_M: %d, |X|>0.5f_M: %d\n",
                        rep.census_below_5pct, rep.census_above_25pct,
                        rep.census_above_50pct);
            io::write_file(ctx.path("db_stats.csv"), io::serialize_lens_stats(coll, rep));
            if (ctx.svg) write_db_svg(ctx, coll, rep);
        }));
    }

    // --- spc ----------------------------------------------------------------
    auto* spc_cmd = app.add_subcommand("spc", "Camera configuration");
    {
        auto* design = spc_cmd->add_subcommand("design", "Derive an SPC from main-lens optics");
        struct DesignArgs {
            std::string source, focus, sensor, micro;
            double pixel = 0.0;
            double ml_pitch = 0.0, ml_focal = 0.0, thickness = 0.1;
        };
        auto args = std::make_shared<DesignArgs>();
        design->add_option("source", args->source, "prescription or summary JSON")->required();
        design->add_option("--focus", args->focus, "focus distance in mm or 'inf'")->required();
        design->add_option("--pixel", args->pixel, "pixel pitch in mm")->required();
        design->add_option("--sensor", args->sensor, "sensor size WxH in pixels")->required();
        design->add_option("--micro", args->micro, "microlens image grid CxR")->required();
        design->add_option("--ml-pitch", args->ml_pitch, "explicit microlens pitch in mm");
        design->add_option("--ml-focal", args->ml_focal, "explicit microlens focal length in mm");
        design->add_option("--mla-thickness", args->thickness, "MLA thickness in mm");
        design->add_option("--out", ctx.out_dir, "output directory");
        design->callback(guard("spc design", [&ctx, args]() {
            ctx.inputs = {args->source};
            const auto summary = load_summary_or_prescription(args->source);
            spc::DesignOptions opts;
            if (args->ml_pitch > 0.0) opts.d_ML = args->ml_pitch;
            if (args->ml_focal > 0.0) opts.f_m = args->ml_focal;
            opts.mla_thickness = args->thickness;
            const auto c = spc::design_spc(summary, parse_focus(args->focus), args->pixel,
                                           parse_pair(args->sensor, 'x'),
                                           parse_pair(args->micro, 'x'), opts);
            io::write_file(ctx.path("config.json"), io::serialize_config(c));
            std::printf("d     %s mm\n", io::format_double(c.d).c_str());
            std::printf("d_ML  %s mm\n", io::format_double(c.d_ML).c_str());
            std::printf("f_m   %s mm\n", io::format_double(c.f_m).c_str());
            print_geometry(c);
        }));

        auto* tables = spc_cmd->add_subcommand("tables", "Two-plane geometry and model parameters");
        auto cfg = std::make_shared<std::string>();
        tables->add_option("config", *cfg, "SPC config JSON")->required();
        tables->add_option("--out", ctx.out_dir, "output directory");
        tables->callback(guard("spc tables", [&ctx, cfg]() {
            ctx.inputs = {*cfg};
            const auto c = io::load_config(*cfg);
            print_geometry(c);
            const auto orig = spc::pertuz_params(c, spc::PertuzVariant::original);
            const auto corr = spc::pertuz_params(c, spc::PertuzVariant::corrected);
            std::printf("a0/a1 (original)   %s %s\n", io::format_double(orig.a0).c_str(),
                        io::format_double(orig.a1).c_str());
            std::printf("a0/a1 (corrected)  %s %s\n", io::format_double(corr.a0).c_str(),
                        io::format_double(corr.a1).c_str());
            io::write_file(ctx.path("tables.csv"), geometry_csv(c));
        }));
    }

    // --- sweep ---------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Distance and error sweeps");
    {
        auto* shift = sweep->add_subcommand("shift", "Measured refocusing shifts on synthetic targets");
        struct ShiftArgs {
            std::string config;
            std::vector<double> lambdas;
            int views = 9;
        };
        auto args = std::make_shared<ShiftArgs>();
        shift->add_option("config", args->config, "SPC config JSON")->required();
        shift->add_option("--lambdas", args->lambdas, "distance grid as multiples of o_f");
        shift->add_option("--views", args->views, "sub-aperture views per axis");
        shift->add_option("--out", ctx.out_dir, "output directory");
        shift->add_flag("--svg", ctx.svg, "emit SVG plots");
        shift->callback(guard("sweep shift", [&ctx, args]() {
            ctx.inputs = {args->config};
            auto preset = io::load_preset(args->config);
            std::vector<double> distances;
            if (args->lambdas.empty()) {
                distances = experiments::default_distances(preset.config);
            } else {
                for (const double l : args->lambdas)
                    distances.push_back(l * preset.config.o_f_finite());
            }
            experiments::SweepSettings settings;
            settings.views = args->views;
            const auto records = experiments::exp_shift_sweep(preset, distances, settings);
            const std::string header = "preset=" + preset.name + " views=" +
                                       std::to_string(settings.views);
            io::write_file(ctx.path("sweep_shift.csv"),
                           io::serialize_sweep(records, header));
            std::vector<double> shifts;
            for (const auto& r : records)
                if (std::isfinite(r.s_model)) shifts.push_back(r.s_model);
            const auto inverse =
                experiments::exp_inverse_sweep(preset, shifts, distances, settings);
            io::write_file(ctx.path("sweep_shift_inverse.csv"),
                           io::serialize_inverse_sweep(inverse, header));
            if (ctx.svg) write_sweep_svg(ctx, preset.config, records);
            for (const auto& r : records)
                std::printf("o=%-10s S_measured=%-12s S_model=%-12s\n",
                            io::format_double(r.o_mm).c_str(),
                            io::format_double(r.s_measured).c_str(),
                            io::format_double(r.s_model).c_str());
        }));

        auto* errors = sweep->add_subcommand("errors", "Relative-error sweep");
        struct ErrorArgs {
            std::string config;
            std::vector<double> lambdas;
            bool measured = false;
            double x_override = std::numeric_limits<double>::quiet_NaN();
        };
        auto args2 = std::make_shared<ErrorArgs>();
        errors->add_option("config", args2->config, "SPC config JSON")->required();
        errors->add_option("--lambdas", args2->lambdas,
                           "lambda grid (default 0.25..4, ours, not the figure's)");
        errors->add_flag("--measured", args2->measured,
                         "run the synthetic measurement instead of the analytic sweep");
        errors->add_option("--x", args2->x_override, "override the config's X in mm");
        errors->add_option("--out", ctx.out_dir, "output directory");
        errors->add_flag("--svg", ctx.svg, "emit SVG plots");
        errors->callback(guard("sweep errors", [&ctx, args2]() {
            ctx.inputs = {args2->config};
            auto preset = io::load_preset(args2->config);
            if (!std::isnan(args2->x_override)) preset.config.X = args2->x_override;
            const auto lambdas =
                args2->lambdas.empty() ? default_lambdas() : args2->lambdas;
            const std::string header = "preset=" + preset.name;
            if (args2->measured) {
                std::vector<double> distances;
                for (const double l : lambdas)
                    distances.push_back(l * preset.config.o_f_finite());
                const auto sweeps = experiments::exp_error_sweeps(preset, distances);
                io::write_file(ctx.path("errors_naive_model.csv"),
                               io::serialize_sweep(sweeps.naive_model, header));
                io::write_file(ctx.path("errors_naive_shift.csv"),
                               io::serialize_sweep(sweeps.naive_shift, header));
            } else {
                const auto records = error_models::error_sweep(preset.config, lambdas);
                io::write_file(ctx.path("sweep_errors.csv"),
                               io::serialize_error_sweep(records, header));
                if (ctx.svg) write_error_svg(ctx, records);
                for (const auto& r : records)
                    std::printf("lambda=%-8s E_S=%-14s E_o~=%-14s E_S~=%-14s %s\n",
                                io::format_double(r.lambda).c_str(),
                                io::format_double(r.e_shift).c_str(),
                                io::format_double(r.e_dist_naive_model).c_str(),
                                io::format_double(r.e_dist_naive_shift).c_str(),
                                r.flags.c_str());
            }
        }));
    }

    // --- fit -------------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "Model fitting");
    {
        auto* pertuz = fit->add_subcommand("pertuz", "Grid-search fit of the refocusing model");
        auto cfg = std::make_shared<std::string>();
        auto sweep_csv = std::make_shared<std::string>();
        pertuz->add_option("config", *cfg, "SPC config JSON")->required();
        pertuz->add_option("sweep", *sweep_csv, "sweep CSV from 'sweep shift'")->required();
        pertuz->add_option("--out", ctx.out_dir, "output directory");
        pertuz->callback(guard("fit pertuz", [&ctx, cfg, sweep_csv]() {
            ctx.inputs = {*cfg, *sweep_csv};
            const auto preset = io::load_preset(*cfg);
            const auto records = io::parse_sweep(io::read_file(*sweep_csv));
            const auto report = experiments::exp_pertuz_fit(preset, records);
            io::write_file(ctx.path("fit_pertuz.csv"),
                           io::serialize_fit_report(report, "preset=" + preset.name));
            std::printf("a0: original %s, corrected %s, fit %s\n",
                        io::format_double(report.a0_calc_original).c_str(),
                        io::format_double(report.a0_calc_corrected).c_str(),
                        io::format_double(report.a0_fit).c_str());
            std::printf("a1: original %s, corrected %s, fit %s\n",
                        io::format_double(report.a1_calc_original).c_str(),
                        io::format_double(report.a1_calc_corrected).c_str(),
                        io::format_double(report.a1_fit).c_str());
            std::printf("rmse: original %s mm, corrected %s mm, fit %s mm\n",
                        io::format_double(report.rmse_original_mm).c_str(),
                        io::format_double(report.rmse_corrected_mm).c_str(),
                        io::format_double(report.rmse_fit_mm).c_str());
        }));
    }

    // --- mic ----------------------------------------------------------------------
    auto* mic = app.add_subcommand("mic", "Microlens image center experiments");
    {
        auto* verify = mic->add_subcommand("verify", "MIC origin versus the exit pupil");
        auto cfg = std::make_shared<std::string>();
        auto rays = std::make_shared<int>(32);
        verify->add_option("preset", *cfg, "SPC config JSON with a prescription reference")
            ->required();
        verify->add_option("--rays", *rays, "rays per microlens bundle");
        verify->add_option("--out", ctx.out_dir, "output directory");
        verify->callback(guard("mic verify", [&ctx, cfg, rays]() {
            ctx.inputs = {*cfg};
            const auto preset = io::load_preset(*cfg);
            const auto report = experiments::exp_mic_verify(preset, *rays);
            io::write_file(ctx.path("mic_verify.csv"), io::serialize_mic_report(report));
            io::write_file(ctx.path("mic_ground_truth.csv"),
                           io::serialize_mic_ground_truth(report.ground_truth));
            std::printf("exit pupil z         %s mm\n",
                        io::format_double(report.exit_pupil_z_mm).c_str());
            std::printf("MIC pitch measured   %s mm (model %s mm)\n",
                        io::format_double(report.measured_mic_pitch_mm).c_str(),
                        io::format_double(report.model_mic_pitch_mm).c_str());
            for (const auto& s : report.subsets)
                std::printf("subset %3.0f%%: blur minimum at %s mm (rms %s mm)\n",
                            s.fraction * 100.0,
                            io::format_double(s.blur_min_z_mm).c_str(),
                            io::format_double(s.blur_rms_mm).c_str());
        }));
    }

    // --- lf -------------------------------------------------------------------------
    auto* lf_cmd = app.add_subcommand("lf", "Light-field operations");
    {
        auto* decode = lf_cmd->add_subcommand("decode", "Raw mosaic to 4D light field");
        struct DecodeArgs {
            std::string raw, config, white;
        };
        auto args = std::make_shared<DecodeArgs>();
        decode->add_option("raw", args->raw, "raw image (.pgm or float container)")->required();
        decode->add_option("config", args->config, "SPC config JSON")->required();
        decode->add_option("--white", args->white, "white image for devignetting");
        decode->add_option("--out", ctx.out_dir, "output directory");
        decode->callback(guard("lf decode", [&ctx, args]() {
            ctx.inputs = {args->raw, args->config};
            if (!args->white.empty()) ctx.inputs.push_back(args->white);
            const auto c = io::load_config(args->config);
            lf::Image raw = io::load_image(args->raw);
            if (!args->white.empty()) {
                const auto white = io::load_image(args->white);
                raw = lf::devignette(raw, white).image;
            }
            const auto field = lf::decode(raw, c);
            io::save_lightfield(ctx.path("lightfield.lf4d"), field);
            std::printf("decoded %dx%d views of %dx%d px\n", field.k_n, field.l_n,
                        field.i_n, field.j_n);
        }));

        auto* refocus = lf_cmd->add_subcommand("refocus", "Shift-and-sum refocusing");
        struct RefocusArgs {
            std::string field;
            double shift = 0.0;
            bool pgm = false;
        };
        auto rargs = std::make_shared<RefocusArgs>();
        refocus->add_option("lightfield", rargs->field, "LF4D container")->required();
        refocus->add_option("--shift", rargs->shift, "sub-aperture shift in pixels")->required();
        refocus->add_flag("--pgm", rargs->pgm, "also write a 16-bit PGM");
        refocus->add_option("--out", ctx.out_dir, "output directory");
        refocus->callback(guard("lf refocus", [&ctx, rargs]() {
            ctx.inputs = {rargs->field};
            const auto field = io::load_lightfield(rargs->field);
            const auto result = lf::refocus(field, rargs->shift);
            io::save_image_f32(ctx.path("refocused.lf4d"), result.image);
            if (rargs->pgm) io::save_pgm(ctx.path("refocused.pgm"), result.image);
            std::printf("refocused to %dx%d px (origin %d,%d), focus score %s\n",
                        result.image.width, result.image.height, result.origin_i,
                        result.origin_j,
                        io::format_double(lf::focus_measure(result.image)).c_str());
        }));

        auto* best = lf_cmd->add_subcommand("best-shift", "Line search for the sharpest shift");
        struct BestArgs {
            std::string field, range;
        };
        auto bargs = std::make_shared<BestArgs>();
        best->add_option("lightfield", bargs->field, "LF4D container")->required();
        best->add_option("--range", bargs->range, "search range a:b in pixels")->required();
        best->add_option("--out", ctx.out_dir, "output directory");
        best->callback(guard("lf best-shift", [&ctx, bargs]() {
            ctx.inputs = {bargs->field};
            const auto pos = bargs->range.find(':');
            if (pos == std::string::npos)
                throw io::IoError("--range expects a:b");
            const double lo = std::stod(bargs->range.substr(0, pos));
            const double hi = std::stod(bargs->range.substr(pos + 1));
            const auto field = io::load_lightfield(bargs->field);
            const auto report = lf::best_shift(field, lo, hi);
            io::save_image_f32(ctx.path("best_refocused.lf4d"), report.refocused.image);
            std::string csv = "shift_px,score,flag\n";
            const char* flag = report.flag == lf::FocusSearchFlag::ambiguous ? "ambiguous"
                               : report.flag == lf::FocusSearchFlag::multimodal ? "multimodal"
                                                                                : "";
            csv += io::format_double(report.shift_px) + "," +
                   io::format_double(report.score) + "," + flag + "\n";
            io::write_file(ctx.path("best_shift.csv"), csv);
            std::printf("best shift %s px (score %s)%s%s\n",
                        io::format_double(report.shift_px).c_str(),
                        io::format_double(report.score).c_str(),
                        *flag ? ", " : "", flag);
        }));
    }

    // --- synth ------------------------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "Synthetic ground-truth generators");
    {
        struct SynthArgs {
            std::string config, pattern = "star:4";
            double distance = 0.0, width = 0.0;
            int views = 0, resolution = 0;
            bool vignette = false;
        };
        const auto add_common = [&ctx](CLI::App* cmd, std::shared_ptr<SynthArgs> args) {
            cmd->add_option("config", args->config, "SPC config JSON")->required();
            cmd->add_option("--pattern", args->pattern, "star:N, checker:P or const");
            cmd->add_option("--distance", args->distance, "target distance in mm")->required();
            cmd->add_option("--width", args->width, "pattern width in mm (default: auto)");
            cmd->add_option("--resolution", args->resolution, "pattern raster resolution");
            cmd->add_option("--views", args->views, "views per axis (default: microimage px)");
            cmd->add_option("--out", ctx.out_dir, "output directory");
        };
        const auto build = [](const SynthArgs& args, const spc::SpcConfig& c) {
            synth::PatternSpec p = parse_pattern(args.pattern);
            if (args.resolution > 0) p.resolution = args.resolution;
            int views = args.views;
            if (views <= 0) {
                const auto m = spc::aligned_microimage_px(c);
                if (!m)
                    throw spc::ModelError(
                        "synth: config is not pixel-aligned, pass --views explicitly");
                views = *m;
            }
            if (args.width > 0.0) {
                p.physical_width_mm = args.width;
            } else {
                p.physical_width_mm =
                    2.3 * synth::required_pattern_halfwidth(
                              c, args.distance,
                              std::max(c.micro_count.x, c.micro_count.y), views);
            }
            return std::make_pair(p, views);
        };

        auto* field_cmd = synth_cmd->add_subcommand("lightfield", "Geometric 4D light field");
        auto args = std::make_shared<SynthArgs>();
        add_common(field_cmd, args);
        field_cmd->callback(guard("synth lightfield", [&ctx, args, build]() {
            ctx.inputs = {args->config};
            const auto c = io::load_config(args->config);
            const auto [pattern, views] = build(*args, c);
            const auto result =
                synth::synth_lightfield(c, pattern, args->distance, views, views);
            for (const auto& w : result.warnings) std::printf("warning: %s\n", w.c_str());
            io::save_lightfield(ctx.path("synthetic.lf4d"), result.lightfield);
            std::printf("synthesized %dx%d views of %dx%d px\n", views, views,
                        result.lightfield.i_n, result.lightfield.j_n);
        }));

        auto* raw_cmd = synth_cmd->add_subcommand("raw", "Raw mosaic plus white image");
        auto rawargs = std::make_shared<SynthArgs>();
        add_common(raw_cmd, rawargs);
        raw_cmd->add_flag("--vignette", rawargs->vignette, "apply a cos^4-style falloff");
        raw_cmd->callback(guard("synth raw", [&ctx, rawargs, build]() {
            ctx.inputs = {rawargs->config};
            const auto c = io::load_config(rawargs->config);
            const auto m = spc::aligned_microimage_px(c);
            if (!m)
                throw spc::ModelError("synth raw: config must be pixel-aligned");
            SynthArgs forced = *rawargs;
            forced.views = *m;
            const auto [pattern, views] = build(forced, c);
            const auto result =
                synth::synth_lightfield(c, pattern, forced.distance, views, views);
            const auto pair = synth::synth_raw(c, result.lightfield, forced.vignette);
            io::save_pgm(ctx.path("raw.pgm"), pair.raw);
            io::save_pgm(ctx.path("white.pgm"), pair.white);
            io::save_image_f32(ctx.path("raw.lf4d"), pair.raw);
            io::save_image_f32(ctx.path("white.lf4d"), pair.white);
            std::printf("raw mosaic %dx%d px\n", pair.raw.width, pair.raw.height);
        }));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return kExitUsage;
    }
    return rc;
}

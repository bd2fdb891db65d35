#include "pupilfield/io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pupilfield::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double_token(const std::string& tok) {
    if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw IoError("malformed number in CSV: '" + tok + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed JSON in " + what);
    return j;
}

double require_number(const json& j, const std::string& key, const std::string& what) {
    if (!j.contains(key) || !j[key].is_number())
        throw IoError(what + ": missing numeric field '" + key + "'");
    return j[key].get<double>();
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

// --- prescriptions -----------------------------------------------------------

optics::LensPrescription parse_prescription(const std::string& json_text) {
    const json j = parse_json(json_text, "prescription");
    optics::LensPrescription p;
    p.name = j.value("name", "");
    if (j.contains("ambient_index")) p.ambient_index = j["ambient_index"].get<double>();
    if (!j.contains("surfaces") || !j["surfaces"].is_array() || j["surfaces"].empty())
        throw IoError("prescription: 'surfaces' must be a non-empty array");
    for (const auto& sj : j["surfaces"]) {
        optics::OpticalSurface s;
        if (!sj.contains("radius_mm")) throw IoError("prescription: surface lacks radius_mm");
        if (sj["radius_mm"].is_string()) {
            if (sj["radius_mm"].get<std::string>() != "planar")
                throw IoError("prescription: radius_mm must be a number or \"planar\"");
        } else {
            s.radius_mm = sj["radius_mm"].get<double>();
        }
        s.thickness_mm = require_number(sj, "thickness_mm", "prescription surface");
        s.ior_after = require_number(sj, "ior_after", "prescription surface");
        s.semi_aperture_mm = require_number(sj, "semi_aperture_mm", "prescription surface");
        s.is_stop = sj.value("is_stop", false);
        p.surfaces.push_back(s);
    }
    try {
        p.validate();
    } catch (const optics::OpticsError& e) {
        throw IoError(std::string("prescription rejected: ") + e.what());
    }
    return p;
}

std::string serialize_prescription(const optics::LensPrescription& p) {
    json j;
    j["name"] = p.name;
    j["ambient_index"] = p.ambient_index;
    j["surfaces"] = json::array();
    for (const auto& s : p.surfaces) {
        json sj;
        if (s.radius_mm)
            sj["radius_mm"] = *s.radius_mm;
        else
            sj["radius_mm"] = "planar";
        sj["thickness_mm"] = s.thickness_mm;
        sj["ior_after"] = s.ior_after;
        sj["semi_aperture_mm"] = s.semi_aperture_mm;
        sj["is_stop"] = s.is_stop;
        j["surfaces"].push_back(sj);
    }
    return j.dump(2) + "\n";
}

optics::LensPrescription load_prescription(const std::string& path) {
    return parse_prescription(read_file(path));
}

void save_prescription(const std::string& path, const optics::LensPrescription& p) {
    write_file(path, serialize_prescription(p));
}

// --- summaries ----------------------------------------------------------------

std::string serialize_summary(const optics::ParaxialSummary& s) {
    json j;
    j["f_M"] = s.f_M;
    j["h_scene"] = s.h_scene;
    j["h_cam"] = s.h_cam;
    j["exit_pupil_position"] = s.exit_pupil_position;
    j["exit_pupil_radius"] = s.exit_pupil_radius;
    j["X"] = s.X;
    j["stop_z_mm"] = s.stop_z_mm;
    j["warnings"] = s.warnings;
    return j.dump(2) + "\n";
}

optics::ParaxialSummary parse_summary(const std::string& json_text) {
    const json j = parse_json(json_text, "summary");
    optics::ParaxialSummary s;
    s.f_M = require_number(j, "f_M", "summary");
    s.h_scene = require_number(j, "h_scene", "summary");
    s.h_cam = require_number(j, "h_cam", "summary");
    s.exit_pupil_position = require_number(j, "exit_pupil_position", "summary");
    s.exit_pupil_radius = require_number(j, "exit_pupil_radius", "summary");
    s.X = require_number(j, "X", "summary");
    if (j.contains("stop_z_mm")) s.stop_z_mm = j["stop_z_mm"].get<double>();
    if (j.contains("warnings")) s.warnings = j["warnings"].get<std::vector<std::string>>();
    return s;
}

// --- configs --------------------------------------------------------------------

spc::SpcConfig parse_config(const std::string& json_text, const std::string& base_dir) {
    const json j = parse_json(json_text, "config");
    spc::SpcConfig c;

    if (j.contains("prescription")) {
        const fs::path ref = j["prescription"].get<std::string>();
        const fs::path resolved =
            ref.is_absolute() || base_dir.empty() ? ref : fs::path(base_dir) / ref;
        const auto p = load_prescription(resolved.string());
        const auto summary = optics::paraxial_summary(p);
        c.f_M = summary.f_M;
        c.X = summary.X;
    } else {
        c.f_M = require_number(j, "f_M", "config");
        c.X = require_number(j, "X", "config");
    }

    if (!j.contains("o_f")) throw IoError("config: missing o_f");
    if (j["o_f"].is_string()) {
        if (j["o_f"].get<std::string>() != "inf")
            throw IoError("config: o_f must be a number or \"inf\"");
        c.o_f = spc::kInfiniteFocus;
        c.d = c.f_M;
    } else {
        c.o_f = j["o_f"].get<double>();
        if (!(c.o_f > c.f_M)) throw IoError("config: o_f must exceed f_M");
        c.d = c.f_M * c.o_f / (c.o_f - c.f_M);
    }

    c.f_m = require_number(j, "f_m", "config");
    c.d_ML = require_number(j, "d_ML", "config");
    c.mla_thickness = j.value("mla_thickness", 0.0);
    c.s_px = require_number(j, "s_px", "config");
    const auto read_pair = [&](const char* key) -> spc::Vec2i {
        if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
            throw IoError(std::string("config: '") + key + "' must be [x, y]");
        return {j[key][0].get<int>(), j[key][1].get<int>()};
    };
    c.sensor_px = read_pair("sensor_px");
    c.micro_count = read_pair("micro_count");
    try {
        c.validate();
    } catch (const spc::ModelError& e) {
        throw IoError(std::string("config rejected: ") + e.what());
    }
    return c;
}

std::string serialize_config(const spc::SpcConfig& c) {
    json j;
    j["f_M"] = c.f_M;
    j["X"] = c.X;
    if (c.infinite_focus())
        j["o_f"] = "inf";
    else
        j["o_f"] = c.o_f;
    j["f_m"] = c.f_m;
    j["d_ML"] = c.d_ML;
    j["mla_thickness"] = c.mla_thickness;
    j["s_px"] = c.s_px;
    j["sensor_px"] = {c.sensor_px.x, c.sensor_px.y};
    j["micro_count"] = {c.micro_count.x, c.micro_count.y};
    return j.dump(2) + "\n";
}

spc::SpcConfig load_config(const std::string& path) {
    return parse_config(read_file(path), fs::path(path).parent_path().string());
}

void save_config(const std::string& path, const spc::SpcConfig& c) {
    write_file(path, serialize_config(c));
}

experiments::Preset load_preset(const std::string& path) {
    experiments::Preset preset;
    preset.name = fs::path(path).stem().string();
    const std::string text = read_file(path);
    preset.config = parse_config(text, fs::path(path).parent_path().string());
    const json j = parse_json(text, "config");
    if (j.contains("prescription")) {
        const fs::path ref = j["prescription"].get<std::string>();
        const fs::path base = fs::path(path).parent_path();
        const fs::path resolved = ref.is_absolute() ? ref : base / ref;
        preset.prescription = load_prescription(resolved.string());
    }
    return preset;
}

// --- light fields ------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("LF4D container truncated");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

}  // namespace

std::vector<std::uint8_t> serialize_lightfield(const lf::LightField4D& field) {
    std::vector<std::uint8_t> out;
    out.reserve(40 + field.samples.size() * 4);
    out.insert(out.end(), {'L', 'F', '4', 'D'});
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.k_n));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.l_n));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.i_n));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.j_n));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.center_k));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.center_l));
    put_le<double>(out, field.delta_st_mm);
    put_le<double>(out, field.delta_uv_mm);
    for (const float v : field.samples) put_le<float>(out, v);
    return out;
}

lf::LightField4D parse_lightfield(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "LF4D", 4) != 0)
        throw IoError("not an LF4D container (bad magic)");
    std::size_t pos = 4;
    const auto k_n = get_le<std::uint32_t>(bytes, pos);
    const auto l_n = get_le<std::uint32_t>(bytes, pos);
    const auto i_n = get_le<std::uint32_t>(bytes, pos);
    const auto j_n = get_le<std::uint32_t>(bytes, pos);
    if (k_n == 0 || l_n == 0 || i_n == 0 || j_n == 0)
        throw IoError("LF4D container with zero dimension");
    lf::LightField4D field(static_cast<int>(i_n), static_cast<int>(j_n),
                           static_cast<int>(k_n), static_cast<int>(l_n));
    field.center_k = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
    field.center_l = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
    field.delta_st_mm = get_le<double>(bytes, pos);
    field.delta_uv_mm = get_le<double>(bytes, pos);
    for (float& v : field.samples) v = get_le<float>(bytes, pos);
    if (pos != bytes.size()) throw IoError("LF4D container has trailing bytes");
    return field;
}

lf::LightField4D load_lightfield(const std::string& path) {
    const std::string text = read_file(path);
    return parse_lightfield(std::vector<std::uint8_t>(text.begin(), text.end()));
}

void save_lightfield(const std::string& path, const lf::LightField4D& field) {
    const auto bytes = serialize_lightfield(field);
    write_file(path, std::string(bytes.begin(), bytes.end()));
}

void save_pgm(const std::string& path, const lf::Image& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n65535\n";
    out.reserve(out.size() + img.samples.size() * 2);
    for (const float v : img.samples) {
        const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
        out.push_back(static_cast<char>(q >> 8));  // big-endian per PGM
        out.push_back(static_cast<char>(q & 0xff));
    }
    write_file(path, out);
}

lf::Image load_pgm(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("not a binary PGM: " + path);
    const auto next_token = [&]() -> long {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return std::stol(tok);
        }
        throw IoError("truncated PGM header: " + path);
    };
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (maxval != 65535) throw IoError("PGM must use maxval 65535: " + path);
    in.get();  // the single whitespace after the header
    const std::size_t offset = static_cast<std::size_t>(in.tellg());
    const std::size_t need = static_cast<std::size_t>(w) * h * 2;
    if (text.size() - offset < need) throw IoError("truncated PGM data: " + path);
    lf::Image img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        const auto hi = static_cast<std::uint8_t>(text[offset + 2 * i]);
        const auto lo = static_cast<std::uint8_t>(text[offset + 2 * i + 1]);
        img.samples[i] = static_cast<float>(((hi << 8) | lo) / 65535.0);
    }
    return img;
}

void save_image_f32(const std::string& path, const lf::Image& img) {
    lf::LightField4D field(img.width, img.height, 1, 1);
    field.samples = img.samples;
    save_lightfield(path, field);
}

lf::Image load_image_f32(const std::string& path) {
    const auto field = load_lightfield(path);
    if (field.k_n != 1 || field.l_n != 1)
        throw IoError("float image container must have dims (1,1,h,w): " + path);
    lf::Image img(field.i_n, field.j_n);
    img.samples = field.samples;
    return img;
}

lf::Image load_image(const std::string& path) {
    if (fs::path(path).extension() == ".pgm") return load_pgm(path);
    return load_image_f32(path);
}

// --- CSV -------------------------------------------------------------------------------

namespace {

std::string csv_header_prefix(const std::string& comment) {
    if (comment.empty()) return "";
    std::string out;
    std::istringstream in(comment);
    std::string line;
    while (std::getline(in, line)) out += "# " + line + "\n";
    return out;
}

}  // namespace

std::string serialize_error_sweep(const std::vector<error_models::ErrorRecord>& records,
                                  const std::string& header_comment) {
    std::string out = csv_header_prefix(header_comment);
    out += "lambda,o_mm,e_shift,e_dist_naive_model,e_dist_naive_shift,flags\n";
    for (const auto& r : records) {
        out += format_double(r.lambda) + "," + format_double(r.o_mm) + "," +
               format_double(r.e_shift) + "," + format_double(r.e_dist_naive_model) +
               "," + format_double(r.e_dist_naive_shift) + "," + r.flags + "\n";
    }
    return out;
}

std::vector<error_models::ErrorRecord> parse_error_sweep(const std::string& csv,
                                                         std::string* header_comment) {
    std::vector<error_models::ErrorRecord> records;
    std::istringstream in(csv);
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header_comment) {
                if (!header_comment->empty()) *header_comment += "\n";
                *header_comment += line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
            }
            continue;
        }
        if (!saw_header) {
            saw_header = true;  // column header
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 6) throw IoError("error-sweep CSV row must have 6 fields");
        error_models::ErrorRecord r;
        r.lambda = parse_double_token(f[0]);
        r.o_mm = parse_double_token(f[1]);
        r.e_shift = parse_double_token(f[2]);
        r.e_dist_naive_model = parse_double_token(f[3]);
        r.e_dist_naive_shift = parse_double_token(f[4]);
        r.flags = f[5];
        records.push_back(r);
    }
    return records;
}

std::string serialize_sweep(const std::vector<experiments::SweepRecord>& records,
                            const std::string& header_comment) {
    std::string out = csv_header_prefix(header_comment);
    out += "o_mm,lambda,s_measured_px,s_model_px,s_naive_px,o_from_s_naive_mm,"
           "o_from_s_model_mm,e_measured,e_model,flags\n";
    for (const auto& r : records) {
        out += format_double(r.o_mm) + "," + format_double(r.lambda) + "," +
               format_double(r.s_measured) + "," + format_double(r.s_model) + "," +
               format_double(r.s_naive) + "," + format_double(r.o_from_s_naive) + "," +
               format_double(r.o_from_s_model) + "," + format_double(r.e_measured) +
               "," + format_double(r.e_model) + "," + r.flags + "\n";
    }
    return out;
}

std::vector<experiments::SweepRecord> parse_sweep(const std::string& csv,
                                                  std::string* header_comment) {
    std::vector<experiments::SweepRecord> records;
    std::istringstream in(csv);
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header_comment) {
                if (!header_comment->empty()) *header_comment += "\n";
                *header_comment += line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
            }
            continue;
        }
        if (!saw_header) {
            saw_header = true;
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 10) throw IoError("sweep CSV row must have 10 fields");
        experiments::SweepRecord r;
        r.o_mm = parse_double_token(f[0]);
        r.lambda = parse_double_token(f[1]);
        r.s_measured = parse_double_token(f[2]);
        r.s_model = parse_double_token(f[3]);
        r.s_naive = parse_double_token(f[4]);
        r.o_from_s_naive = parse_double_token(f[5]);
        r.o_from_s_model = parse_double_token(f[6]);
        r.e_measured = parse_double_token(f[7]);
        r.e_model = parse_double_token(f[8]);
        r.flags = f[9];
        records.push_back(r);
    }
    return records;
}

std::string serialize_inverse_sweep(const std::vector<experiments::InverseRecord>& records,
                                    const std::string& header_comment) {
    std::string out = csv_header_prefix(header_comment);
    out += "shift_px,o_measured_mm,o_model_mm,flags\n";
    for (const auto& r : records) {
        out += format_double(r.shift_px) + "," + format_double(r.o_measured_mm) + "," +
               format_double(r.o_model_mm) + "," + r.flags + "\n";
    }
    return out;
}

std::string serialize_mic_ground_truth(const synth::MicGroundTruth& g) {
    std::string out = "ml_index,ml_center_mm,mic_mm,variance_mm2\n";
    for (const auto& e : g.entries) {
        out += std::to_string(e.ml_index) + "," + format_double(e.ml_center_mm) + "," +
               format_double(e.mic_mm) + "," + format_double(e.variance_mm2) + "\n";
    }
    return out;
}

std::string serialize_mic_report(const experiments::MicVerifyReport& report) {
    std::string out;
    out += "# exit_pupil_z_mm=" + format_double(report.exit_pupil_z_mm) + "\n";
    out += "# mla_z_mm=" + format_double(report.mla_z_mm) + "\n";
    out += "# pupil_to_mla_mm=" + format_double(report.pupil_to_mla_mm) + "\n";
    out += "# measured_mic_pitch_mm=" + format_double(report.measured_mic_pitch_mm) + "\n";
    out += "# model_mic_pitch_mm=" + format_double(report.model_mic_pitch_mm) + "\n";
    out += "fraction,rays,blur_min_z_mm,blur_rms_mm,axis_mean_z_mm,axis_variance_mm2\n";
    for (const auto& s : report.subsets) {
        out += format_double(s.fraction) + "," + std::to_string(s.rays) + "," +
               format_double(s.blur_min_z_mm) + "," + format_double(s.blur_rms_mm) + "," +
               format_double(s.axis_mean_z_mm) + "," +
               format_double(s.axis_variance_mm2) + "\n";
    }
    return out;
}

std::string serialize_fit_report(const experiments::FitReport& r,
                                 const std::string& header_comment) {
    std::string out = csv_header_prefix(header_comment);
    out += "a0_calc_original,a1_calc_original,a0_calc_corrected,a1_calc_corrected,"
           "a0_fit,a1_fit,rmse_original_mm,rmse_corrected_mm,rmse_fit_mm\n";
    out += format_double(r.a0_calc_original) + "," + format_double(r.a1_calc_original) +
           "," + format_double(r.a0_calc_corrected) + "," +
           format_double(r.a1_calc_corrected) + "," + format_double(r.a0_fit) + "," +
           format_double(r.a1_fit) + "," + format_double(r.rmse_original_mm) + "," +
           format_double(r.rmse_corrected_mm) + "," + format_double(r.rmse_fit_mm) + "\n";
    return out;
}

std::string serialize_lens_stats(const lensdb::CollectionResult& collection,
                                 const lensdb::RegressionReport& report) {
    std::string out = "name,f_M_mm,X_mm,ratio\n";
    for (const auto& r : collection.records)
        out += r.name + "," + format_double(r.f_M) + "," + format_double(r.X) + "," +
               format_double(r.ratio) + "\n";
    out += "# report: n=" + std::to_string(report.n) +
           " slope=" + format_double(report.slope) +
           " intercept_mm=" + format_double(report.intercept) +
           " pearson_r=" + format_double(report.pearson_r) +
           " r_squared=" + format_double(report.r_squared) + "\n";
    out += "# census: |X|<0.05f_M=" + std::to_string(report.census_below_5pct) +
           " |X|>0.25f_M=" + std::to_string(report.census_above_25pct) +
           " |X|>0.5f_M=" + std::to_string(report.census_above_50pct) + "\n";
    for (const auto& f : collection.failures) out += "# failed: " + f + "\n";
    return out;
}

// --- manifests ---------------------------------------------------------------------------

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (const std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_inputs(const std::vector<std::string>& paths) {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& p : paths) {
        const std::string content = read_file(p);
        h = fnv1a(std::vector<std::uint8_t>(p.begin(), p.end()), h);
        h = fnv1a(std::vector<std::uint8_t>(content.begin(), content.end()), h);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string serialize_manifest(const RunManifest& m) {
    json j;
    j["subcommand"] = m.subcommand;
    j["inputs"] = m.inputs;
    j["overrides"] = m.overrides;
    j["out_dir"] = m.out_dir;
    j["tool_version"] = m.tool_version;
    j["input_hash"] = m.input_hash;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m) {
    write_file((fs::path(m.out_dir) / "manifest.json").string(), serialize_manifest(m));
}

}  // namespace pupilfield::io

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pupilfield/error_models.hpp"
#include "pupilfield/experiments.hpp"
#include "pupilfield/lensdb.hpp"
#include "pupilfield/lightfield.hpp"
#include "pupilfield/optics.hpp"
#include "pupilfield/spc.hpp"
#include "pupilfield/synth.hpp"

namespace pupilfield::io {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// --- lens prescriptions (JSON) ---------------------------------------------

optics::LensPrescription parse_prescription(const std::string& json_text);
std::string serialize_prescription(const optics::LensPrescription& p);
optics::LensPrescription load_prescription(const std::string& path);
void save_prescription(const std::string& path, const optics::LensPrescription& p);

// --- paraxial summaries (JSON) ----------------------------------------------

std::string serialize_summary(const optics::ParaxialSummary& s);
optics::ParaxialSummary parse_summary(const std::string& json_text);

// --- SPC configs (JSON) ------------------------------------------------------

/// A config file carries either inline f_M/X or a prescription reference
/// (resolved relative to the config file's directory); d is derived from o_f.
spc::SpcConfig parse_config(const std::string& json_text,
                            const std::string& base_dir = "");
std::string serialize_config(const spc::SpcConfig& c);
spc::SpcConfig load_config(const std::string& path);
void save_config(const std::string& path, const spc::SpcConfig& c);

/// Loads a config together with its prescription (when referenced) as an
/// experiment preset named after the file.
experiments::Preset load_preset(const std::string& path);

// --- light fields and images -------------------------------------------------

/// LF4D container: magic "LF4D", little-endian u32 dims in (k,l,i,j) order,
/// u32 center_k, center_l, f64 delta_st_mm, f64 delta_uv_mm, then f32
/// samples in [k][l][i][j] row-major order.
std::vector<std::uint8_t> serialize_lightfield(const lf::LightField4D& field);
lf::LightField4D parse_lightfield(const std::vector<std::uint8_t>& bytes);
lf::LightField4D load_lightfield(const std::string& path);
void save_lightfield(const std::string& path, const lf::LightField4D& field);

/// 16-bit PGM (P5, maxval 65535, big-endian samples). Intensities are
/// clamped to [0,1] and quantized on write, scaled back to [0,1] on read.
void save_pgm(const std::string& path, const lf::Image& img);
lf::Image load_pgm(const std::string& path);

/// Float image as an LF4D container with dims (1,1,h,w).
void save_image_f32(const std::string& path, const lf::Image& img);
lf::Image load_image_f32(const std::string& path);

/// Loads a raw/white image by extension: .pgm or the float container.
lf::Image load_image(const std::string& path);

// --- CSV tables ----------------------------------------------------------------

std::string serialize_error_sweep(const std::vector<error_models::ErrorRecord>& records,
                                  const std::string& header_comment = "");
std::vector<error_models::ErrorRecord> parse_error_sweep(const std::string& csv,
                                                         std::string* header_comment = nullptr);

std::string serialize_sweep(const std::vector<experiments::SweepRecord>& records,
                            const std::string& header_comment = "");
std::vector<experiments::SweepRecord> parse_sweep(const std::string& csv,
                                                  std::string* header_comment = nullptr);

std::string serialize_inverse_sweep(const std::vector<experiments::InverseRecord>& records,
                                    const std::string& header_comment = "");

std::string serialize_mic_ground_truth(const synth::MicGroundTruth& g);
std::string serialize_mic_report(const experiments::MicVerifyReport& report);

std::string serialize_fit_report(const experiments::FitReport& report,
                                 const std::string& header_comment = "");

/// Lens records followed by a '# report:' block with the regression numbers
/// and the per-file failure trailer.
std::string serialize_lens_stats(const lensdb::CollectionResult& collection,
                                 const lensdb::RegressionReport& report);

// --- run manifests ---------------------------------------------------------------

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string tool_version;
    std::string input_hash;  ///< FNV-1a 64 over the input files' bytes
};

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes, std::uint64_t seed);
std::string hash_inputs(const std::vector<std::string>& paths);
std::string serialize_manifest(const RunManifest& m);
void write_manifest(const RunManifest& m);

}  // namespace pupilfield::io

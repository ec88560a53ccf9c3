#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "config.hpp"

namespace dexct::cli {

/// Key=value description of a simulated scan, stored next to the sinograms.
struct ScanMetadata {
    std::size_t n = 0;
    std::size_t n_angles = 0;
    ScanProtocol protocol = ScanProtocol::SAME_OPERATOR;
    double pixel_size = 1.0;
    AttenuationCoeffs coeffs;
    double noise_level = 0.0;
    double rotation_deg = 0.0;
    std::uint64_t noise_seed = 0;

    GeometryPair geometries() const { return make_geometries(n, n_angles, protocol, pixel_size); }
};

void write_metadata(const std::filesystem::path& path, const ScanMetadata& meta);
ScanMetadata read_metadata(const std::filesystem::path& path);

/// material1.dexc / material2.dexc plus PGM previews.
void write_image_pair(const std::filesystem::path& dir, const std::string& stem, const ImagePair& g, int pgm_bits);
ImagePair read_image_pair(const std::filesystem::path& dir, const std::string& stem);

void write_scan(const std::filesystem::path& dir, const SinogramPair& m, const ScanMetadata& meta);
SinogramPair read_scan(const std::filesystem::path& dir, ScanMetadata& meta);

struct RunStatus {
    bool converged = true;
    std::map<std::string, std::string> notes;
};

/// The full protocol: phantom, simulation, parameter sweeps, reconstruction,
/// segmentation and metrics, all written below cfg.output.directory.
RunStatus run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::size_t workers);

/// One IP solve per configured size; writes N,dimension,ipm_iters,pcg_iters,seconds.
void run_bench(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& log);

/// Worker cap from DEXCT_WORKERS, defaulting to the hardware concurrency.
std::size_t workers_from_environment();

/// Shortest round-trippable decimal form, used for directory names and metadata.
std::string format_number(double v);

} // namespace dexct::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dexct/dexct.hpp"

namespace dexct::cli {

/// Invalid configuration; what() carries "file:line:column: key: message".
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GeometryConfig {
    std::size_t n_angles = 65;
    ScanProtocol protocol = ScanProtocol::SAME_OPERATOR;
    double pixel_size = 1.0;
};

struct SimulationConfig {
    double noise_level = 0.01;
    double rotation_deg = 45.0;
};

struct IpMethodConfig {
    bool enabled = false;
    RegWeights weights{150.0, 120.0};
    IpmConfig solver;
    /// Candidate alphas for parameter selection (beta = 0.8 alpha); empty = no sweep.
    std::vector<double> sweep;
};

struct JtvMethodConfig {
    bool enabled = false;
    JtvConfig solver;
    /// Candidate gammas for parameter selection; empty = no sweep.
    std::vector<double> sweep;
};

struct OutputConfig {
    std::filesystem::path directory = "out";
    /// Adds wall-clock columns to solver reports. Off by default so that reruns
    /// produce byte-identical files.
    bool record_timing = false;
    int pgm_bits = 16;
};

struct BenchConfig {
    std::vector<std::size_t> sizes{32, 64, 128};
    RegWeights weights{500.0, 250.0};
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    PhantomSpec phantom;
    GeometryConfig geometry;
    AttenuationCoeffs coeffs;
    SimulationConfig simulation;
    IpMethodConfig ip;
    JtvMethodConfig jtv;
    OutputConfig output;
    BenchConfig bench;
    /// SHA-256 of the configuration text (hex).
    std::string sha256;
    std::string source_name;
};

/// Parses YAML text. Paths inside the config are resolved against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::string& source_name,
                              const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

} // namespace dexct::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snn/noise.hpp"
#include "snn/search.hpp"
#include "snn/toymodel.hpp"

namespace snn::cli {

enum ExitCode : int { kOk = 0, kInternalError = 1, kUsageError = 2 };

struct DenoiseConfig {
    std::filesystem::path input;
    std::filesystem::path output;
    std::optional<std::filesystem::path> reference;
    double sigma = 20.0;              // 0-255 scale
    std::optional<double> h;          // 0-255 scale; default 0.75 sigma
    int n_neighbors = 16;
    double offset = 1.0;
    int patch_side = 3;
    int search_side = 21;
    int threads = 1;
};

struct AddNoiseConfig {
    std::filesystem::path input;
    std::filesystem::path output;
    double sigma = 20.0;
    std::uint64_t seed = 0;
    NoiseDomain domain = NoiseDomain::rgb_white;
    BayerPattern pattern = BayerPattern::rggb;
    bool clip_cfa = false;
    int threads = 1;
};

struct ToyConfig {
    toy::ToyScenario scenario;
    std::optional<std::filesystem::path> curve;
    int curve_points = 321;
    std::size_t oracle_trials = 0;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct BenchConfig {
    std::vector<std::filesystem::path> images; // files or directories
    std::vector<double> sigmas{5, 10, 20, 30, 40};
    std::vector<int> neighbors{4, 8, 16, 32};
    std::vector<double> offsets{0.0, 0.8, 1.0};
    int patch_side = 3;
    int search_side = 21;
    double h_factor = 0.75;
    NoiseDomain domain = NoiseDomain::rgb_white;
    BayerPattern pattern = BayerPattern::rggb;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> output; // CSV; stdout when absent
    int threads = 1;
};

int cmd_denoise(const DenoiseConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_add_noise(const AddNoiseConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_toy(const ToyConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_bench(const BenchConfig &cfg, std::ostream &out, std::ostream &err);

/// Sidecar written next to a colored-noise output: `<output>.sigma.txt`.
std::filesystem::path sigma_sidecar_path(const std::filesystem::path &output);

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_field(const std::string &text);

/// Parses arguments (args[0] is the program name) and dispatches to a subcommand.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace snn::cli

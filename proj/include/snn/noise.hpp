#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "snn/image.hpp"
#include "snn/parallel.hpp"

namespace snn {

enum class NoiseDomain { rgb_white, bayer_colored };

struct NoiseSpec {
    double sigma = 20.0; // on the 0-255 scale
    std::uint64_t seed = 0;
    NoiseDomain domain = NoiseDomain::rgb_white;
    bool clip_cfa = false; // clip the noisy CFA to [0, 1] before demosaicing

    double unit_sigma() const noexcept { return sigma / 255.0; }
    void validate() const {
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("NoiseSpec: sigma must be >= 0");
    }
};

struct RgbSigma {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    double mean() const noexcept { return (r + g + b) / 3.0; }
    double operator[](int c) const noexcept { return c == 0 ? r : (c == 1 ? g : b); }
};

/// Adds independent G(0, sigma^2) to every sample. Row y draws from its own
/// stream seeded by (seed, y), so the result does not depend on `threads`.
template <typename T>
Image<T> add_white_noise(const Image<T> &img, const NoiseSpec &spec, int threads = default_threads()) {
    spec.validate();
    if (spec.domain != NoiseDomain::rgb_white)
        throw std::invalid_argument("add_white_noise: spec domain must be rgb-white");
    Image<T> out = img;
    if (spec.sigma == 0.0)
        return out;
    const double s = spec.unit_sigma();
    parallel_chunks(std::size_t(img.height()), threads, [&](std::size_t y) {
        boost::random::mt19937_64 rng(mix_seed(spec.seed, y));
        boost::random::normal_distribution<double> unit(0.0, 1.0);
        for (T &v : out.row(int(y)))
            v = T(double(v) + s * unit(rng));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Bayer CFA

enum class BayerPattern { rggb, grbg, gbrg, bggr };

inline BayerPattern parse_bayer_pattern(std::string_view text) {
    std::string t;
    for (char c : text)
        t.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    if (t == "rggb")
        return BayerPattern::rggb;
    if (t == "grbg")
        return BayerPattern::grbg;
    if (t == "gbrg")
        return BayerPattern::gbrg;
    if (t == "bggr")
        return BayerPattern::bggr;
    throw std::invalid_argument("unknown Bayer pattern '" + std::string(text) + "'");
}

constexpr std::string_view to_string(BayerPattern p) noexcept {
    switch (p) {
    case BayerPattern::rggb: return "rggb";
    case BayerPattern::grbg: return "grbg";
    case BayerPattern::gbrg: return "gbrg";
    case BayerPattern::bggr: return "bggr";
    }
    return "?";
}

/// Channel (0 = R, 1 = G, 2 = B) sampled at (x, y).
constexpr int cfa_channel(BayerPattern p, int x, int y) noexcept {
    constexpr std::array<std::array<int, 4>, 4> tiles{{
        {0, 1, 1, 2}, // rggb
        {1, 0, 2, 1}, // grbg
        {1, 2, 0, 1}, // gbrg
        {2, 1, 1, 0}, // bggr
    }};
    return tiles[std::size_t(p)][std::size_t((y & 1) * 2 + (x & 1))];
}

template <typename T>
Image<T> mosaic_bayer(const Image<T> &img, BayerPattern pattern) {
    if (img.channels() != 3)
        throw std::invalid_argument("mosaic_bayer: input must have 3 channels");
    if (img.width() % 2 || img.height() % 2)
        throw std::invalid_argument("mosaic_bayer: width and height must be even");
    Image<T> cfa(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            cfa(x, y) = img(x, y, cfa_channel(pattern, x, y));
    return cfa;
}

namespace malvar {

using Kernel = std::array<std::array<double, 5>, 5>;

// Gradient-corrected bilinear interpolation kernels (Malvar, He, Cutler 2004),
// already divided by 8.
inline constexpr Kernel g_at_rb{{
    {0.0, 0.0, -1.0 / 8, 0.0, 0.0},
    {0.0, 0.0, 2.0 / 8, 0.0, 0.0},
    {-1.0 / 8, 2.0 / 8, 4.0 / 8, 2.0 / 8, -1.0 / 8},
    {0.0, 0.0, 2.0 / 8, 0.0, 0.0},
    {0.0, 0.0, -1.0 / 8, 0.0, 0.0},
}};
// R or B at a green pixel whose row holds that color
inline constexpr Kernel rb_at_g_row{{
    {0.0, 0.0, 0.5 / 8, 0.0, 0.0},
    {0.0, -1.0 / 8, 0.0, -1.0 / 8, 0.0},
    {-1.0 / 8, 4.0 / 8, 5.0 / 8, 4.0 / 8, -1.0 / 8},
    {0.0, -1.0 / 8, 0.0, -1.0 / 8, 0.0},
    {0.0, 0.0, 0.5 / 8, 0.0, 0.0},
}};
// R or B at a green pixel whose column holds that color
inline constexpr Kernel rb_at_g_col{{
    {0.0, 0.0, -1.0 / 8, 0.0, 0.0},
    {0.0, -1.0 / 8, 4.0 / 8, -1.0 / 8, 0.0},
    {0.5 / 8, 0.0, 5.0 / 8, 0.0, 0.5 / 8},
    {0.0, -1.0 / 8, 4.0 / 8, -1.0 / 8, 0.0},
    {0.0, 0.0, -1.0 / 8, 0.0, 0.0},
}};
// R at a blue pixel, or B at a red pixel
inline constexpr Kernel rb_at_br{{
    {0.0, 0.0, -1.5 / 8, 0.0, 0.0},
    {0.0, 2.0 / 8, 0.0, 2.0 / 8, 0.0},
    {-1.5 / 8, 0.0, 6.0 / 8, 0.0, -1.5 / 8},
    {0.0, 2.0 / 8, 0.0, 2.0 / 8, 0.0},
    {0.0, 0.0, -1.5 / 8, 0.0, 0.0},
}};
inline constexpr Kernel identity{{
    {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}}};

/// Kernel that reconstructs `channel` at position (x, y) of the CFA.
constexpr const Kernel &kernel_for(BayerPattern p, int x, int y, int channel) noexcept {
    const int native = cfa_channel(p, x, y);
    if (native == channel)
        return identity;
    if (channel == 1)
        return g_at_rb;
    if (native == 1) // green site: is the wanted color on this row?
        return cfa_channel(p, x + 1, y) == channel ? rb_at_g_row : rb_at_g_col;
    return rb_at_br;
}

} // namespace malvar

/// Malvar-He-Cutler linear demosaicing; borders use mirror padding, which keeps the CFA phase.
template <typename T>
Image<T> demosaic_malvar(const Image<T> &cfa, BayerPattern pattern) {
    if (cfa.channels() != 1)
        throw std::invalid_argument("demosaic_malvar: CFA must have 1 channel");
    if (cfa.width() % 2 || cfa.height() % 2)
        throw std::invalid_argument("demosaic_malvar: width and height must be even");
    const Image<T> pad = pad_mirror(cfa, 2);
    Image<T> out(cfa.width(), cfa.height(), 3);
    for (int y = 0; y < cfa.height(); ++y) {
        for (int x = 0; x < cfa.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                if (cfa_channel(pattern, x, y) == c) {
                    out(x, y, c) = cfa(x, y);
                    continue;
                }
                const auto &k = malvar::kernel_for(pattern, x, y, c);
                double acc = 0.0;
                for (int j = 0; j < 5; ++j)
                    for (int i = 0; i < 5; ++i)
                        if (k[std::size_t(j)][std::size_t(i)] != 0.0)
                            acc += k[std::size_t(j)][std::size_t(i)] * double(pad(x + i, y + j));
                out(x, y, c) = T(acc);
            }
        }
    }
    return out;
}

/// Per-channel noise std after demosaicing i.i.d. CFA noise of std `sigma_bayer`:
/// sigma * sqrt(mean over the four CFA sites of the sum of squared kernel weights).
inline RgbSigma propagate_sigma_rgb(double sigma_bayer, BayerPattern pattern) {
    if (!(sigma_bayer >= 0.0))
        throw std::invalid_argument("propagate_sigma_rgb: sigma must be >= 0");
    std::array<double, 3> gain{};
    for (int c = 0; c < 3; ++c) {
        double mean_sq = 0.0;
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                double sq = 0.0;
                for (const auto &row : malvar::kernel_for(pattern, x, y, c))
                    for (double w : row)
                        sq += w * w;
                mean_sq += sq / 4.0;
            }
        gain[std::size_t(c)] = std::sqrt(mean_sq);
    }
    return {sigma_bayer * gain[0], sigma_bayer * gain[1], sigma_bayer * gain[2]};
}

template <typename T>
struct ColoredNoiseResult {
    Image<T> noisy;
    RgbSigma sigma; // on the 0-255 scale, like NoiseSpec::sigma
};

/// Mosaic -> add G(0, sigma^2) per CFA sample -> Malvar demosaic.
template <typename T>
ColoredNoiseResult<T> colored_noise_pipeline(const Image<T> &img, const NoiseSpec &spec, BayerPattern pattern,
                                             int threads = default_threads()) {
    spec.validate();
    if (spec.domain != NoiseDomain::bayer_colored)
        throw std::invalid_argument("colored_noise_pipeline: spec domain must be bayer-colored");
    NoiseSpec cfa_spec = spec;
    cfa_spec.domain = NoiseDomain::rgb_white;
    Image<T> cfa = add_white_noise(mosaic_bayer(img, pattern), cfa_spec, threads);
    if (spec.clip_cfa)
        for (T &v : cfa.samples())
            v = std::clamp(v, T(0), T(1));
    return {demosaic_malvar(cfa, pattern), propagate_sigma_rgb(spec.sigma, pattern)};
}

/// Normalized autocorrelation of channel c at lag (dx, dy), after removing the mean.
template <typename T>
double lag_autocorrelation(const Image<T> &img, int dx, int dy, int c = 0) {
    double mean = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            mean += img(x, y, c);
    mean /= double(img.width()) * img.height();
    double var = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            var += (img(x, y, c) - mean) * (img(x, y, c) - mean);
    double cov = 0.0;
    std::size_t n = 0;
    for (int y = std::max(0, -dy); y < img.height() - std::max(0, dy); ++y)
        for (int x = std::max(0, -dx); x < img.width() - std::max(0, dx); ++x, ++n)
            cov += (img(x, y, c) - mean) * (img(x + dx, y + dy, c) - mean);
    if (var == 0.0 || n == 0)
        return 0.0;
    return (cov / double(n)) / (var / (double(img.width()) * img.height()));
}

} // namespace snn

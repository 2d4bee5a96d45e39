#include <gtest/gtest.h>

#include <cmath>

#include "image_io.hpp"
#include "malvar_fixture.hpp"
#include "snn/metrics.hpp"
#include "snn/noise.hpp"
#include "test_support.hpp"

using namespace snn;

namespace {

NoiseSpec white(double sigma, std::uint64_t seed) {
    NoiseSpec s;
    s.sigma = sigma;
    s.seed = seed;
    return s;
}

NoiseSpec bayer(double sigma, std::uint64_t seed) {
    NoiseSpec s = white(sigma, seed);
    s.domain = NoiseDomain::bayer_colored;
    return s;
}

Image<double> fixture_cfa_image() {
    Image<double> cfa(6, 6, 1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            cfa(x, y) = fixture::fixture_cfa(x, y);
    return cfa;
}

} // namespace

TEST(WhiteNoise, ZeroSigmaIsIdentity) {
    const auto img = fixture::random_image(16, 16, 3, 1);
    EXPECT_EQ(add_white_noise(img, white(0.0, 5), 1), img);
}

TEST(WhiteNoise, SeededAndThreadIndependent) {
    Image<double> img(64, 48, 3, 0.5);
    const auto a = add_white_noise(img, white(20, 7), 1);
    EXPECT_EQ(a, add_white_noise(img, white(20, 7), 4));
    EXPECT_NE(a, add_white_noise(img, white(20, 8), 1));
}

TEST(WhiteNoise, StandardDeviationAndPsnr) {
    Image<double> img(256, 256, 1, 0.5);
    const auto noisy = add_white_noise(img, white(20, 3), 1);
    double ss = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i)
        ss += std::pow(noisy.samples()[i] - 0.5, 2);
    EXPECT_NEAR(std::sqrt(ss / double(img.size())) * 255.0 / 20.0, 1.0, 0.02);
    EXPECT_NEAR(psnr(noisy, img), 22.11, 0.1);
    EXPECT_LT(std::abs(lag_autocorrelation(noisy, 1, 0)), 0.02);
    EXPECT_LT(std::abs(lag_autocorrelation(noisy, 0, 1)), 0.02);
}

TEST(WhiteNoise, ValuesNotClipped) {
    Image<double> img(64, 64, 1, 0.0);
    const auto noisy = add_white_noise(img, white(20, 3), 1);
    EXPECT_LT(minmax_sample(noisy).first, 0.0);
}

TEST(WhiteNoise, RejectsInvalidSpec) {
    Image<double> img(4, 4, 1, 0.5);
    EXPECT_THROW(add_white_noise(img, white(-1, 0), 1), std::invalid_argument);
    EXPECT_THROW(add_white_noise(img, bayer(1, 0), 1), std::invalid_argument);
}

TEST(Bayer, PatternParsing) {
    EXPECT_EQ(parse_bayer_pattern("RGGB"), BayerPattern::rggb);
    EXPECT_EQ(parse_bayer_pattern("bggr"), BayerPattern::bggr);
    EXPECT_EQ(to_string(BayerPattern::gbrg), "gbrg");
    EXPECT_THROW(parse_bayer_pattern("rgbg"), std::invalid_argument);
}

TEST(Bayer, MosaicSamplesOneChannelPerSite) {
    Image<double> img(2, 2, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c)
                img(x, y, c) = 0.1 * (c + 1) + 0.01 * (2 * y + x);
    const struct {
        BayerPattern p;
        int ch[4];
    } cases[] = {{BayerPattern::rggb, {0, 1, 1, 2}},
                 {BayerPattern::grbg, {1, 0, 2, 1}},
                 {BayerPattern::gbrg, {1, 2, 0, 1}},
                 {BayerPattern::bggr, {2, 1, 1, 0}}};
    for (const auto &c : cases) {
        const auto cfa = mosaic_bayer(img, c.p);
        for (int i = 0; i < 4; ++i)
            EXPECT_EQ(cfa(i % 2, i / 2), img(i % 2, i / 2, c.ch[i])) << to_string(c.p) << " site " << i;
    }
}

TEST(Bayer, RejectsOddSizesAndGray) {
    EXPECT_THROW(mosaic_bayer(Image<double>(5, 4, 3), BayerPattern::rggb), std::invalid_argument);
    EXPECT_THROW(mosaic_bayer(Image<double>(4, 4, 1), BayerPattern::rggb), std::invalid_argument);
    EXPECT_THROW(demosaic_malvar(Image<double>(4, 3, 1), BayerPattern::rggb), std::invalid_argument);
    EXPECT_THROW(demosaic_malvar(Image<double>(4, 4, 3), BayerPattern::rggb), std::invalid_argument);
}

TEST(Malvar, KernelsSumToOne) {
    for (const auto *k : {&malvar::g_at_rb, &malvar::rb_at_g_row, &malvar::rb_at_g_col, &malvar::rb_at_br}) {
        double sum = 0.0;
        for (const auto &row : *k)
            for (double w : row)
                sum += w;
        EXPECT_DOUBLE_EQ(sum, 1.0);
    }
}

TEST(Malvar, ConstantColorRoundTrip) {
    for (BayerPattern p : {BayerPattern::rggb, BayerPattern::grbg, BayerPattern::gbrg, BayerPattern::bggr}) {
        Image<double> img(8, 6, 3);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 8; ++x) {
                img(x, y, 0) = 0.25;
                img(x, y, 1) = 0.5;
                img(x, y, 2) = 0.75;
            }
        EXPECT_EQ(demosaic_malvar(mosaic_bayer(img, p), p), img) << to_string(p);
    }
}

TEST(Malvar, HandComputedFixture) {
    const auto out = demosaic_malvar(fixture_cfa_image(), BayerPattern::rggb);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_NEAR(out(x, y, c), fixture::kFixtureRgb[std::size_t(y)][std::size_t(3 * x + c)], 1e-12)
                    << x << "," << y << "," << c;
}

TEST(Malvar, NativeSamplesPassThrough) {
    const auto cfa = fixture::random_image(10, 8, 1, 3);
    for (BayerPattern p : {BayerPattern::grbg, BayerPattern::bggr}) {
        const auto out = demosaic_malvar(cfa, p);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 10; ++x)
                EXPECT_EQ(out(x, y, cfa_channel(p, x, y)), cfa(x, y));
    }
}

TEST(Malvar, Linear) {
    const auto a = fixture::random_image(12, 10, 1, 4);
    const auto b = fixture::random_image(12, 10, 1, 5);
    Image<double> sum(12, 10, 1);
    for (std::size_t i = 0; i < sum.size(); ++i)
        sum.samples()[i] = 2.0 * a.samples()[i] - 0.5 * b.samples()[i];
    const auto da = demosaic_malvar(a, BayerPattern::rggb);
    const auto db = demosaic_malvar(b, BayerPattern::rggb);
    const auto ds = demosaic_malvar(sum, BayerPattern::rggb);
    for (std::size_t i = 0; i < ds.size(); ++i)
        EXPECT_NEAR(ds.samples()[i], 2.0 * da.samples()[i] - 0.5 * db.samples()[i], 1e-14);
}

TEST(Malvar, SmoothGradientRoundTrip) {
    // one luminance ramp shared by all channels, constant chroma offsets
    Image<double> img(32, 24, 3);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c)
                img(x, y, c) = 0.1 + 0.2 * c + 0.01 * x + 0.005 * y;
    for (BayerPattern p : {BayerPattern::rggb, BayerPattern::gbrg}) {
        const auto out = demosaic_malvar(mosaic_bayer(img, p), p);
        EXPECT_LT(fixture::max_abs_diff(out, img), 2.0 / 255) << to_string(p);
    }
}

TEST(Malvar, ExactOnPerChannelPlanesAwayFromBorders) {
    Image<double> img(32, 24, 3);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x) {
            img(x, y, 0) = 0.2 + 0.01 * x + 0.005 * y;
            img(x, y, 1) = 0.3 + 0.008 * x + 0.01 * y;
            img(x, y, 2) = 0.7 - 0.006 * x - 0.004 * y;
        }
    const auto out = demosaic_malvar(mosaic_bayer(img, BayerPattern::rggb), BayerPattern::rggb);
    for (int y = 2; y < 22; ++y)
        for (int x = 2; x < 30; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_NEAR(out(x, y, c), img(x, y, c), 1e-12);
}

TEST(Malvar, TranslationByOneTileInTheInterior) {
    const auto cfa = fixture::random_image(20, 20, 1, 6);
    Image<double> shifted(18, 18, 1);
    for (int y = 0; y < 18; ++y)
        for (int x = 0; x < 18; ++x)
            shifted(x, y) = cfa(x + 2, y + 2);
    const auto a = demosaic_malvar(cfa, BayerPattern::rggb);
    const auto b = demosaic_malvar(shifted, BayerPattern::rggb);
    for (int y = 2; y < 16; ++y)
        for (int x = 2; x < 16; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(b(x, y, c), a(x + 2, y + 2, c));
}

TEST(SigmaPropagation, ClosedFormGains) {
    const auto s = propagate_sigma_rgb(20.0, BayerPattern::rggb);
    EXPECT_NEAR(s.r, 20.0 * std::sqrt(0.984375), 1e-12);
    EXPECT_NEAR(s.g, 20.0 * std::sqrt(0.78125), 1e-12);
    EXPECT_NEAR(s.b, s.r, 1e-12);
    EXPECT_EQ(propagate_sigma_rgb(0.0, BayerPattern::bggr).mean(), 0.0);
    EXPECT_THROW(propagate_sigma_rgb(-1.0, BayerPattern::rggb), std::invalid_argument);
}

TEST(SigmaPropagation, MatchesSimulation) {
    Image<double> flat(512, 512, 3, 0.5);
    const auto res = colored_noise_pipeline(flat, bayer(20, 1), BayerPattern::rggb, 1);
    for (int c = 0; c < 3; ++c) {
        double ss = 0.0;
        for (int y = 0; y < 512; ++y)
            for (int x = 0; x < 512; ++x)
                ss += std::pow(res.noisy(x, y, c) - 0.5, 2);
        const double measured = std::sqrt(ss / (512.0 * 512.0)) * 255.0;
        EXPECT_NEAR(measured / res.sigma[c], 1.0, 0.03) << "channel " << c;
    }
}

TEST(ColoredNoise, ZeroSigmaIsMosaicDemosaic) {
    const auto img = io::read_image(fixture::data_dir() / "color_coffee.png");
    const auto res = colored_noise_pipeline(img, bayer(0, 1), BayerPattern::grbg, 1);
    EXPECT_EQ(res.noisy, demosaic_malvar(mosaic_bayer(img, BayerPattern::grbg), BayerPattern::grbg));
    EXPECT_EQ(res.sigma.mean(), 0.0);
}

TEST(ColoredNoise, SpatiallyCorrelated) {
    Image<double> flat(256, 256, 3, 0.5);
    const auto res = colored_noise_pipeline(flat, bayer(20, 2), BayerPattern::rggb, 1);
    for (int c = 0; c < 3; ++c)
        EXPECT_GT(lag_autocorrelation(res.noisy, 1, 0, c), 0.1) << c;
}

TEST(ColoredNoise, ClippedCfaStaysInRange) {
    Image<double> flat(32, 32, 3, 0.02);
    NoiseSpec spec = bayer(20, 2);
    spec.clip_cfa = true;
    const auto res = colored_noise_pipeline(flat, spec, BayerPattern::rggb, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double native = res.noisy(x, y, cfa_channel(BayerPattern::rggb, x, y));
            EXPECT_GE(native, 0.0);
            EXPECT_LE(native, 1.0);
        }
    EXPECT_THROW(colored_noise_pipeline(flat, white(20, 2), BayerPattern::rggb, 1), std::invalid_argument);
}

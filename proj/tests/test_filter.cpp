#include <gtest/gtest.h>

#include <cmath>

#include "image_io.hpp"
#include "snn/filter.hpp"
#include "snn/metrics.hpp"
#include "test_support.hpp"

using namespace snn;

namespace {

NlmParams params(int patch, int search, int nn, double sigma, double offset) {
    NlmParams p;
    p.patch_side = patch;
    p.search_side = search;
    p.n_neighbors = nn;
    p.sigma = sigma;
    p.offset = offset;
    p.h = default_h(sigma);
    return p;
}

} // namespace

TEST(Weight, Examples) {
    NlmParams p;
    p.sigma = 0.1;
    p.h = 0.1;
    EXPECT_EQ(nlm_weight(0.0, p), 1.0);
    EXPECT_EQ(nlm_weight(0.02, p), 1.0);
    EXPECT_NEAR(nlm_weight(0.03, p), std::exp(-1.0), 1e-15);
    EXPECT_GT(nlm_weight(1e6, p), -1.0);
    EXPECT_LE(nlm_weight(1e6, p), 1.0);
}

TEST(DenoisePatch, SelfOnlyReturnsReference) {
    const auto img = fixture::random_image(5, 5, 3, 9);
    const auto p = params(3, 3, 1, 0.1, 1.0);
    NeighborSet<double> set{{1, 1, 3}, {{{1, 1, 3}, 0.0, 0.0}}};
    const auto est = denoise_patch(img, set, p);
    EXPECT_EQ(est.values, read_patch(img, {1, 1, 3}));
}

TEST(DenoisePatch, IdenticalNeighbors) {
    Image<double> img(2, 1, 1, std::vector<double>{0.3, 0.3});
    const auto p = params(1, 3, 2, 0.1, 1.0);
    NeighborSet<double> set{{0, 0, 1}, {{{0, 0, 1}, 0.0, 0.0}, {{1, 0, 1}, 0.0, 0.0}}};
    EXPECT_EQ(denoise_patch(img, set, p).values[0], 0.3);
}

TEST(DenoisePatch, WeightedOnePixelExample) {
    // values {0, 0.5, 1} at distances {0, 2 sigma^2, 2 sigma^2 + h^2}: weights {1, 1, 1/e}
    Image<double> img(3, 1, 1, std::vector<double>{0.0, 0.5, 1.0});
    NlmParams p = params(1, 3, 3, 0.1, 1.0);
    p.h = 0.2;
    const double s2 = 2 * 0.1 * 0.1;
    NeighborSet<double> set{{0, 0, 1},
                            {{{0, 0, 1}, 0.0, 0.0}, {{1, 0, 1}, s2, 0.0}, {{2, 0, 1}, s2 + 0.04, 0.0}}};
    EXPECT_NEAR(denoise_patch(img, set, p).values[0], 0.3665218026227227, 1e-15);
}

TEST(DenoisePatch, Errors) {
    const auto img = fixture::random_image(5, 5, 1, 9);
    const auto p = params(3, 3, 1, 0.1, 1.0);
    EXPECT_THROW(denoise_patch(img, NeighborSet<double>{{1, 1, 3}, {}}, p), std::invalid_argument);
    NeighborSet<double> outside{{1, 1, 3}, {{{3, 3, 3}, 0.0, 0.0}}};
    EXPECT_THROW(denoise_patch(img, outside, p), std::out_of_range);
}

TEST(DenoiseImage, ConstantImageUnchanged) {
    Image<double> img(20, 17, 3, 0.37);
    const auto out = denoise_image(img, params(3, 7, 8, 0.05, 1.0), Strategy::snn, 2);
    EXPECT_EQ(out, img);
}

TEST(DenoiseImage, NoiselessStepEdgeIsPreserved) {
    Image<double> img(32, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            img(x, y) = x < 16 ? 0.2 : 0.8;
    for (Strategy s : {Strategy::nn, Strategy::snn}) {
        const auto out = denoise_image(img, params(3, 21, 16, 0.0, 1.0), s, 1);
        EXPECT_LT(fixture::max_abs_diff(out, img), 1e-15) << to_string(s);
    }
}

TEST(DenoiseImage, MatchesReferenceImplementation) {
    for (int nc : {1, 3}) {
        const auto img = fixture::random_image(19, 14, nc, 40 + nc);
        for (Strategy s : {Strategy::nn, Strategy::snn}) {
            const auto p = params(3, 7, 9, 0.15, 0.8);
            const auto fast = denoise_image(img, p, s, 1);
            const auto ref = fixture::reference_nlm(img, p, s);
            EXPECT_LT(fixture::max_abs_diff(fast, ref), 1e-12) << "nc=" << nc << " " << to_string(s);
        }
    }
}

TEST(DenoiseImage, SmallerThanWindowUsesRepeatedReflection) {
    const auto img = fixture::random_image(4, 3, 1, 77);
    const auto p = params(3, 9, 6, 0.1, 1.0);
    EXPECT_LT(fixture::max_abs_diff(denoise_image(img, p, Strategy::snn, 1),
                                    fixture::reference_nlm(img, p, Strategy::snn)),
              1e-12);
}

TEST(DenoiseImage, OutputWithinInputRangeAndLocalRange) {
    const auto clean = io::read_image(fixture::data_dir() / "gray_camera.png");
    const auto noisy = fixture::gaussian_noise_on(clean, 20.0 / 255, 3);
    const auto p = params(3, 21, 16, 20.0 / 255, 1.0);
    const auto out = denoise_image(noisy, p, Strategy::snn, 2);
    const auto [lo, hi] = minmax_sample(noisy);
    const auto padded = pad_mirror(noisy, p.margin());
    const int m = p.margin();
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            double l = 1e9, h = -1e9;
            for (int j = -m; j <= m; ++j)
                for (int i = -m; i <= m; ++i) {
                    l = std::min(l, padded(x + m + i, y + m + j));
                    h = std::max(h, padded(x + m + i, y + m + j));
                }
            ASSERT_GE(out(x, y), l);
            ASSERT_LE(out(x, y), h);
            ASSERT_GE(out(x, y), lo);
            ASSERT_LE(out(x, y), hi);
        }
}

TEST(DenoiseImage, ThreadCountDoesNotChangeOutput) {
    const auto img = fixture::random_image(37, 29, 3, 5);
    const auto p = params(3, 9, 12, 0.1, 1.0);
    const auto one = denoise_image(img, p, Strategy::snn, 1);
    for (int t : {2, 3, 8})
        EXPECT_EQ(denoise_image(img, p, Strategy::snn, t), one) << t << " threads";
}

TEST(DenoiseImage, FullWindowMakesStrategiesIdentical) {
    const auto img = fixture::random_image(21, 18, 1, 6);
    const auto p = params(3, 7, 49, 0.1, 1.0);
    EXPECT_EQ(denoise_image(img, p, Strategy::snn, 1), denoise_image(img, p, Strategy::nn, 1));
}

TEST(DenoiseImage, InteriorTranslationEquivariance) {
    const auto big = fixture::random_image(40, 40, 1, 8);
    const auto p = params(3, 5, 6, 0.1, 1.0);
    const int shift = 3;
    Image<double> moved(40 - shift, 40, 1);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40 - shift; ++x)
            moved(x, y) = big(x + shift, y);
    const auto a = denoise_image(big, p, Strategy::snn, 1);
    const auto b = denoise_image(moved, p, Strategy::snn, 1);
    const int m = 2 * p.margin();
    for (int y = m; y < 40 - m; ++y)
        for (int x = m; x < 40 - shift - m; ++x)
            EXPECT_NEAR(b(x, y), a(x + shift, y), 1e-12);
}

TEST(DenoiseImage, SnnBeatsNnOnNoisyCrop) {
    const auto clean = io::read_image(fixture::data_dir() / "gray_coffee.png");
    const auto noisy = fixture::gaussian_noise_on(clean, 20.0 / 255, 12);
    const auto p = params(3, 21, 16, 20.0 / 255, 1.0);
    const double nn = psnr(denoise_image(noisy, p, Strategy::nn, 1), clean);
    const double snn = psnr(denoise_image(noisy, p, Strategy::snn, 1), clean);
    EXPECT_GT(snn, nn);
    EXPECT_GT(nn, psnr(noisy, clean));
}

TEST(DenoiseImage, InvalidParams) {
    const auto img = fixture::random_image(8, 8, 1, 1);
    auto p = params(3, 7, 50, 0.1, 1.0);
    EXPECT_THROW(denoise_image(img, p, Strategy::nn, 1), std::invalid_argument);
}

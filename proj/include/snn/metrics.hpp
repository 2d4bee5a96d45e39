#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "snn/image.hpp"

namespace snn {

struct QualityReport {
    double psnr = 0.0; // dB; +infinity for identical images
    double ssim = 0.0;
};

/// 10 log10(peak^2 / MSE) over all samples; +infinity when the images are identical.
template <typename T>
double psnr(const Image<T> &a, const Image<T> &b, double peak = 1.0) {
    if (!a.same_shape(b))
        throw std::invalid_argument("psnr: images differ in shape");
    double sse = 0.0;
    const auto sa = a.samples();
    const auto sb = b.samples();
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double d = double(sa[i]) - double(sb[i]);
        sse += d * d;
    }
    if (sse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / (sse / double(sa.size())));
}

/// BT.601 luma of an RGB image; single-channel images are returned unchanged.
template <typename T>
Image<T> to_luma(const Image<T> &img) {
    if (img.channels() == 1)
        return img;
    Image<T> out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out(x, y) = T(0.299 * img(x, y, 0) + 0.587 * img(x, y, 1) + 0.114 * img(x, y, 2));
    return out;
}

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Normalized 11x11 Gaussian (sigma 1.5) as a separable 1D kernel.
inline std::array<double, kSsimWindow> ssim_kernel() {
    std::array<double, kSsimWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double t = i - kSsimWindow / 2;
        k[std::size_t(i)] = std::exp(-t * t / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[std::size_t(i)];
    }
    for (double &v : k)
        v /= sum;
    return k;
}

/**
 * Single-scale SSIM (Wang et al. 2004): Gaussian-weighted local statistics,
 * averaged over every window position that fits inside the image. RGB inputs
 * are compared on their luma.
 */
template <typename T>
double ssim(const Image<T> &a, const Image<T> &b, double peak = 1.0) {
    if (!a.same_shape(b))
        throw std::invalid_argument("ssim: images differ in shape");
    if (a.width() < kSsimWindow || a.height() < kSsimWindow)
        throw std::invalid_argument("ssim: images smaller than the 11x11 window");
    const Image<T> la = to_luma(a);
    const Image<T> lb = to_luma(b);
    const int W = la.width();
    const int H = la.height();
    const int ow = W - kSsimWindow + 1;
    const int oh = H - kSsimWindow + 1;
    const auto k = ssim_kernel();
    const double c1 = (kSsimK1 * peak) * (kSsimK1 * peak);
    const double c2 = (kSsimK2 * peak) * (kSsimK2 * peak);

    // horizontal pass of x, y, x^2, y^2, xy
    std::vector<std::array<double, 5>> horiz(std::size_t(ow) * H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < ow; ++x) {
            std::array<double, 5> s{};
            for (int i = 0; i < kSsimWindow; ++i) {
                const double va = la(x + i, y);
                const double vb = lb(x + i, y);
                const double w = k[std::size_t(i)];
                s[0] += w * va;
                s[1] += w * vb;
                s[2] += w * va * va;
                s[3] += w * vb * vb;
                s[4] += w * va * vb;
            }
            horiz[std::size_t(y) * ow + x] = s;
        }

    double total = 0.0;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            std::array<double, 5> s{};
            for (int j = 0; j < kSsimWindow; ++j) {
                const auto &h = horiz[std::size_t(y + j) * ow + x];
                for (int m = 0; m < 5; ++m)
                    s[std::size_t(m)] += k[std::size_t(j)] * h[std::size_t(m)];
            }
            const double mx = s[0], my = s[1];
            const double vx = s[2] - mx * mx;
            const double vy = s[3] - my * my;
            const double cxy = s[4] - mx * my;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    return total / (double(ow) * oh);
}

template <typename T>
QualityReport quality(const Image<T> &test, const Image<T> &reference) {
    return {psnr(test, reference), ssim(test, reference)};
}

} // namespace snn

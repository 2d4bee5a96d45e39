#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "snn/image.hpp"
#include "snn/parallel.hpp"
#include "snn/search.hpp"

namespace snn {

/// exp(-max(0, d2 - 2 sigma^2) / h^2), always in (0, 1].
template <typename T>
T nlm_weight(T sq_distance, const NlmParams &p) noexcept {
    const T excess = std::max(T(0), sq_distance - T(2.0 * p.sigma * p.sigma));
    return std::exp(-excess / T(p.h * p.h));
}

template <typename T>
struct PatchEstimate {
    PatchRef ref;
    std::vector<T> values; // side*side*channels, same layout as read_patch
};

namespace detail {

/**
 * Weighted mean of the neighbor patches into `out`. Each element is clamped
 * to the range spanned by that element across the neighbors, which the exact
 * convex combination already satisfies; the clamp only absorbs rounding.
 */
template <typename T>
void weighted_patch_average(const Image<T> &img, std::span<const Neighbor<T>> neighbors,
                            const NlmParams &p, std::span<T> out, std::vector<T> &weights,
                            std::vector<T> &lo, std::vector<T> &hi) {
    const int nc = img.channels();
    const int side = p.patch_side;
    const std::size_t run = std::size_t(side) * nc;
    const std::size_t n_el = run * side;

    weights.resize(neighbors.size());
    T weight_sum = 0;
    for (std::size_t k = 0; k < neighbors.size(); ++k) {
        weights[k] = nlm_weight(neighbors[k].sq_distance, p);
        weight_sum += weights[k];
    }

    std::fill(out.begin(), out.begin() + std::ptrdiff_t(n_el), T(0));
    lo.assign(n_el, std::numeric_limits<T>::infinity());
    hi.assign(n_el, -std::numeric_limits<T>::infinity());
    for (std::size_t k = 0; k < neighbors.size(); ++k) {
        const PatchRef &g = neighbors[k].patch;
        const T w = weights[k];
        for (int dy = 0; dy < side; ++dy) {
            const T *src = img.row(g.y + dy).data() + std::size_t(g.x) * nc;
            T *dst = out.data() + std::size_t(dy) * run;
            T *l = lo.data() + std::size_t(dy) * run;
            T *h = hi.data() + std::size_t(dy) * run;
            for (std::size_t j = 0; j < run; ++j) {
                dst[j] += w * src[j];
                l[j] = std::min(l[j], src[j]);
                h[j] = std::max(h[j], src[j]);
            }
        }
    }
    for (std::size_t j = 0; j < n_el; ++j)
        out[j] = std::clamp(out[j] / weight_sum, lo[j], hi[j]);
}

} // namespace detail

/// Weighted average of the neighbor patches; the estimate of the reference patch.
template <typename T>
PatchEstimate<T> denoise_patch(const Image<T> &img, const NeighborSet<T> &neighbors, const NlmParams &p) {
    if (neighbors.empty())
        throw std::invalid_argument("denoise_patch: empty neighbor set");
    for (const auto &n : neighbors.entries)
        if (n.patch.side != p.patch_side || !contains(img, n.patch))
            throw std::out_of_range("denoise_patch: neighbor patch outside image or wrong side");
    PatchEstimate<T> est{neighbors.reference, std::vector<T>(std::size_t(patch_elements(img, p.patch_side)))};
    auto entries = neighbors.entries;
    std::sort(entries.begin(), entries.end(), [](const Neighbor<T> &a, const Neighbor<T> &b) {
        return a.patch.y < b.patch.y || (a.patch.y == b.patch.y && a.patch.x < b.patch.x);
    });
    std::vector<T> w, lo, hi;
    detail::weighted_patch_average<T>(img, entries, p, est.values, w, lo, hi);
    return est;
}

/// Output rows handled per aggregation band. Fixed, so the floating point
/// summation order never depends on the thread count.
inline constexpr int kBandRows = 8;

/**
 * Non-Local Means over every pixel (stride 1).
 *
 * Each pixel's patch is denoised from its selected neighbors, then every
 * output pixel is the uniform mean of all patch estimates covering it.
 * Borders are mirror padded so each reference owns a full search window.
 */
template <typename T>
Image<T> denoise_image(const Image<T> &img, const NlmParams &p, Strategy strategy,
                       int threads = default_threads()) {
    p.validate();
    const int W = img.width();
    const int H = img.height();
    const int nc = img.channels();
    const int pr = p.patch_radius();
    const int sr = p.search_radius();
    const int side = p.patch_side;
    const int K = p.candidates();
    const std::size_t row_len = std::size_t(W) * nc;
    const std::size_t run = std::size_t(side) * nc;
    const Image<T> padded = pad_mirror(img, p.margin());
    const T target = snn_target<T>(p, strategy);

    const int n_bands = (H + kBandRows - 1) / kBandRows;
    const int band_span = kBandRows + 2 * pr;
    // band b accumulates image rows [b*kBandRows - pr, b*kBandRows + kBandRows + pr)
    std::vector<std::vector<T>> bands(static_cast<std::size_t>(n_bands));

    parallel_chunks(std::size_t(n_bands), threads, [&](std::size_t b) {
        const int y0 = int(b) * kBandRows;
        const int y1 = std::min(H, y0 + kBandRows);
        std::vector<T> acc(std::size_t(band_span) * row_len, T(0));
        std::vector<T> dist, scratch, keys(static_cast<std::size_t>(K)), est(static_cast<std::size_t>(side) * run);
        std::vector<T> weights, lo, hi;
        std::vector<int> order;
        std::vector<Neighbor<T>> chosen;

        for (int y = y0; y < y1; ++y) {
            const PatchRef first{sr, y + sr, side};
            detail::row_sq_distances(padded, first, W, p, dist, scratch);
            for (int x = 0; x < W; ++x) {
                const std::span<const T> d2(dist.data() + std::size_t(x) * K, std::size_t(K));
                for (int k = 0; k < K; ++k)
                    keys[std::size_t(k)] = selection_key(d2[std::size_t(k)], target);
                select_smallest<T>(keys, p.n_neighbors, order);
                // average in raster order: the sum then depends on the selected set only
                std::sort(order.begin(), order.end());
                const PatchRef ref{x + sr, y + sr, side};
                chosen.clear();
                for (int k : order)
                    chosen.push_back({candidate_at(ref, p, k), d2[std::size_t(k)], keys[std::size_t(k)]});
                detail::weighted_patch_average<T>(padded, chosen, p, est, weights, lo, hi);

                // estimate element (py, px) belongs to image pixel (x - pr + px, y - pr + py)
                for (int py = 0; py < side; ++py) {
                    T *dst = acc.data() + std::size_t(y - y0 + py) * row_len;
                    const T *src = est.data() + std::size_t(py) * run;
                    for (int px = 0; px < side; ++px) {
                        const int ix = x - pr + px;
                        if (ix < 0 || ix >= W)
                            continue;
                        for (int c = 0; c < nc; ++c)
                            dst[std::size_t(ix) * nc + c] += src[std::size_t(px) * nc + c];
                    }
                }
            }
        }
        bands[b] = std::move(acc);
    });

    std::vector<T> sum(img.size(), T(0));
    for (int b = 0; b < n_bands; ++b) {
        const int top = b * kBandRows - pr;
        for (int r = 0; r < band_span; ++r) {
            const int iy = top + r;
            if (iy < 0 || iy >= H)
                continue;
            const T *src = bands[std::size_t(b)].data() + std::size_t(r) * row_len;
            T *dst = sum.data() + std::size_t(iy) * row_len;
            for (std::size_t j = 0; j < row_len; ++j)
                dst[j] += src[j];
        }
    }

    // number of reference patches (centers inside the image) covering a coordinate
    const auto cover = [pr](int i, int n) { return std::min(i + pr, n - 1) - std::max(i - pr, 0) + 1; };
    const auto [in_lo, in_hi] = minmax_sample(img);
    Image<T> out(W, H, nc);
    for (int y = 0; y < H; ++y) {
        const int cy = cover(y, H);
        for (int x = 0; x < W; ++x) {
            const T count = T(cy * cover(x, W));
            for (int c = 0; c < nc; ++c)
                out(x, y, c) = std::clamp(sum[img.index(x, y, c)] / count, in_lo, in_hi);
        }
    }
    return out;
}

} // namespace snn

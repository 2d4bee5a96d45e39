#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "snn/image.hpp"

namespace snn {

enum class Strategy { nn, snn };

constexpr std::string_view to_string(Strategy s) noexcept {
    return s == Strategy::nn ? "nn" : "snn";
}

template <typename T>
struct Neighbor {
    PatchRef patch;
    T sq_distance = 0;
    T key = 0; // value the entry was ranked by

    friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

template <typename T>
struct NeighborSet {
    PatchRef reference;
    std::vector<Neighbor<T>> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
    friend bool operator==(const NeighborSet &, const NeighborSet &) = default;
};

/// Squared distance the SNN criterion aims for: o * 2 sigma^2.
template <typename T>
T snn_target(const NlmParams &p, Strategy s) noexcept {
    return s == Strategy::nn ? T(0) : T(p.offset * 2.0 * p.sigma * p.sigma);
}

/// |d2 - target|; with target == 0 this is d2 itself, bit for bit.
template <typename T>
T selection_key(T sq_distance, T target) noexcept {
    return std::abs(sq_distance - target);
}

/// Candidate k of the window (raster order, row-major) relative to the reference top-left.
inline PatchRef candidate_at(const PatchRef &ref, const NlmParams &p, int k) noexcept {
    const int r = p.search_radius();
    return {ref.x + k % p.search_side - r, ref.y + k / p.search_side - r, ref.side};
}

/// Whether every candidate patch of the window around `ref` lies inside `img`.
template <typename T>
bool window_inside(const Image<T> &img, const PatchRef &ref, const NlmParams &p) noexcept {
    const int r = p.search_radius();
    return ref.side == p.patch_side && ref.x - r >= 0 && ref.y - r >= 0 &&
           ref.x + r + ref.side <= img.width() && ref.y + r + ref.side <= img.height();
}

/// Distances to every candidate in raster order, one patch_sq_distance call per candidate.
template <typename T>
std::vector<T> window_sq_distances(const Image<T> &img, const PatchRef &ref, const NlmParams &p) {
    if (!window_inside(img, ref, p))
        throw std::out_of_range("search window around reference patch leaves the image");
    std::vector<T> out(std::size_t(p.candidates()));
    for (int k = 0; k < p.candidates(); ++k)
        out[std::size_t(k)] = patch_sq_distance(img, ref, candidate_at(ref, p, k));
    return out;
}

/**
 * Writes into `order` the indices of the `count` smallest keys, ascending by
 * (key, index). The index tie-break makes the result a total order, so the
 * selection is identical on every platform.
 */
template <typename T>
void select_smallest(std::span<const T> keys, int count, std::vector<int> &order) {
    order.resize(keys.size());
    std::iota(order.begin(), order.end(), 0);
    const auto less = [&](int a, int b) {
        return keys[std::size_t(a)] < keys[std::size_t(b)] ||
               (keys[std::size_t(a)] == keys[std::size_t(b)] && a < b);
    };
    const auto n = std::min<std::size_t>(std::size_t(count), keys.size());
    std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(n), order.end(), less);
    order.resize(n);
}

/// Builds a NeighborSet from precomputed window distances.
template <typename T>
NeighborSet<T> select_neighbors(std::span<const T> sq_distances, const PatchRef &ref,
                                const NlmParams &p, Strategy s) {
    const T target = snn_target<T>(p, s);
    std::vector<T> keys(sq_distances.size());
    for (std::size_t k = 0; k < keys.size(); ++k)
        keys[k] = selection_key(sq_distances[k], target);
    std::vector<int> order;
    select_smallest<T>(keys, p.n_neighbors, order);
    NeighborSet<T> out;
    out.reference = ref;
    out.entries.reserve(order.size());
    for (int k : order)
        out.entries.push_back({candidate_at(ref, p, k), sq_distances[std::size_t(k)], keys[std::size_t(k)]});
    return out;
}

template <typename T>
NeighborSet<T> collect(const Image<T> &img, const PatchRef &ref, const NlmParams &p, Strategy s) {
    p.validate();
    const auto d2 = window_sq_distances(img, ref, p);
    return select_neighbors<T>(d2, ref, p, s);
}

/// The n_neighbors candidates with the smallest squared distance to `ref`.
template <typename T>
NeighborSet<T> collect_nn(const Image<T> &img, const PatchRef &ref, const NlmParams &p) {
    return collect(img, ref, p, Strategy::nn);
}

/// The n_neighbors candidates whose squared distance is closest to offset * 2 sigma^2.
template <typename T>
NeighborSet<T> collect_snn(const Image<T> &img, const PatchRef &ref, const NlmParams &p) {
    return collect(img, ref, p, Strategy::snn);
}

namespace detail {

/**
 * Window distances for a run of `count` horizontally adjacent reference
 * patches starting at `first` (top-left, padded coordinates).
 *
 * out[i * K + k] is the distance of reference i to candidate k. Squared
 * differences are computed once per candidate offset and shared by the
 * overlapping references; the per-reference summation visits elements in the
 * same order as patch_sq_distance, so results are bit-identical to it.
 */
template <typename T>
void row_sq_distances(const Image<T> &img, PatchRef first, int count, const NlmParams &p,
                      std::vector<T> &out, std::vector<T> &scratch) {
    const int nc = img.channels();
    const int side = p.patch_side;
    const int r = p.search_radius();
    const int K = p.candidates();
    const std::size_t span_len = std::size_t(count + side - 1) * nc;
    const std::size_t run = std::size_t(side) * nc;
    const T norm = T(side * side * nc);

    out.resize(std::size_t(count) * K);
    scratch.resize(span_len + std::size_t(count));
    T *const sums = scratch.data() + span_len;

    for (int k = 0; k < K; ++k) {
        const int dx = k % p.search_side - r;
        const int dy = k / p.search_side - r;
        std::fill(sums, sums + count, T(0));
        for (int py = 0; py < side; ++py) {
            const T *a = img.row(first.y + py).data() + std::size_t(first.x) * nc;
            const T *b = img.row(first.y + dy + py).data() + std::size_t(first.x + dx) * nc;
            for (std::size_t j = 0; j < span_len; ++j) {
                const T d = a[j] - b[j];
                scratch[j] = d * d;
            }
            for (int i = 0; i < count; ++i) {
                const T *s = scratch.data() + std::size_t(i) * nc;
                T acc = sums[i];
                for (std::size_t j = 0; j < run; ++j)
                    acc += s[j];
                sums[i] = acc;
            }
        }
        for (int i = 0; i < count; ++i)
            out[std::size_t(i) * K + k] = sums[i] / norm;
    }
}

} // namespace detail
} // namespace snn

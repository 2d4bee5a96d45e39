#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace snn {

/**
 * Row-major raster with interleaved channels (1 or 3).
 *
 * Samples are nominally in [0, 1]; values outside that range are kept as-is
 * (noise synthesis produces them) and only clipped on export.
 */
template <typename T = double>
class Image {
    static_assert(std::is_floating_point_v<T>, "Image samples must be floating point");

public:
    using value_type = T;

    Image() = default;

    Image(int width, int height, int channels, T fill = T(0))
        : width_(width), height_(height), channels_(channels) {
        check_shape(width, height, channels);
        data_.assign(std::size_t(width) * height * channels, fill);
    }

    Image(int width, int height, int channels, std::vector<T> data)
        : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
        check_shape(width, height, channels);
        if (data_.size() != std::size_t(width) * height * channels)
            throw std::invalid_argument("Image: data length does not match width*height*channels");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T &operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
    T operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

    std::size_t index(int x, int y, int c = 0) const noexcept {
        return (std::size_t(y) * width_ + x) * channels_ + c;
    }

    /// Samples of row y, all channels interleaved.
    std::span<const T> row(int y) const noexcept {
        return {data_.data() + std::size_t(y) * width_ * channels_, std::size_t(width_) * channels_};
    }
    std::span<T> row(int y) noexcept {
        return {data_.data() + std::size_t(y) * width_ * channels_, std::size_t(width_) * channels_};
    }

    std::span<const T> samples() const noexcept { return data_; }
    std::span<T> samples() noexcept { return data_; }

    bool same_shape(const Image &other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image &, const Image &) = default;

private:
    static void check_shape(int width, int height, int channels) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Image: width and height must be >= 1");
        if (channels != 1 && channels != 3)
            throw std::invalid_argument("Image: channels must be 1 or 3");
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

/// A square patch addressed by its top-left pixel. Never owns samples.
struct PatchRef {
    int x = 0;
    int y = 0;
    int side = 1;

    friend bool operator==(const PatchRef &, const PatchRef &) = default;
};

template <typename T>
bool contains(const Image<T> &img, const PatchRef &p) noexcept {
    return p.side >= 1 && p.x >= 0 && p.y >= 0 && p.x + p.side <= img.width() &&
           p.y + p.side <= img.height();
}

/// Element count of a patch across all channels (P in the distance normalization).
template <typename T>
int patch_elements(const Image<T> &img, int side) noexcept {
    return side * side * img.channels();
}

struct NlmParams {
    int patch_side = 3;
    int search_side = 21;
    int n_neighbors = 16;
    double offset = 1.0;
    double h = 0.15;
    double sigma = 0.2;

    int patch_radius() const noexcept { return patch_side / 2; }
    int search_radius() const noexcept { return search_side / 2; }
    int candidates() const noexcept { return search_side * search_side; }
    /// Padding that gives every pixel a full search window of full patches.
    int margin() const noexcept { return patch_radius() + search_radius(); }

    void validate() const {
        if (patch_side < 1 || patch_side % 2 == 0)
            throw std::invalid_argument("NlmParams: patch_side must be odd and >= 1");
        if (search_side < 1 || search_side % 2 == 0)
            throw std::invalid_argument("NlmParams: search_side must be odd and >= 1");
        if (patch_side > search_side)
            throw std::invalid_argument("NlmParams: patch_side must not exceed search_side");
        if (n_neighbors < 1 || n_neighbors > candidates())
            throw std::invalid_argument("NlmParams: n_neighbors must be in [1, search_side^2], got " +
                                        std::to_string(n_neighbors));
        if (!(offset >= 0.0 && offset <= 1.0))
            throw std::invalid_argument("NlmParams: offset must be in [0, 1]");
        if (!(h > 0.0) || !std::isfinite(h))
            throw std::invalid_argument("NlmParams: h must be > 0");
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("NlmParams: sigma must be >= 0");
    }
};

/// Default filtering parameter for a given noise level (0.75 sigma, floored at 0.75/255).
inline double default_h(double sigma) noexcept {
    return 0.75 * std::max(sigma, 1.0 / 255.0);
}

/// Reflects an out-of-range coordinate back into [0, n) without repeating the edge sample.
inline int reflect_index(int i, int n) noexcept {
    if (n == 1)
        return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - i;
}

template <typename T>
Image<T> pad_mirror(const Image<T> &img, int margin) {
    if (margin < 0)
        throw std::invalid_argument("pad_mirror: margin must be >= 0");
    if (margin == 0)
        return img;
    const int w = img.width() + 2 * margin;
    const int h = img.height() + 2 * margin;
    const int nc = img.channels();
    Image<T> out(w, h, nc);
    for (int y = 0; y < h; ++y) {
        const int sy = reflect_index(y - margin, img.height());
        for (int x = 0; x < w; ++x) {
            const int sx = reflect_index(x - margin, img.width());
            for (int c = 0; c < nc; ++c)
                out(x, y, c) = img(sx, sy, c);
        }
    }
    return out;
}

/// Copies the samples of a patch into a flat vector (row-major, channels interleaved).
template <typename T>
std::vector<T> read_patch(const Image<T> &img, const PatchRef &p) {
    if (!contains(img, p))
        throw std::out_of_range("read_patch: patch outside image");
    std::vector<T> out;
    out.reserve(std::size_t(patch_elements(img, p.side)));
    for (int dy = 0; dy < p.side; ++dy) {
        const auto r = img.row(p.y + dy).subspan(std::size_t(p.x) * img.channels(),
                                                 std::size_t(p.side) * img.channels());
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

/// Squared distance normalized by the element count: (1/P) * sum (a_i - b_i)^2.
/// Summation order: patch rows, then columns, then channels.
template <typename T>
T patch_sq_distance(const Image<T> &img, const PatchRef &a, const PatchRef &b) {
    if (a.side != b.side)
        throw std::invalid_argument("patch_sq_distance: patch sides differ");
    if (!contains(img, a) || !contains(img, b))
        throw std::out_of_range("patch_sq_distance: patch outside image");
    const int nc = img.channels();
    const std::size_t run = std::size_t(a.side) * nc;
    T sum = 0;
    for (int dy = 0; dy < a.side; ++dy) {
        const T *pa = img.row(a.y + dy).data() + std::size_t(a.x) * nc;
        const T *pb = img.row(b.y + dy).data() + std::size_t(b.x) * nc;
        for (std::size_t i = 0; i < run; ++i) {
            const T d = pa[i] - pb[i];
            sum += d * d;
        }
    }
    return sum / T(patch_elements(img, a.side));
}

template <typename T>
std::pair<T, T> minmax_sample(const Image<T> &img) {
    const auto [lo, hi] = std::minmax_element(img.samples().begin(), img.samples().end());
    return {*lo, *hi};
}

} // namespace snn

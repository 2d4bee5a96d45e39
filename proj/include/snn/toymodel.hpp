#pragma once

// Bias/variance of the single-pixel NLM estimator when neighbors are picked by
// nearest neighbors (NN) or statistical nearest neighbors (SNN).
//
// N noisy replicas x ~ G(mu, sigma^2) are available; a noisy reference mu_r
// collects n_neighbors of them and averages them. The selected samples are
// modeled as draws from G(mu, sigma^2) truncated to the interval(s) around
// mu_r that hold a fraction n_neighbors / N of the probability mass:
//   NN : [mu_r - d, mu_r + d]
//   SNN: [mu_r - o*sigma - d, mu_r - o*sigma + d] U [mu_r + o*sigma - d, mu_r + o*sigma + d]
// Integrating bias^2 and variance against the density of mu_r gives the
// expected prediction error. The Monte-Carlo routines below simulate the
// actual order-statistic selection and serve as an independent check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "snn/parallel.hpp"
#include "snn/search.hpp"

namespace snn::toy {

// ---------------------------------------------------------------------------
// Standard normal helpers

inline double normal_pdf(double x) noexcept {
    if (std::isinf(x))
        return 0.0;
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Phi(x) = 0.5 * erfc(-x / sqrt 2); accurate in the lower tail.
inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// 1 - Phi(x), accurate in the upper tail.
inline double normal_sf(double x) noexcept {
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

/// log(1 - Phi(x)); continued fraction once erfc would underflow.
inline double log_normal_sf(double x) noexcept {
    if (x < 30.0)
        return std::log(normal_sf(x));
    // Q(x) = phi(x) / (x + 1/(x + 2/(x + 3/(x + ...))))
    double cf = x;
    for (int k = 60; k >= 1; --k)
        cf = x + k / cf;
    return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(cf);
}

/// Phi(b) - Phi(a) without cancellation in either tail.
inline double gaussian_mass(double a, double b) noexcept {
    if (!(b > a))
        return 0.0;
    if (a >= 0.0)
        return normal_sf(a) - normal_sf(b);
    if (b <= 0.0)
        return normal_cdf(b) - normal_cdf(a);
    return 1.0 - normal_cdf(a) - normal_sf(b);
}

/// Moments of a standard normal truncated to [a, b].
struct TruncatedNormal {
    double mass = 0.0;     // Phi(b) - Phi(a)
    double mean = 0.0;
    double variance = 0.0;
    bool degenerate = false; // mass underflowed, moments from the log-space path
};

namespace detail {

inline double x_pdf(double x) noexcept { return std::isinf(x) ? 0.0 : x * normal_pdf(x); }

/// Upper-tail truncation [a, b], a >= 0, with all ratios taken relative to Q(a).
inline TruncatedNormal upper_tail_logspace(double a, double b) noexcept {
    const double log_qa = log_normal_sf(a);
    const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
    const double ra = std::exp(-0.5 * a * a - log_norm - log_qa); // phi(a) / Q(a)
    const double rb = std::isinf(b) ? 0.0 : std::exp(-0.5 * b * b - log_norm - log_qa);
    const double qb = std::isinf(b) ? 0.0 : std::exp(log_normal_sf(b) - log_qa);
    const double z = 1.0 - qb; // (Phi(b) - Phi(a)) / Q(a)
    TruncatedNormal t;
    t.degenerate = true;
    t.mass = std::exp(log_qa) * z;
    t.mean = (ra - rb) / z;
    const double brb = std::isinf(b) ? 0.0 : b * rb;
    t.variance = std::max(0.0, 1.0 + (a * ra - brb) / z - t.mean * t.mean);
    return t;
}

} // namespace detail

inline TruncatedNormal truncated_normal(double a, double b) {
    if (!(b > a))
        throw std::invalid_argument("truncated_normal: empty interval");
    constexpr double kNarrow = 1e-7;
    if (std::isfinite(a) && std::isfinite(b) && b - a < kNarrow) {
        // interval this narrow is effectively uniform; avoids 0/0 in the ratios
        const double w = b - a;
        return {gaussian_mass(a, b), 0.5 * (a + b), w * w / 12.0, false};
    }
    TruncatedNormal t;
    t.mass = gaussian_mass(a, b);
    if (t.mass > 1e-250) {
        const double pa = normal_pdf(a);
        const double pb = normal_pdf(b);
        t.mean = (pa - pb) / t.mass;
        t.variance = std::max(0.0, 1.0 + (detail::x_pdf(a) - detail::x_pdf(b)) / t.mass - t.mean * t.mean);
        return t;
    }
    if (a >= 0.0)
        return detail::upper_tail_logspace(a, b);
    // lower tail: mirror onto the upper one
    TruncatedNormal m = detail::upper_tail_logspace(-b, -a);
    m.mean = -m.mean;
    return m;
}

// ---------------------------------------------------------------------------
// Scenario and results

struct ToyScenario {
    double mu = 1.0;
    double sigma = 0.2;
    int n_total = 100;
    int n_neighbors = 16;
    double offset = 1.0;

    double fraction() const noexcept { return double(n_neighbors) / double(n_total); }

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("ToyScenario: sigma must be > 0");
        if (n_neighbors < 1 || n_neighbors > n_total)
            throw std::invalid_argument("ToyScenario: need 1 <= n_neighbors <= n_total");
        if (!(offset >= 0.0) || !std::isfinite(offset))
            throw std::invalid_argument("ToyScenario: offset must be >= 0");
        if (!std::isfinite(mu))
            throw std::invalid_argument("ToyScenario: mu must be finite");
    }
};

struct EstimatorMoments {
    double expectation = 0.0;
    double variance = 0.0;
    bool degenerate = false;
};

struct PredictionError {
    double bias_sq = 0.0;
    double variance = 0.0;
    double mse = 0.0;
};

struct HalfWidth {
    double d = 0.0;
    double residual = 0.0; // |mass(d) - n_neighbors / N|
    int iterations = 0;
};

inline constexpr int kMaxBisection = 200;
inline constexpr double kResidualTolerance = 1e-12;

namespace detail {

/// Mass of G(mu, sigma^2) inside [center - d, center + d].
inline double interval_mass(const ToyScenario &s, double center, double d) noexcept {
    return gaussian_mass((center - d - s.mu) / s.sigma, (center + d - s.mu) / s.sigma);
}

/// Mass of the two SNN intervals; merged into one interval once they touch.
inline double snn_mass(const ToyScenario &s, double mu_r, double d) noexcept {
    const double shift = s.offset * s.sigma;
    const double left = mu_r - shift;
    const double right = mu_r + shift;
    if (d >= shift)
        return gaussian_mass((left - d - s.mu) / s.sigma, (right + d - s.mu) / s.sigma);
    return interval_mass(s, left, d) + interval_mass(s, right, d);
}

/// Bisection on (0, 20 sigma] for the increasing function mass(d) = target.
template <typename Mass>
HalfWidth bisect_half_width(const ToyScenario &s, Mass &&mass) {
    s.validate();
    const double target = s.fraction();
    if (target >= 1.0)
        throw std::domain_error("half-width solver: n_neighbors / N must be < 1 (no bracket)");
    double lo = 0.0;
    double hi = 20.0 * s.sigma;
    if (mass(hi) < target)
        throw std::domain_error("half-width solver: no bracket in (0, 20 sigma]");
    HalfWidth out;
    for (; out.iterations < kMaxBisection; ++out.iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (mass(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double r_lo = std::abs(mass(lo) - target);
    const double r_hi = std::abs(mass(hi) - target);
    out.d = r_lo < r_hi ? lo : hi;
    out.residual = std::min(r_lo, r_hi);
    if (!(out.residual < kResidualTolerance))
        throw std::runtime_error("half-width solver: residual " + std::to_string(out.residual) +
                                 " above tolerance");
    return out;
}

inline EstimatorMoments from_truncated(const ToyScenario &s, const TruncatedNormal &t) {
    return {s.mu + s.sigma * t.mean, s.sigma * s.sigma * t.variance / s.n_neighbors, t.degenerate};
}

} // namespace detail

/// Half-width d of [mu_r - d, mu_r + d] holding mass n_neighbors / N.
inline HalfWidth solve_d_nn(const ToyScenario &s, double mu_r) {
    return detail::bisect_half_width(s, [&](double d) { return detail::interval_mass(s, mu_r, d); });
}

/// Common half-width d of the two intervals centered at mu_r -/+ offset*sigma.
inline HalfWidth solve_d_snn(const ToyScenario &s, double mu_r) {
    return detail::bisect_half_width(s, [&](double d) { return detail::snn_mass(s, mu_r, d); });
}

/// Expectation and variance of the mean of the NN-selected samples.
inline EstimatorMoments nn_moments(const ToyScenario &s, double mu_r) {
    s.validate();
    if (s.n_neighbors == s.n_total) // every sample selected
        return {s.mu, s.sigma * s.sigma / s.n_total, false};
    const double d = solve_d_nn(s, mu_r).d;
    const auto t = truncated_normal((mu_r - d - s.mu) / s.sigma, (mu_r + d - s.mu) / s.sigma);
    return detail::from_truncated(s, t);
}

/// Expectation and variance of the mean of the SNN-selected samples (mixture
/// of two truncated Gaussians, or a single one once the intervals overlap).
inline EstimatorMoments snn_moments(const ToyScenario &s, double mu_r) {
    s.validate();
    if (s.n_neighbors == s.n_total)
        return {s.mu, s.sigma * s.sigma / s.n_total, false};
    const double d = solve_d_snn(s, mu_r).d;
    const double shift = s.offset * s.sigma;
    const double left = mu_r - shift;
    const double right = mu_r + shift;
    if (d >= shift) {
        const auto t = truncated_normal((left - d - s.mu) / s.sigma, (right + d - s.mu) / s.sigma);
        return detail::from_truncated(s, t);
    }
    const auto l = truncated_normal((left - d - s.mu) / s.sigma, (left + d - s.mu) / s.sigma);
    const auto r = truncated_normal((right - d - s.mu) / s.sigma, (right + d - s.mu) / s.sigma);
    const double total = l.mass + r.mass;
    const double wl = l.mass / total;
    const double wr = r.mass / total;
    // standardized mixture moments (law of total variance)
    const double mean = wl * l.mean + wr * r.mean;
    const double spread = l.mean - r.mean;
    const double var = wl * l.variance + wr * r.variance + wl * wr * spread * spread;
    return {s.mu + s.sigma * mean, s.sigma * s.sigma * var / s.n_neighbors, l.degenerate || r.degenerate};
}

inline EstimatorMoments moments(const ToyScenario &s, Strategy strategy, double mu_r) {
    return strategy == Strategy::nn ? nn_moments(s, mu_r) : snn_moments(s, mu_r);
}

inline constexpr int kQuadratureNodes = 4001;
inline constexpr double kQuadratureHalfRange = 8.0; // in units of sigma

/// Integrated bias^2 and variance of the estimator, weighted by the density of
/// mu_r (composite Simpson on mu +/- 8 sigma).
inline PredictionError prediction_error(const ToyScenario &s, Strategy strategy,
                                        int nodes = kQuadratureNodes) {
    s.validate();
    if (nodes < 3 || nodes % 2 == 0)
        throw std::invalid_argument("prediction_error: Simpson needs an odd node count >= 3");
    const double lo = s.mu - kQuadratureHalfRange * s.sigma;
    const double step = 2.0 * kQuadratureHalfRange * s.sigma / (nodes - 1);
    double bias = 0.0;
    double var = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double mu_r = lo + i * step;
        const double weight = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double density = normal_pdf((mu_r - s.mu) / s.sigma) / s.sigma;
        const auto m = moments(s, strategy, mu_r);
        const double b = m.expectation - s.mu;
        bias += weight * density * b * b;
        var += weight * density * m.variance;
    }
    PredictionError e;
    e.bias_sq = bias * step / 3.0;
    e.variance = var * step / 3.0;
    e.mse = e.bias_sq + e.variance;
    return e;
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracle

inline constexpr std::size_t kTrialsPerStream = 1u << 14;

namespace detail {

struct SimulationScratch {
    std::vector<double> keys, values, work;
};

/// Fills pool.values with the N candidates: `mu_r` itself, then n_total - 1 draws of G(mu, sigma^2).
template <typename Rng>
void draw_candidates(const ToyScenario &s, double mu_r, Rng &rng, boost::random::normal_distribution<double> &unit,
                     SimulationScratch &pool) {
    pool.values.resize(std::size_t(s.n_total));
    pool.values[0] = mu_r;
    for (std::size_t i = 1; i < pool.values.size(); ++i)
        pool.values[i] = s.mu + s.sigma * unit(rng);
}

/**
 * k-th smallest value (0-based) of `a`, reordering it. Quickselect with a
 * branch-free Lomuto partition: on random keys this is several times faster
 * than std::nth_element, whose comparisons mispredict about half the time.
 */
inline double kth_smallest(std::span<double> a, std::size_t k) {
    std::size_t lo = 0, hi = a.size() - 1;
    while (hi > lo) {
        // median of three, moved to a[hi] as the pivot
        const std::size_t mid = lo + (hi - lo) / 2;
        if (a[mid] < a[lo])
            std::swap(a[mid], a[lo]);
        if (a[hi] < a[lo])
            std::swap(a[hi], a[lo]);
        if (a[mid] < a[hi])
            std::swap(a[mid], a[hi]);
        const double pivot = a[hi];
        std::size_t store = lo;
        for (std::size_t i = lo; i < hi; ++i) {
            const double v = a[i];
            a[i] = a[store];
            a[store] = v;
            store += v < pivot;
        }
        std::swap(a[store], a[hi]);
        if (store == k)
            return a[k];
        if (k < store)
            hi = store - 1;
        else
            lo = store + 1;
    }
    return a[k];
}

/// Mean of the n_neighbors candidates with the smallest selection key (ties by
/// draw order). NN key: |x - mu_r|. SNN key: ||x - mu_r| - offset * sigma|.
inline double select_mean(const ToyScenario &s, Strategy strategy, double mu_r, SimulationScratch &pool) {
    const double shift = strategy == Strategy::nn ? 0.0 : s.offset * s.sigma;
    const std::size_t n = pool.values.size();
    pool.keys.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        pool.keys[i] = std::abs(std::abs(pool.values[i] - mu_r) - shift);
    double threshold = std::numeric_limits<double>::infinity();
    if (s.n_neighbors < s.n_total) {
        pool.work.assign(pool.keys.begin(), pool.keys.end());
        threshold = kth_smallest(pool.work, std::size_t(s.n_neighbors - 1));
    }
    double sum = 0.0;
    int taken = 0;
    for (std::size_t i = 0; i < n; ++i) { // branch-free: the mask is unpredictable
        const bool in = pool.keys[i] < threshold;
        sum += in ? pool.values[i] : 0.0;
        taken += in;
    }
    for (std::size_t i = 0; i < n && taken < s.n_neighbors; ++i)
        if (pool.keys[i] == threshold) {
            sum += pool.values[i];
            ++taken;
        }
    return sum / s.n_neighbors;
}

template <typename Rng>
double simulate_estimate(const ToyScenario &s, Strategy strategy, double mu_r, Rng &rng,
                         boost::random::normal_distribution<double> &unit, SimulationScratch &pool) {
    draw_candidates(s, mu_r, rng, unit, pool);
    return select_mean(s, strategy, mu_r, pool);
}

/// Running mean / M2 (Welford), mergeable in a fixed order (Chan et al.).
struct Accumulator {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        n += 1.0;
        const double delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    void merge(const Accumulator &o) noexcept {
        if (o.n == 0.0)
            return;
        const double total = n + o.n;
        const double delta = o.mean - mean;
        mean += delta * o.n / total;
        m2 += o.m2 + delta * delta * n * o.n / total;
        n = total;
    }
    double variance() const noexcept { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
};

} // namespace detail

struct OracleEstimate {
    PredictionError error;
    double mse_stderr = 0.0;
    std::size_t trials = 0;
};

/**
 * Empirical prediction error. Each trial draws mu_r ~ G(mu, sigma^2) and then
 * two conditionally independent neighbor draws (estimates e1, e2, centered on
 * mu). e1*e2 is unbiased for the squared conditional bias and (e1 - e2)^2 / 2
 * for the conditional variance; their sum is the per-trial squared error.
 * Trials run in fixed-size streams seeded from (seed, stream index), so the
 * result depends on the seed only.
 */
inline OracleEstimate mc_oracle(const ToyScenario &s, Strategy strategy, std::size_t trials,
                                std::uint64_t seed, int threads = default_threads()) {
    s.validate();
    if (trials < 1)
        throw std::invalid_argument("mc_oracle: trials must be >= 1");
    const std::size_t n_streams = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
    struct Partial {
        detail::Accumulator bias, var, mse;
    };
    std::vector<Partial> parts(n_streams);
    parallel_chunks(n_streams, threads, [&](std::size_t k) {
        boost::random::mt19937_64 rng(mix_seed(seed, k));
        boost::random::normal_distribution<double> unit(0.0, 1.0);
        detail::SimulationScratch pool;
        const std::size_t begin = k * kTrialsPerStream;
        const std::size_t end = std::min(trials, begin + kTrialsPerStream);
        Partial &p = parts[k];
        for (std::size_t t = begin; t < end; ++t) {
            const double mu_r = s.mu + s.sigma * unit(rng);
            const double e1 = detail::simulate_estimate(s, strategy, mu_r, rng, unit, pool) - s.mu;
            const double e2 = detail::simulate_estimate(s, strategy, mu_r, rng, unit, pool) - s.mu;
            const double half_diff_sq = 0.5 * (e1 - e2) * (e1 - e2);
            p.bias.add(e1 * e2);
            p.var.add(half_diff_sq);
            p.mse.add(e1 * e2 + half_diff_sq);
        }
    });
    Partial total;
    for (const auto &p : parts) {
        total.bias.merge(p.bias);
        total.var.merge(p.var);
        total.mse.merge(p.mse);
    }
    OracleEstimate out;
    out.trials = trials;
    out.error.variance = total.var.mean;
    out.error.bias_sq = total.bias.mean;
    if (out.error.bias_sq < 0.0) { // possible for tiny trial counts
        out.error.variance += out.error.bias_sq;
        out.error.bias_sq = 0.0;
        out.error.variance = std::max(0.0, out.error.variance);
    }
    out.error.mse = out.error.bias_sq + out.error.variance;
    out.mse_stderr = std::sqrt(total.mse.variance() / double(trials));
    return out;
}

struct ConditionalEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double mean_stderr = 0.0;
    std::size_t trials = 0;
};

/// Empirical mean and variance of the estimator for a fixed reference value mu_r.
inline ConditionalEstimate mc_conditional_moments(const ToyScenario &s, Strategy strategy, double mu_r,
                                                  std::size_t trials, std::uint64_t seed,
                                                  int threads = default_threads()) {
    s.validate();
    if (trials < 2)
        throw std::invalid_argument("mc_conditional_moments: trials must be >= 2");
    const std::size_t n_streams = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
    std::vector<detail::Accumulator> parts(n_streams);
    parallel_chunks(n_streams, threads, [&](std::size_t k) {
        boost::random::mt19937_64 rng(mix_seed(seed, k));
        boost::random::normal_distribution<double> unit(0.0, 1.0);
        detail::SimulationScratch pool;
        const std::size_t begin = k * kTrialsPerStream;
        const std::size_t end = std::min(trials, begin + kTrialsPerStream);
        for (std::size_t t = begin; t < end; ++t)
            parts[k].add(detail::simulate_estimate(s, strategy, mu_r, rng, unit, pool));
    });
    detail::Accumulator total;
    for (const auto &p : parts)
        total.merge(p);
    return {total.mean, total.variance(), std::sqrt(total.variance() / double(trials)), trials};
}

struct ConditionalPair {
    ConditionalEstimate nn;
    ConditionalEstimate snn;
};

/// Both strategies evaluated on the same candidate draws. With the same seed
/// each half equals mc_conditional_moments for that strategy, at half the
/// sampling cost.
inline ConditionalPair mc_conditional_moments_paired(const ToyScenario &s, double mu_r, std::size_t trials,
                                                     std::uint64_t seed, int threads = default_threads()) {
    s.validate();
    if (trials < 2)
        throw std::invalid_argument("mc_conditional_moments_paired: trials must be >= 2");
    const std::size_t n_streams = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
    std::vector<std::pair<detail::Accumulator, detail::Accumulator>> parts(n_streams);
    parallel_chunks(n_streams, threads, [&](std::size_t k) {
        boost::random::mt19937_64 rng(mix_seed(seed, k));
        boost::random::normal_distribution<double> unit(0.0, 1.0);
        detail::SimulationScratch pool;
        const std::size_t begin = k * kTrialsPerStream;
        const std::size_t end = std::min(trials, begin + kTrialsPerStream);
        for (std::size_t t = begin; t < end; ++t) {
            detail::draw_candidates(s, mu_r, rng, unit, pool);
            parts[k].first.add(detail::select_mean(s, Strategy::nn, mu_r, pool));
            parts[k].second.add(detail::select_mean(s, Strategy::snn, mu_r, pool));
        }
    });
    detail::Accumulator nn, sn;
    for (const auto &p : parts) {
        nn.merge(p.first);
        sn.merge(p.second);
    }
    const auto pack = [&](const detail::Accumulator &a) {
        return ConditionalEstimate{a.mean, a.variance(), std::sqrt(a.variance() / double(trials)), trials};
    };
    return {pack(nn), pack(sn)};
}

// ---------------------------------------------------------------------------

/// Approximate expected (root-mean) distance between two noisy replicas of a
/// patch with p elements: sigma * sqrt(2p - 1) / sqrt(p). Equals sigma for p = 1.
inline double expected_distance_fischer(double sigma, int p) {
    if (p < 1)
        throw std::invalid_argument("expected_distance_fischer: p must be >= 1");
    if (!(sigma >= 0.0))
        throw std::invalid_argument("expected_distance_fischer: sigma must be >= 0");
    return sigma * std::sqrt(2.0 * p - 1.0) / std::sqrt(double(p));
}

struct CurvePoint {
    double mu_r = 0.0;
    double e_nn = 0.0;
    double std_nn = 0.0;
    double e_snn = 0.0;
    double std_snn = 0.0;
};

/// E and Std of both estimators over an evenly spaced mu_r grid.
inline std::vector<CurvePoint> moment_curve(const ToyScenario &s, double lo, double hi, int points) {
    if (points < 2)
        throw std::invalid_argument("moment_curve: need at least 2 points");
    std::vector<CurvePoint> out;
    out.reserve(std::size_t(points));
    for (int i = 0; i < points; ++i) {
        const double mu_r = lo + (hi - lo) * i / (points - 1);
        const auto nn = nn_moments(s, mu_r);
        const auto sn = snn_moments(s, mu_r);
        out.push_back({mu_r, nn.expectation, std::sqrt(nn.variance), sn.expectation, std::sqrt(sn.variance)});
    }
    return out;
}

} // namespace snn::toy

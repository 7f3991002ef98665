#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Scalar statistics helpers shared by the whole library: normal and
// chi-square tail functions, streaming moments, and seeded RNG streams.

namespace learnfx::stats {

inline constexpr double kSqrt2 = 1.4142135623730951;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

inline double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

/// Two-sided p-value for a standard normal statistic.
inline double two_sided_p(double z) { return std::erfc(std::fabs(z) / kSqrt2); }

/// Inverse of the standard normal CDF (Acklam's rational approximation
/// plus one Halley refinement, accurate to ~1e-15).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    }
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against erfc.
    constexpr double sqrt_two_pi = 2.5066282746310002;
    double e = 0.5 * std::erfc(-x / kSqrt2) - p;
    double u = e * sqrt_two_pi * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

namespace detail {

inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 1000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Upper tail P(X > x) of a chi-square distribution with `dof` degrees of freedom.
inline double chi_square_sf(double x, int dof) {
    if (dof < 1) throw std::invalid_argument("chi_square_sf: dof must be >= 1");
    if (x < 0.0) throw std::invalid_argument("chi_square_sf: x must be >= 0");
    if (x == 0.0) return 1.0;
    double a = 0.5 * dof;
    double hx = 0.5 * x;
    if (hx < a + 1.0) return 1.0 - detail::gamma_p_series(a, hx);
    return detail::gamma_q_cf(a, hx);
}

/// Welford accumulator for mean and sample variance.
struct RunningStat {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double sample_variance() const {
        if (n < 2) throw std::domain_error("sample_variance: need at least 2 observations");
        return m2 / static_cast<double>(n - 1);
    }
    double variance_of_mean() const { return sample_variance() / static_cast<double>(n); }
};

inline std::pair<double, double> mean_and_sample_variance(std::span<const double> xs) {
    RunningStat s;
    for (double x : xs) s.add(x);
    return {s.mean, s.sample_variance()};
}

inline double mean(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median: empty input");
    std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.end());
    return 0.5 * (xs[mid - 1] + hi);
}

// ---------------------------------------------------------------------------
// Seeded random streams. Replicate r of a run with seed s always draws from
// stream derive_stream_seed(s, r), so results do not depend on scheduling.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s += stream * 0xd1342543de82ef95ULL;
    std::uint64_t b = splitmix64(s);
    return a ^ b;
}

class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

    static RandomStream substream(std::uint64_t seed, std::uint64_t index) {
        return RandomStream(derive_stream_seed(seed, index));
    }

    double gauss() { return normal_(eng_); }
    double gauss(double mean, double sd) { return mean + sd * normal_(eng_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    std::uint64_t next_index(std::uint64_t bound) {
        return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(eng_);
    }
    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string digest_hex(std::string_view bytes) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return std::string(buf);
}

}  // namespace learnfx::stats

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "filters.hpp"

namespace wavedecon {

enum class Family { coiflet, daubechies };

inline std::string_view family_name(Family f) {
    return f == Family::coiflet ? "coiflet" : "daubechies";
}

/// Compactly supported orthonormal father wavelet described by its two-scale
/// filter: phi(x) = sqrt(2) sum_n filter[n] phi(2x - (n + support_min)).
struct WaveletBasis {
    Family family = Family::coiflet;
    int order = 0;
    std::vector<double> filter;
    int support_min = 0;
    int support_max = 0;
    /// Largest integer r with |F(phi)(t)| (1 + |t|)^r bounded.
    int regularity = 0;
    /// Measured polynomial decay exponent of |F(phi)|.
    double fourier_decay = 0.0;
    /// Vanishing moments of the associated mother wavelet.
    int vanishing_moments = 0;

    /// Radius A of the smallest symmetric interval [-A, A] holding the support.
    int radius() const { return std::max(std::abs(support_min), std::abs(support_max)); }
    int support_length() const { return support_max - support_min; }
    /// Highest polynomial degree reproduced exactly by the shifts of phi.
    int reproduction_degree() const { return vanishing_moments - 1; }

    std::string name() const {
        return (family == Family::coiflet ? "coif" : "db") + std::to_string(order);
    }
};

namespace detail {

struct CatalogEntry {
    Family family;
    int order;
    std::span<const double> filter;
    int shift;
    double decay;
};

inline const std::array<CatalogEntry, 14>& catalog() {
    using namespace filters;
    // decay exponents measured from the sup of |F(phi)| over octaves in [2^8, 2^14]
    static const std::array<CatalogEntry, 14> entries{{
        {Family::coiflet, 1, kCoif1, -2, 1.36},
        {Family::coiflet, 2, kCoif2, -4, 1.97},
        {Family::coiflet, 3, kCoif3, -6, 2.53},
        {Family::coiflet, 4, kCoif4, -8, 3.06},
        {Family::coiflet, 5, kCoif5, -10, 3.57},
        {Family::daubechies, 2, kDaub2, 0, 1.34},
        {Family::daubechies, 3, kDaub3, 0, 1.63},
        {Family::daubechies, 4, kDaub4, 0, 1.91},
        {Family::daubechies, 5, kDaub5, 0, 2.17},
        {Family::daubechies, 6, kDaub6, 0, 2.43},
        {Family::daubechies, 7, kDaub7, 0, 2.68},
        {Family::daubechies, 8, kDaub8, 0, 2.92},
        {Family::daubechies, 9, kDaub9, 0, 3.16},
        {Family::daubechies, 10, kDaub10, 0, 3.40},
    }};
    return entries;
}

}  // namespace detail

/// Looks up a basis in the embedded catalog (coiflets 1-5, Daubechies 2-10).
inline WaveletBasis load_wavelet(Family family, int order) {
    for (const auto& e : detail::catalog()) {
        if (e.family != family || e.order != order) continue;
        WaveletBasis b;
        b.family = family;
        b.order = order;
        b.filter.assign(e.filter.begin(), e.filter.end());
        b.support_min = e.shift;
        b.support_max = e.shift + static_cast<int>(b.filter.size()) - 1;
        b.fourier_decay = e.decay;
        b.regularity = static_cast<int>(std::floor(e.decay));
        b.vanishing_moments = family == Family::coiflet ? 2 * order : order;
        return b;
    }
    throw ConfigError("unknown order " + std::to_string(order) + " for " +
                      std::string(family_name(family)) + " wavelets");
}

/// Parses "coif5", "coiflet5", "db4", "daubechies4" (case sensitive).
inline WaveletBasis load_wavelet(std::string_view spec) {
    auto split = [&](std::string_view prefix) -> int {
        auto digits = spec.substr(prefix.size());
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                           [](char c) { return c >= '0' && c <= '9'; }))
            throw ConfigError("malformed wavelet spec '" + std::string(spec) + "'");
        return std::stoi(std::string(digits));
    };
    for (std::string_view p : {"coiflet", "coif"})
        if (spec.starts_with(p)) return load_wavelet(Family::coiflet, split(p));
    for (std::string_view p : {"daubechies", "db"})
        if (spec.starts_with(p)) return load_wavelet(Family::daubechies, split(p));
    throw ConfigError("unknown wavelet family in '" + std::string(spec) + "'");
}

/// Builds a basis from an arbitrary orthonormal filter (used for small
/// hand-checkable cases such as Haar).
inline WaveletBasis custom_wavelet(std::vector<double> filter, int support_min,
                                   int vanishing_moments, double fourier_decay) {
    if (filter.size() < 2) throw ConfigError("filter needs at least two taps");
    WaveletBasis b;
    b.family = Family::daubechies;
    b.order = 0;
    b.filter = std::move(filter);
    b.support_min = support_min;
    b.support_max = support_min + static_cast<int>(b.filter.size()) - 1;
    b.fourier_decay = fourier_decay;
    b.regularity = static_cast<int>(std::floor(fourier_decay));
    b.vanishing_moments = vanishing_moments;
    return b;
}

/// Multi-scale resolution index j = (j_1, ..., j_d).
struct ResolutionIndex {
    std::vector<int> levels;

    ResolutionIndex() = default;
    explicit ResolutionIndex(std::vector<int> l) : levels(std::move(l)) {}
    ResolutionIndex(std::initializer_list<int> l) : levels(l) {}

    std::size_t dim() const { return levels.size(); }
    int operator[](std::size_t l) const { return levels[l]; }
    int total() const {
        int s = 0;
        for (int v : levels) s += v;
        return s;
    }
    int max_level() const { return levels.empty() ? 0 : *std::max_element(levels.begin(), levels.end()); }

    /// Componentwise minimum.
    ResolutionIndex meet(const ResolutionIndex& o) const {
        std::vector<int> m(levels.size());
        for (std::size_t l = 0; l < levels.size(); ++l) m[l] = std::min(levels[l], o.levels[l]);
        return ResolutionIndex(std::move(m));
    }
    bool dominated_by(const ResolutionIndex& o) const {
        for (std::size_t l = 0; l < levels.size(); ++l)
            if (levels[l] > o.levels[l]) return false;
        return true;
    }

    std::string str() const {
        std::string s = "(";
        for (std::size_t l = 0; l < levels.size(); ++l) {
            if (l) s += ",";
            s += std::to_string(levels[l]);
        }
        return s + ")";
    }

    bool operator==(const ResolutionIndex&) const = default;
    /// Orders by total level first, then lexicographically.
    friend bool operator<(const ResolutionIndex& a, const ResolutionIndex& b) {
        if (a.total() != b.total()) return a.total() < b.total();
        return a.levels < b.levels;
    }
};

/// phi and its first two derivatives on the dyadic grid support_min + i 2^-L.
class ScalingTable {
public:
    ScalingTable() = default;
    ScalingTable(int level, int support_min, int support_max, std::vector<double> phi,
                 std::vector<double> d1, std::vector<double> d2)
        : level_(level), support_min_(support_min), support_max_(support_max),
          scale_(std::ldexp(1.0, level)), phi_(std::move(phi)), d1_(std::move(d1)),
          d2_(std::move(d2)) {}

    int level() const { return level_; }
    double step() const { return 1.0 / scale_; }
    int support_min() const { return support_min_; }
    int support_max() const { return support_max_; }
    std::size_t size() const { return phi_.size(); }
    double node(std::size_t i) const { return support_min_ + static_cast<double>(i) / scale_; }

    std::span<const double> phi_nodes() const { return phi_; }
    std::span<const double> d1_nodes() const { return d1_; }
    std::span<const double> d2_nodes() const { return d2_; }

    double phi(double x) const { return interpolate(phi_, x); }
    double d1(double x) const { return interpolate(d1_, x); }
    double d2(double x) const { return interpolate(d2_, x); }

    /// max |phi| over the nodes.
    double sup_norm() const {
        double m = 0.0;
        for (double v : phi_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    double interpolate(const std::vector<double>& v, double x) const {
        if (!(x > support_min_ && x < support_max_)) return 0.0;
        const double u = (x - support_min_) * scale_;
        auto i = static_cast<std::size_t>(u);
        if (i + 1 >= v.size()) return v.back();
        const double f = u - static_cast<double>(i);
        return v[i] + f * (v[i + 1] - v[i]);
    }

    int level_ = 0;
    int support_min_ = 0;
    int support_max_ = 0;
    double scale_ = 1.0;
    std::vector<double> phi_, d1_, d2_;
};

namespace detail {

/// Values of the n-th derivative of phi at support_min + i 2^-level,
/// i = 0..length 2^level. Integer nodes come from the eigenvector of the
/// two-scale operator for eigenvalue 2^-n, normalized by
/// sum_m (-m)^n phi^(n)(m) = n!; finer nodes follow from the refinement
/// equation phi^(n)(x) = 2^n sqrt(2) sum_k h_k phi^(n)(2x - k).
inline std::vector<double> dyadic_values(const WaveletBasis& b, int level, int n) {
    const auto& h = b.filter;
    const int taps = static_cast<int>(h.size());
    const int len = b.support_length();
    const double sqrt2 = std::numbers::sqrt2;

    // Work in unshifted coordinates: support [0, len].
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(len + 2, len + 1);
    for (int m = 0; m <= len; ++m)
        for (int l = 0; l <= len; ++l) {
            const int k = 2 * m - l;
            if (k >= 0 && k < taps) op(m, l) = sqrt2 * h[k];
        }
    const double lambda = std::ldexp(1.0, -n);
    for (int m = 0; m <= len; ++m) op(m, m) -= lambda;
    // Normalization row, written in shifted coordinates x = m + support_min.
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    for (int m = 0; m <= len; ++m) op(len + 1, m) = std::pow(-static_cast<double>(m + b.support_min), n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(len + 2);
    rhs(len + 1) = fact;
    Eigen::VectorXd v = op.colPivHouseholderQr().solve(rhs);

    std::vector<double> vals(v.data(), v.data() + v.size());
    const double gain = std::ldexp(sqrt2, n);
    for (int lev = 1; lev <= level; ++lev) {
        const std::size_t count = static_cast<std::size_t>(len) * (std::size_t{1} << lev) + 1;
        const std::size_t stride = std::size_t{1} << (lev - 1);
        std::vector<double> next(count, 0.0);
        for (std::size_t i = 0; i < count; ++i) {
            double acc = 0.0;
            for (int k = 0; k < taps; ++k) {
                const std::size_t off = static_cast<std::size_t>(k) * stride;
                if (off > i) break;
                const std::size_t idx = i - off;
                if (idx < vals.size()) acc += h[k] * vals[idx];
            }
            next[i] = gain * acc;
        }
        vals = std::move(next);
    }
    return vals;
}

}  // namespace detail

/// Tabulates phi, phi' and phi'' on the dyadic grid of step 2^-level.
inline ScalingTable tabulate(const WaveletBasis& b, int level = 10) {
    if (level < 6) throw ConfigError("tabulation level must be at least 6");
    auto phi = detail::dyadic_values(b, level, 0);
    auto d1 = detail::dyadic_values(b, level, 1);
    auto d2 = detail::dyadic_values(b, level, 2);
    phi.front() = phi.back() = 0.0;
    d1.front() = d1.back() = 0.0;
    d2.front() = d2.back() = 0.0;
    return ScalingTable(level, b.support_min, b.support_max, std::move(phi), std::move(d1),
                        std::move(d2));
}

/// phi_{jk}(x) = prod_l 2^{j_l/2} phi(2^{j_l} x_l - k_l).
inline double eval_phi_jk(const ScalingTable& table, const ResolutionIndex& j,
                          std::span<const int> k, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t l = 0; l < j.dim(); ++l) {
        const double s = std::ldexp(1.0, j[l]);
        v *= std::sqrt(s) * table.phi(s * x[l] - k[l]);
        if (v == 0.0) return 0.0;
    }
    return v;
}

/// Integer range {k : |2^j x - k| <= A} along one axis.
struct IndexRange {
    int first = 0;
    int last = -1;
    int size() const { return last - first + 1; }
};

inline IndexRange active_range(const WaveletBasis& b, int j, double x) {
    const double c = std::ldexp(x, j);
    const int a = b.radius();
    return {static_cast<int>(std::ceil(c - a)), static_cast<int>(std::floor(c + a))};
}

/// All k in Z^d with |2^{j_l} x_l - k_l| <= A for every l (Cartesian product).
inline std::vector<std::vector<int>> active_indices(const WaveletBasis& b, const ResolutionIndex& j,
                                                    std::span<const double> x) {
    std::vector<IndexRange> ranges;
    std::size_t count = 1;
    for (std::size_t l = 0; l < j.dim(); ++l) {
        ranges.push_back(active_range(b, j[l], x[l]));
        count *= static_cast<std::size_t>(std::max(ranges.back().size(), 0));
    }
    std::vector<std::vector<int>> out;
    out.reserve(count);
    if (count == 0) return out;
    std::vector<int> k(j.dim());
    for (std::size_t l = 0; l < j.dim(); ++l) k[l] = ranges[l].first;
    while (true) {
        out.push_back(k);
        std::size_t l = 0;
        for (; l < j.dim(); ++l) {
            if (++k[l] <= ranges[l].last) break;
            k[l] = ranges[l].first;
        }
        if (l == j.dim()) break;
    }
    return out;
}

/// Transfer function m0(xi) = 2^{-1/2} sum_n h_n e^{-i (n + support_min) xi}.
inline std::complex<double> transfer_function(const WaveletBasis& b, double xi) {
    // plain real arithmetic: std::complex products go through the slow
    // NaN-recovering path without -ffast-math
    const double sc = std::cos(xi), ss = -std::sin(xi);
    double rc = std::cos(xi * b.support_min), rs = -std::sin(xi * b.support_min);
    double re = 0.0, im = 0.0;
    for (double h : b.filter) {
        re += h * rc;
        im += h * rs;
        const double nc = rc * sc - rs * ss;
        rs = rc * ss + rs * sc;
        rc = nc;
    }
    return {re / std::numbers::sqrt2, im / std::numbers::sqrt2};
}

/// F(phi)(t) = int e^{-ity} phi(y) dy via the product of m0(t / 2^k), k = 1..depth.
inline std::complex<double> fourier_phi(const WaveletBasis& b, double t, int depth = 25) {
    double re = 1.0, im = 0.0;
    for (int k = 1; k <= depth; ++k) {
        const auto m = transfer_function(b, std::ldexp(t, -k));
        const double nr = re * m.real() - im * m.imag();
        im = re * m.imag() + im * m.real();
        re = nr;
    }
    return {re, im};
}

}  // namespace wavedecon

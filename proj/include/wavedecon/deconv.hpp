#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "errors.hpp"
#include "noise.hpp"
#include "wavelet.hpp"

namespace wavedecon {

/// Trapezoid rule on [-T, T] with T = pi 2^level, step 2 pi / period, evaluated
/// for all grid arguments at once by one FFT. The resulting table has step
/// 2^-level and is exact up to truncation of the Fourier tail.
struct QuadratureSettings {
    int level = 13;
    /// Power of two; 0 picks the smallest one that holds the stored window
    /// with 25% slack against aliasing.
    int period = 0;
    int product_depth = 25;
    /// Stored window is [support_min - margin, support_max + margin]; outside
    /// it d_j is treated as zero (exactly zero for Dirac, Laplace and
    /// integer-shape Gamma noise).
    int margin = 8;
};

/// Throws ConfigError unless D_j phi is well defined for this pairing.
inline void check_pairing(const WaveletBasis& b, const NoiseComponent& c) {
    const double nu = ill_posedness(c);
    if (b.regularity < 2 || b.regularity < nu + 1.0)
        throw ConfigError(b.name() + " (regularity " + std::to_string(b.regularity) +
                          ") is not smooth enough for " + describe(c) + " (nu = " +
                          std::to_string(nu) + ")");
}

inline void check_pairing(const WaveletBasis& b, const NoiseModel& m) {
    for (std::size_t l = 0; l < m.dim(); ++l) check_pairing(b, m.axis(l));
}

/// One-dimensional deconvolved wavelet
///   d_j(u) = (2 pi)^-1 int e^{-itu} conj(F(phi)(t)) / F(g)(2^j t) dt
/// tabulated on a uniform grid.
class DeconvTable {
public:
    DeconvTable() = default;
    DeconvTable(int scale, double origin, double step, std::vector<double> values, double cover_lo,
                double cover_hi, double t_max, double max_imag = 0.0)
        : scale_(scale), origin_(origin), step_(step), values_(std::move(values)),
          cover_lo_(cover_lo), cover_hi_(cover_hi), t_max_(t_max), max_imag_(max_imag) {}

    int scale() const { return scale_; }
    double step() const { return step_; }
    double origin() const { return origin_; }
    double truncation() const { return t_max_; }
    double cover_lo() const { return cover_lo_; }
    double cover_hi() const { return cover_hi_; }
    /// Largest imaginary residue seen in the FFT output (should be roundoff).
    double max_imag() const { return max_imag_; }
    std::size_t size() const { return values_.size(); }
    double node(std::size_t i) const { return origin_ + static_cast<double>(i) * step_; }
    std::span<const double> values() const { return values_; }

    bool covers(double u) const { return u >= cover_lo_ && u <= cover_hi_; }

    /// Linear interpolation; RangeError outside [cover_lo, cover_hi].
    double operator()(double u) const {
        if (!covers(u))
            throw RangeError("d_j table (j=" + std::to_string(scale_) + ") queried at " +
                             std::to_string(u) + " outside [" + std::to_string(cover_lo_) + ", " +
                             std::to_string(cover_hi_) + "]");
        return interpolate(u);
    }

    /// Same as operator() without the coverage check.
    double interpolate(double u) const {
        const double pos = (u - origin_) / step_;
        if (!(pos >= 0.0)) return 0.0;
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= values_.size()) return i + 1 == values_.size() ? values_.back() : 0.0;
        const double f = pos - static_cast<double>(i);
        return values_[i] + f * (values_[i + 1] - values_[i]);
    }

private:
    int scale_ = 0;
    double origin_ = 0.0;
    double step_ = 1.0;
    std::vector<double> values_;
    double cover_lo_ = 0.0;
    double cover_hi_ = 0.0;
    double t_max_ = 0.0;
    double max_imag_ = 0.0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

inline int pick_period(const WaveletBasis& b, const QuadratureSettings& q) {
    if (q.period > 0) {
        if (!std::has_single_bit(static_cast<unsigned>(q.period)))
            throw ConfigError("quadrature period must be a power of two");
        return q.period;
    }
    const double window = b.support_length() + 2.0 * q.margin;
    return static_cast<int>(std::bit_ceil(static_cast<unsigned>(std::ceil(1.25 * window))));
}

/// Samples of F(phi)(n * 2 pi / period) for n = 0..N/2, shared by every table
/// built from the same basis and grid.
class SpectrumCache {
public:
    using Samples = std::vector<std::complex<double>>;

    static std::shared_ptr<const Samples> get(const WaveletBasis& b, int period, int level, int depth) {
        static SpectrumCache cache;
        return cache.lookup(b, period, level, depth);
    }

private:
    std::shared_ptr<const Samples> lookup(const WaveletBasis& b, int period, int level, int depth) {
        Key key{b.name(), b.filter, period, level, depth};
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) return it->second;
        }
        const std::size_t half = (static_cast<std::size_t>(period) << level) / 2;
        const double dt = 2.0 * std::numbers::pi / period;
        auto samples = std::make_shared<Samples>(half + 1);
        for (std::size_t n = 0; n <= half; ++n) (*samples)[n] = fourier_phi(b, dt * static_cast<double>(n), depth);
        std::lock_guard lock(mutex_);
        return entries_.emplace(std::move(key), std::move(samples)).first->second;
    }

    using Key = std::tuple<std::string, std::vector<double>, int, int, int>;
    std::mutex mutex_;
    std::map<Key, std::shared_ptr<const Samples>> entries_;
};

}  // namespace detail

/// Tabulates d_j for one axis. `cover_lo`/`cover_hi` bound the arguments the
/// table will answer for; they do not change the quadrature.
inline DeconvTable tabulate_dj(const WaveletBasis& b, const NoiseComponent& noise, int j, double cover_lo,
                               double cover_hi, const QuadratureSettings& q = {}) {
    check_pairing(b, noise);
    if (j < 0) throw ConfigError("resolution level must be non-negative");
    const int period = detail::pick_period(b, q);
    const std::size_t n_fft = static_cast<std::size_t>(period) << q.level;
    const std::size_t half = n_fft / 2;
    const double dt = 2.0 * std::numbers::pi / period;
    const double step = std::ldexp(1.0, -q.level);
    const double origin = b.support_min - q.margin;
    const auto count = static_cast<std::size_t>(b.support_length() + 2 * q.margin) * (std::size_t{1} << q.level) + 1;
    if (count >= n_fft) throw ConfigError("quadrature period too small for the stored window");

    auto spectrum = detail::SpectrumCache::get(b, period, q.level, q.product_depth);
    const double dilation = std::ldexp(1.0, j);

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_fft));
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> guard(buf, &fftw_free);
    std::fill_n(reinterpret_cast<double*>(buf), 2 * n_fft, 0.0);

    // integrand conj(F(phi)(t)) / F(g)(2^j t) e^{-i t origin}, trapezoid weights
    auto accumulate = [&](long n, double weight) {
        const double t = dt * static_cast<double>(n);
        const auto& s = (*spectrum)[static_cast<std::size_t>(std::abs(n))];
        const std::complex<double> conj_phi = n >= 0 ? std::conj(s) : s;
        const std::complex<double> g = conj_phi * inverse_noise_ft(noise, dilation * t) *
                                       std::polar(weight, -t * origin);
        const std::size_t slot = static_cast<std::size_t>((n % static_cast<long>(n_fft) + static_cast<long>(n_fft)) %
                                                          static_cast<long>(n_fft));
        buf[slot][0] += g.real();
        buf[slot][1] += g.imag();
    };
    const long h = static_cast<long>(half);
    for (long n = -h + 1; n < h; ++n) accumulate(n, 1.0);
    accumulate(h, 0.5);
    accumulate(-h, 0.5);

    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n_fft), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    const double norm = dt / (2.0 * std::numbers::pi);
    std::vector<double> values(count);
    double max_imag = 0.0;
    for (std::size_t m = 0; m < count; ++m) {
        values[m] = buf[m][0] * norm;
        max_imag = std::max(max_imag, std::abs(buf[m][1] * norm));
    }
    return DeconvTable(j, origin, step, std::move(values), cover_lo, cover_hi, dt * static_cast<double>(half),
                       max_imag);
}

/// Per-scale admissible covariate range: W must lie in
/// [-(A+2) 2^-j - 4, 1 + (A+2) 2^-j + 4] scaled by `widen`.
struct CoverageRule {
    double widen = 1.0;

    std::pair<double, double> w_range(const WaveletBasis& b, int j) const {
        const double pad = (b.radius() + 2) * std::ldexp(1.0, -j) + 4.0;
        const double mid = 0.5;
        const double half = (0.5 + pad) * widen;
        return {mid - half, mid + half};
    }

    /// Argument range u = 2^j w - k for w in w_range and k active at some x in [0, 1].
    std::pair<double, double> u_range(const WaveletBasis& b, int j) const {
        const auto [lo, hi] = w_range(b, j);
        const double s = std::ldexp(1.0, j);
        return {s * lo - s - b.radius(), s * hi + b.radius()};
    }
};

/// Binary cache file: magic, version, key, then header doubles and the raw
/// little-endian float64 values.
namespace table_cache {

inline constexpr char kMagic[8] = {'W', 'D', 'C', 'T', 'A', 'B', 'L', 'E'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        v = std::bit_cast<T>(bytes);
    }
    return v;
}

template <typename T>
void put(std::ostream& os, T v) {
    v = to_little(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return to_little(v);
}

inline void put_double(std::ostream& os, double v) { put(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_double(std::istream& is) { return std::bit_cast<double>(get<std::uint64_t>(is)); }

}  // namespace detail

inline void save(const std::filesystem::path& path, const std::string& key, const DeconvTable& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write table cache " + path.string());
    os.write(kMagic, sizeof kMagic);
    detail::put<std::uint32_t>(os, kVersion);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(key.size()));
    os.write(key.data(), static_cast<std::streamsize>(key.size()));
    detail::put<std::int32_t>(os, t.scale());
    for (double v : {t.origin(), t.step(), t.cover_lo(), t.cover_hi(), t.truncation(), t.max_imag()})
        detail::put_double(os, v);
    detail::put<std::uint64_t>(os, t.size());
    for (double v : t.values()) detail::put_double(os, v);
}

/// Returns nullopt when the file is missing, from another version, or keyed differently.
inline std::optional<DeconvTable> load(const std::filesystem::path& path, const std::string& key) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) return std::nullopt;
    if (detail::get<std::uint32_t>(is) != kVersion) return std::nullopt;
    const auto key_len = detail::get<std::uint32_t>(is);
    if (key_len > 4096) return std::nullopt;
    std::string stored(key_len, '\0');
    is.read(stored.data(), key_len);
    if (!is || stored != key) return std::nullopt;
    const int scale = detail::get<std::int32_t>(is);
    double h[6];
    for (double& v : h) v = detail::get_double(is);
    const auto count = detail::get<std::uint64_t>(is);
    if (!is || count > (std::uint64_t{1} << 28)) return std::nullopt;
    std::vector<double> values(count);
    for (double& v : values) v = detail::get_double(is);
    if (!is) return std::nullopt;
    return DeconvTable(scale, h[0], h[1], std::move(values), h[2], h[3], h[4], h[5]);
}

inline std::string key_for(const WaveletBasis& b, const NoiseComponent& n, int j, int scaling_level,
                           const QuadratureSettings& q, const CoverageRule& c) {
    std::size_t filter_hash = 0;
    for (double v : b.filter) filter_hash = filter_hash * 1099511628211ULL ^ std::hash<double>{}(v);
    return b.name() + "|" + describe(n) + "|j=" + std::to_string(j) + "|L=" + std::to_string(scaling_level) +
           "|q=" + std::to_string(q.level) + "," + std::to_string(q.period) + "," +
           std::to_string(q.product_depth) + "," + std::to_string(q.margin) + "|w=" + std::to_string(c.widen) +
           "|h=" + std::to_string(filter_hash);
}

}  // namespace table_cache

/// Everything needed to evaluate D_j phi and T_j for one basis and noise
/// model. Tables are built lazily and shared; safe for concurrent readers.
class DeconvContext {
public:
    DeconvContext(WaveletBasis basis, NoiseModel noise, int scaling_level = 10, QuadratureSettings quad = {},
                  CoverageRule coverage = {}, std::optional<std::filesystem::path> cache_dir = std::nullopt)
        : basis_(std::move(basis)), noise_(std::move(noise)), scaling_(tabulate(basis_, scaling_level)),
          quad_(quad), coverage_(coverage), cache_dir_(std::move(cache_dir)),
          state_(std::make_shared<State>()) {
        check_pairing(basis_, noise_);
    }

    const WaveletBasis& basis() const { return basis_; }
    const NoiseModel& noise() const { return noise_; }
    const ScalingTable& scaling() const { return scaling_; }
    const QuadratureSettings& quadrature() const { return quad_; }
    const CoverageRule& coverage() const { return coverage_; }
    std::size_t dim() const { return noise_.dim(); }

    /// Same basis and noise with every coverage range scaled by `factor`.
    DeconvContext widened(double factor = 2.0) const {
        CoverageRule c = coverage_;
        c.widen *= factor;
        return DeconvContext(basis_, noise_, scaling_.level(), quad_, c, cache_dir_);
    }

    /// d_j for axis l, built on first use.
    const DeconvTable& table(std::size_t axis, int j) const {
        const auto& comp = noise_.axis(axis);
        const std::string key = table_cache::key_for(basis_, comp, j, scaling_.level(), quad_, coverage_);
        {
            std::lock_guard lock(state_->mutex);
            if (auto it = state_->tables.find(key); it != state_->tables.end()) return *it->second;
        }
        auto built = std::make_unique<DeconvTable>(build(comp, j, key));
        std::lock_guard lock(state_->mutex);
        auto [it, inserted] = state_->tables.emplace(key, std::move(built));
        return *it->second;
    }

    /// Admissible covariate range at scale j.
    std::pair<double, double> w_range(int j) const { return coverage_.w_range(basis_, j); }

private:
    DeconvTable build(const NoiseComponent& comp, int j, const std::string& key) const {
        std::filesystem::path file;
        if (cache_dir_) {
            file = *cache_dir_ / ("dj-" + std::to_string(std::hash<std::string>{}(key)) + ".bin");
            if (auto cached = table_cache::load(file, key)) return std::move(*cached);
        }
        const auto [lo, hi] = coverage_.u_range(basis_, j);
        DeconvTable t = tabulate_dj(basis_, comp, j, lo, hi, quad_);
        if (cache_dir_) {
            std::error_code ec;
            std::filesystem::create_directories(*cache_dir_, ec);
            if (!ec) table_cache::save(file, key, t);
        }
        return t;
    }

    struct State {
        std::mutex mutex;
        std::map<std::string, std::unique_ptr<DeconvTable>> tables;
    };

    WaveletBasis basis_;
    NoiseModel noise_;
    ScalingTable scaling_;
    QuadratureSettings quad_;
    CoverageRule coverage_;
    std::optional<std::filesystem::path> cache_dir_;
    std::shared_ptr<State> state_;
};

/// (D_j phi)(w) = prod_l d_{j_l}(w_l).
inline double eval_Dj_phi(const DeconvContext& ctx, const ResolutionIndex& j, std::span<const double> w) {
    double v = 1.0;
    for (std::size_t l = 0; l < j.dim(); ++l) v *= ctx.table(l, j[l])(w[l]);
    return v;
}

/// T_j(w) = sum_k (D_j phi)_{j,k}(w) phi_{jk}(x) for a fixed x. The sum over
/// the tensor grid of active k factorizes into one short sum per axis.
class KernelSum {
public:
    KernelSum(const DeconvContext& ctx, ResolutionIndex j, std::span<const double> x)
        : j_(std::move(j)), x_(x.begin(), x.end()) {
        if (j_.dim() != ctx.dim() || x_.size() != ctx.dim())
            throw ConfigError("dimension mismatch between index, point and noise model");
        axes_.reserve(j_.dim());
        for (std::size_t l = 0; l < j_.dim(); ++l) {
            Axis a;
            a.table = &ctx.table(l, j_[l]);
            a.dilation = std::ldexp(1.0, j_[l]);
            a.range = active_range(ctx.basis(), j_[l], x_[l]);
            std::tie(a.w_lo, a.w_hi) = ctx.w_range(j_[l]);
            for (int k = a.range.first; k <= a.range.last; ++k)
                a.weights.push_back(a.dilation * ctx.scaling().phi(a.dilation * x_[l] - k));
            axes_.push_back(std::move(a));
        }
    }

    const ResolutionIndex& index() const { return j_; }
    std::span<const double> point() const { return x_; }

    /// Number of (k_1, ..., k_d) terms in the unfactorized sum.
    std::size_t term_count() const {
        std::size_t c = 1;
        for (const auto& a : axes_) c *= static_cast<std::size_t>(a.range.size());
        return c;
    }

    /// sum_{k_l} 2^{j_l} d_{j_l}(2^{j_l} w_l - k_l) phi(2^{j_l} x_l - k_l).
    double axis_factor(std::size_t l, double w) const {
        const Axis& a = axes_[l];
        if (!(w >= a.w_lo && w <= a.w_hi))
            throw RangeError("covariate " + std::to_string(w) + " outside tabulated range [" +
                             std::to_string(a.w_lo) + ", " + std::to_string(a.w_hi) + "] at j=" +
                             std::to_string(j_[l]));
        const double base = a.dilation * w;
        double acc = 0.0;
        for (std::size_t i = 0; i < a.weights.size(); ++i) {
            if (a.weights[i] == 0.0) continue;
            acc += a.weights[i] * a.table->interpolate(base - (a.range.first + static_cast<int>(i)));
        }
        return acc;
    }

    double operator()(std::span<const double> w) const {
        double v = 1.0;
        for (std::size_t l = 0; l < axes_.size(); ++l) v *= axis_factor(l, w[l]);
        return v;
    }

private:
    struct Axis {
        const DeconvTable* table = nullptr;
        double dilation = 1.0;
        IndexRange range;
        double w_lo = 0.0, w_hi = 0.0;
        std::vector<double> weights;
    };

    ResolutionIndex j_;
    std::vector<double> x_;
    std::vector<Axis> axes_;
};

inline double eval_Tj(const DeconvContext& ctx, const ResolutionIndex& j, std::span<const double> x,
                      std::span<const double> w) {
    return KernelSum(ctx, j, x)(w);
}

/// max |T_j| over the grid [-0.5, 1.5]^d with step 2^-(max_l j_l + 4 + refine).
/// The grid is a tensor product and T_j factorizes, so the maximum is the
/// product of per-axis maxima.
inline double sup_norm_Tj(const KernelSum& tj, int refine = 0) {
    const int level = tj.index().max_level() + 4 + refine;
    const std::size_t count = (std::size_t{2} << level) + 1;
    const double step = std::ldexp(1.0, -level);
    double v = 1.0;
    for (std::size_t l = 0; l < tj.index().dim(); ++l) {
        double m = 0.0;
        for (std::size_t i = 0; i < count; ++i)
            m = std::max(m, std::abs(tj.axis_factor(l, -0.5 + static_cast<double>(i) * step)));
        v *= m;
    }
    return v;
}

inline double sup_norm_Tj(const DeconvContext& ctx, const ResolutionIndex& j, std::span<const double> x,
                          int refine = 0) {
    return sup_norm_Tj(KernelSum(ctx, j, x), refine);
}

}  // namespace wavedecon

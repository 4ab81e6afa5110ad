#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "deconv.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "noise.hpp"

namespace wavedecon {

namespace detail {

// 16-point Gauss-Legendre rule on [-1, 1] (positive half; symmetric).
inline constexpr std::array<double, 8> kGaussNodes = {
    0.0950125098376374401853193, 0.2816035507792589132304605, 0.4580167776572273863424194,
    0.6178762444026437484466718, 0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.1894506104550684962853967, 0.1826034150449235888667637, 0.1691565193950025381893121,
    0.1495959888165767320815017, 0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

/// Calls f(t, w) for each node of a 16-point rule on [a, b].
template <typename F>
void gauss_panel(double a, double b, F&& f) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t i = 0; i < kGaussNodes.size(); ++i) {
        f(mid - half * kGaussNodes[i], half * kGaussWeights[i]);
        f(mid + half * kGaussNodes[i], half * kGaussWeights[i]);
    }
}

}  // namespace detail

/// Sinc-cutoff deconvolution kernel for one axis,
///   K~_h(z) = (2 pi)^-1 int_{|t| <= 1/h} e^{itz} / F(g)(t) dt,
/// evaluated for a whole bandwidth grid at once by composite Gauss-Legendre
/// quadrature on panels nested at every cutoff 1/h.
class DeconvKernel {
public:
    /// `bandwidths` need not be sorted. Panels are at most `panel_width` wide.
    DeconvKernel(NoiseComponent noise, std::vector<double> bandwidths, double panel_width = 0.5)
        : noise_(std::move(noise)), bandwidths_(std::move(bandwidths)), panel_width_(panel_width) {
        if (bandwidths_.empty()) throw ConfigError("bandwidth grid is empty");
        for (double h : bandwidths_)
            if (!(h > 0.0)) throw ConfigError("bandwidths must be positive");
        // cutoffs ascending; slot_[i] maps cutoff rank back to the caller's order
        std::vector<std::size_t> idx(bandwidths_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return bandwidths_[a] > bandwidths_[b]; });
        slot_ = idx;
        dirac_ = std::holds_alternative<DiracNoise>(noise_);
        if (dirac_) return;
        double lo = 0.0;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double hi = 1.0 / bandwidths_[idx[r]];
            const int panels = std::max(0, static_cast<int>(std::ceil((hi - lo) / panel_width_ - 1e-12)));
            for (int p = 0; p < panels; ++p) {
                const double a = lo + (hi - lo) * p / panels, b = lo + (hi - lo) * (p + 1) / panels;
                detail::gauss_panel(a, b, [&](double t, double w) {
                    nodes_.push_back({t, w, inverse_noise_ft(noise_, t)});
                });
            }
            stops_.push_back(nodes_.size());
            lo = std::max(lo, hi);
        }
    }

    const std::vector<double>& bandwidths() const { return bandwidths_; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Writes K~_h(z) for every bandwidth (caller's order) into out.
    void evaluate(double z, std::span<double> out) const {
        if (dirac_) {
            // plain sinc kernel; no quadrature needed however small h gets
            for (std::size_t i = 0; i < bandwidths_.size(); ++i)
                out[i] = std::abs(z) < 1e-300 ? 1.0 / (std::numbers::pi * bandwidths_[i])
                                              : std::sin(z / bandwidths_[i]) / (std::numbers::pi * z);
            return;
        }
        const double max_phase = std::abs(z) * panel_width_;
        if (max_phase > 8.0) return evaluate_subdivided(z, out, static_cast<int>(std::ceil(max_phase / 8.0)));
        double acc = 0.0;
        std::size_t q = 0;
        for (std::size_t r = 0; r < stops_.size(); ++r) {
            for (; q < stops_[r]; ++q) {
                const auto& nd = nodes_[q];
                const double c = std::cos(nd.t * z), s = std::sin(nd.t * z);
                acc += nd.w * (c * nd.inv_psi.real() - s * nd.inv_psi.imag());
            }
            out[slot_[r]] = acc / std::numbers::pi;
        }
    }

    double operator()(double z, double h) const {
        DeconvKernel single(noise_, {h}, panel_width_);
        double v = 0.0;
        single.evaluate(z, std::span<double>(&v, 1));
        return v;
    }

    /// |K~_h|_2^2 = (2 pi)^-1 int_{|t| <= 1/h} |F(g)(t)|^-2 dt, per bandwidth.
    std::vector<double> squared_l2_norms() const {
        std::vector<double> out(bandwidths_.size());
        if (dirac_) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (std::numbers::pi * bandwidths_[i]);
            return out;
        }
        double acc = 0.0;
        std::size_t q = 0;
        for (std::size_t r = 0; r < stops_.size(); ++r) {
            for (; q < stops_[r]; ++q) acc += nodes_[q].w * std::norm(nodes_[q].inv_psi);
            out[slot_[r]] = acc / std::numbers::pi;
        }
        return out;
    }

private:
    struct Node {
        double t;
        double w;
        std::complex<double> inv_psi;
    };

    void evaluate_subdivided(double z, std::span<double> out, int split) const {
        double acc = 0.0, lo = 0.0;
        for (std::size_t r = 0; r < stops_.size(); ++r) {
            const double hi = std::max(lo, 1.0 / bandwidths_[slot_[r]]);
            const int panels = std::max(0, static_cast<int>(std::ceil((hi - lo) / panel_width_ - 1e-12))) * split;
            for (int p = 0; p < panels; ++p) {
                const double a = lo + (hi - lo) * p / panels, b = lo + (hi - lo) * (p + 1) / panels;
                detail::gauss_panel(a, b, [&](double t, double w) {
                    const auto ip = inverse_noise_ft(noise_, t);
                    acc += w * (std::cos(t * z) * ip.real() - std::sin(t * z) * ip.imag());
                });
            }
            out[slot_[r]] = acc / std::numbers::pi;
            lo = hi;
        }
    }

    NoiseComponent noise_;
    std::vector<double> bandwidths_;
    double panel_width_;
    bool dirac_ = false;
    std::vector<Node> nodes_;
    std::vector<std::size_t> stops_;
    std::vector<std::size_t> slot_;
};

struct DensityConfig {
    /// Empty means the default geometric grid.
    std::vector<double> bandwidths;
    std::size_t grid_size = 20;
    double kappa = 1.0;
};

/// Geometric grid of `count` bandwidths from n^{-1/(2 nu + 1)} / 4 to 1.
inline std::vector<double> default_bandwidths(std::size_t n, double nu, std::size_t count = 20) {
    if (count == 0) throw ConfigError("bandwidth grid is empty");
    const double lo = std::pow(static_cast<double>(n), -1.0 / (2.0 * nu + 1.0)) / 4.0;
    std::vector<double> h(count);
    for (std::size_t i = 0; i < count; ++i)
        h[i] = count == 1 ? 1.0 : lo * std::pow(1.0 / lo, static_cast<double>(i) / static_cast<double>(count - 1));
    return h;
}

inline std::vector<double> resolve_bandwidths(const DensityConfig& cfg, std::size_t n, double nu) {
    auto h = cfg.bandwidths.empty() ? default_bandwidths(n, nu, cfg.grid_size) : cfg.bandwidths;
    for (double v : h)
        if (!(v > 0.0)) throw ConfigError("bandwidths must be positive");
    std::sort(h.begin(), h.end());
    h.erase(std::unique(h.begin(), h.end()), h.end());
    return h;
}

/// f~_h(x) = n^-1 sum_u prod_l K~_{h,l}(x_l - W_ul) for every h of the grid.
inline std::vector<double> f_hat_grid(const Dataset& data, std::span<const double> x, const NoiseModel& noise,
                                      const std::vector<double>& bandwidths) {
    if (data.dim() != noise.dim() || x.size() != data.dim()) throw ConfigError("dimension mismatch in f_hat");
    std::vector<DeconvKernel> kernels;
    for (std::size_t l = 0; l < data.dim(); ++l) kernels.emplace_back(noise.axis(l), bandwidths);
    const std::size_t m = bandwidths.size();
    std::vector<double> sum(m, 0.0), prod(m), axis(m);
    for (std::size_t u = 0; u < data.size(); ++u) {
        const auto w = data.covariate(u);
        std::fill(prod.begin(), prod.end(), 1.0);
        for (std::size_t l = 0; l < data.dim(); ++l) {
            kernels[l].evaluate(x[l] - w[l], axis);
            for (std::size_t i = 0; i < m; ++i) prod[i] *= axis[i];
        }
        for (std::size_t i = 0; i < m; ++i) sum[i] += prod[i];
    }
    for (double& v : sum) v /= static_cast<double>(data.size());
    return sum;
}

inline double f_hat(const Dataset& data, std::span<const double> x, double h, const NoiseModel& noise) {
    return f_hat_grid(data, x, noise, {h}).front();
}

struct BandwidthChoice {
    double bandwidth = 0.0;
    double f_hat = 0.0;
    std::vector<double> bandwidths;  // ascending
    std::vector<double> estimates;
    std::vector<double> criteria;
};

/// Goldenshluger-Lepski bandwidth choice:
///   h* = argmin_h  max_{h' <= h} { |f_h - f_h'| - kappa V(h') }_+ + kappa V(h),
///   V(h) = |K~_h|_2 sqrt(log n / n).
inline BandwidthChoice gl_bandwidth(const Dataset& data, std::span<const double> x, const DensityConfig& cfg,
                                    const NoiseModel& noise) {
    if (!(cfg.kappa > 0.0)) throw ConfigError("kappa must be positive");
    BandwidthChoice out;
    out.bandwidths = resolve_bandwidths(cfg, data.size(), noise.nu());
    out.estimates = f_hat_grid(data, x, noise, out.bandwidths);
    const std::size_t m = out.bandwidths.size();
    std::vector<double> v(m, 1.0);
    for (std::size_t l = 0; l < noise.dim(); ++l) {
        const auto norms = DeconvKernel(noise.axis(l), out.bandwidths).squared_l2_norms();
        for (std::size_t i = 0; i < m; ++i) v[i] *= norms[i];
    }
    const double n = static_cast<double>(data.size());
    for (double& vi : v) vi = std::sqrt(vi) * std::sqrt(std::log(n) / n);

    out.criteria.resize(m);
    std::size_t best = 0;
    for (std::size_t i = 0; i < m; ++i) {
        double a = 0.0;
        for (std::size_t k = 0; k <= i; ++k)
            a = std::max(a, std::abs(out.estimates[i] - out.estimates[k]) - cfg.kappa * v[k]);
        out.criteria[i] = a + cfg.kappa * v[i];
        if (out.criteria[i] < out.criteria[best]) best = i;
    }
    out.bandwidth = out.bandwidths[best];
    out.f_hat = out.estimates[best];
    return out;
}

struct EstimateReport {
    std::vector<double> x;
    Selection selection;
    BandwidthChoice density;
    double p_hat = 0.0;
    double f_hat = 0.0;
    double denominator = 0.0;
    bool floor_active = false;
    double m_hat = 0.0;
};

/// max(f, n^-1/2).
inline double ratio_denominator(double f, std::size_t n) {
    return std::max(f, 1.0 / std::sqrt(static_cast<double>(n)));
}

/// m_hat(x) = p_hat_{j_hat}(x) / max(f_hat_X(x), n^-1/2).
inline EstimateReport estimate_m(const Dataset& data, const DeconvContext& ctx, std::span<const double> x,
                                 const EstimatorConfig& est, const DensityConfig& dens) {
    EstimateReport r;
    r.x.assign(x.begin(), x.end());
    r.selection = select_j_hat(data, ctx, x, est);
    r.density = gl_bandwidth(data, x, dens, ctx.noise());
    r.p_hat = r.selection.p_hat();
    r.f_hat = r.density.f_hat;
    r.denominator = ratio_denominator(r.f_hat, data.size());
    r.floor_active = r.denominator > r.f_hat;
    r.m_hat = r.p_hat / r.denominator;
    return r;
}

}  // namespace wavedecon

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deconv.hpp"
#include "errors.hpp"
#include "wavelet.hpp"

namespace wavedecon {

/// n observations (W_u, Y_u) with W_u in R^d, stored row-major.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<double> w, std::vector<double> y, std::size_t dim)
        : w_(std::move(w)), y_(std::move(y)), dim_(dim) {
        if (dim_ == 0) throw ConfigError("dataset dimension must be at least 1");
        if (w_.size() != y_.size() * dim_)
            throw ConfigError("covariate rows (" + std::to_string(w_.size() / dim_) +
                              ") do not match responses (" + std::to_string(y_.size()) + ")");
        if (y_.size() < 2) throw ConfigError("dataset needs at least two observations");
    }

    std::size_t size() const { return y_.size(); }
    std::size_t dim() const { return dim_; }
    std::span<const double> covariate(std::size_t u) const { return {w_.data() + u * dim_, dim_}; }
    double response(std::size_t u) const { return y_[u]; }
    std::span<const double> responses() const { return y_; }
    std::span<const double> covariates() const { return w_; }

    double max_abs_response() const {
        double m = 0.0;
        for (double v : y_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::vector<double> w_;
    std::vector<double> y_;
    std::size_t dim_ = 1;
};

enum class Variant { theoretical, practical };

inline std::string_view variant_name(Variant v) { return v == Variant::practical ? "practical" : "theoretical"; }

struct EstimatorConfig {
    double gamma = 0.5;
    double gamma_tilde = 1.0;
    double epsilon = 0.1;
    /// Standard deviation of the regression noise (theoretical variant).
    double noise_sd = 0.0;
    /// Bound on sup |m| (theoretical variant).
    double m_sup = 0.0;
    Variant variant = Variant::practical;
    /// Replaces the 2^{S_j} <= floor(n / log^2 n) rule by S_j <= this value.
    std::optional<int> max_total_level;

    void validate() const {
        if (!(gamma > 0.0) || !(gamma_tilde > 0.0) || !(epsilon > 0.0))
            throw ConfigError("gamma, gamma_tilde and epsilon must be positive");
        if (noise_sd < 0.0 || m_sup < 0.0) throw ConfigError("noise_sd and m_sup must be non-negative");
        if (variant == Variant::theoretical && !(m_sup > 0.0 && noise_sd > 0.0))
            throw ConfigError("theoretical variant needs m_sup > 0 and noise_sd > 0");
        if (max_total_level && *max_total_level < 0) throw ConfigError("max total level must be >= 0");
    }

    /// True when gamma <= nu + 1 or gamma_tilde <= 2 (nu + 2), the constants
    /// under which the oracle inequality is proved (risk exponent 1).
    bool outside_theory(double nu) const { return gamma <= nu + 1.0 || gamma_tilde <= 2.0 * (nu + 2.0); }
};

/// U_u = Y_u T_j(W_u).
inline std::vector<double> u_values(const Dataset& data, const KernelSum& tj) {
    std::vector<double> u(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double y = data.response(i);
        u[i] = y == 0.0 ? 0.0 : y * tj(data.covariate(i));
    }
    return u;
}

inline double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double p_hat(const Dataset& data, const KernelSum& tj) { return mean(u_values(data, tj)); }

inline double p_hat(const Dataset& data, const DeconvContext& ctx, const ResolutionIndex& j,
                    std::span<const double> x) {
    return p_hat(data, KernelSum(ctx, j, x));
}

/// (n(n-1))^-1 sum_{l<v} (U_l - U_v)^2, i.e. the unbiased sample variance,
/// evaluated in O(n) as sum (U - mean)^2 / (n - 1).
inline double sigma_hat_sq(std::span<const double> u) {
    if (u.size() < 2) throw ConfigError("variance estimate needs n >= 2");
    const double m = mean(u);
    double ss = 0.0;
    for (double v : u) ss += (v - m) * (v - m);
    return ss / static_cast<double>(u.size() - 1);
}

struct PenaltyConstants {
    double big_c = 0.0;    // C_j, enters sigma tilde
    double small_c = 0.0;  // c_j, linear term of Gamma
};

/// C_j = (|m|_inf + s sqrt(2 gamma~ log n)) |T_j|_inf and c_j = 16 (2 |m|_inf + s) |T_j|_inf;
/// the practical variant uses c_j = 2 max|Y| |T_j|_inf / 3 and leaves C_j unused.
inline PenaltyConstants penalty_constants(const EstimatorConfig& cfg, double sup_t, double max_abs_y,
                                          std::size_t n) {
    if (cfg.variant == Variant::practical) return {0.0, 2.0 * max_abs_y * sup_t / 3.0};
    if (!(cfg.m_sup > 0.0)) throw ConfigError("theoretical variant needs m_sup > 0");
    const double log_n = std::log(static_cast<double>(n));
    return {(cfg.m_sup + cfg.noise_sd * std::sqrt(2.0 * cfg.gamma_tilde * log_n)) * sup_t,
            16.0 * (2.0 * cfg.m_sup + cfg.noise_sd) * sup_t};
}

/// log n / n.
inline double log_rate(std::size_t n) {
    if (n < 2) throw ConfigError("n must be at least 2");
    return std::log(static_cast<double>(n)) / static_cast<double>(n);
}

/// sigma~^2 with r = log n / n given directly.
inline double sigma_tilde_sq_at(double sigma_hat2, double big_c, double gamma_tilde, double r) {
    return sigma_hat2 + 2.0 * big_c * std::sqrt(2.0 * gamma_tilde * sigma_hat2 * r) +
           8.0 * gamma_tilde * big_c * big_c * r;
}

inline double sigma_tilde_sq(double sigma_hat2, double big_c, double gamma_tilde, std::size_t n) {
    return sigma_tilde_sq_at(sigma_hat2, big_c, gamma_tilde, log_rate(n));
}

/// Gamma_gamma(j) = sqrt(2 gamma (1 + eps) var r) + c_j gamma r, r = log n / n.
inline double gamma_of_j_at(double variance, double small_c, double gamma, double epsilon, double r) {
    return std::sqrt(2.0 * gamma * (1.0 + epsilon) * variance * r) + small_c * gamma * r;
}

inline double gamma_of_j(double variance, double small_c, double gamma, double epsilon, std::size_t n) {
    return gamma_of_j_at(variance, small_c, gamma, epsilon, log_rate(n));
}

/// All j in N^d with 2^{S_j} <= floor(n / log^2 n) (natural log), or with
/// S_j <= max_total_level when overridden. Sorted by S_j, then lexicographically.
inline std::vector<ResolutionIndex> enumerate_J(std::size_t n, std::size_t dim, const EstimatorConfig& cfg = {}) {
    if (dim == 0) throw ConfigError("dimension must be at least 1");
    int max_total = 0;
    if (cfg.max_total_level) {
        max_total = *cfg.max_total_level;
    } else {
        if (n < 8) throw ConfigError("enumerate_J needs n >= 8");
        const double ln = std::log(static_cast<double>(n));
        const auto cap = static_cast<long long>(std::floor(static_cast<double>(n) / (ln * ln)));
        while ((2LL << max_total) <= cap) ++max_total;
    }
    std::vector<ResolutionIndex> out;
    std::vector<int> j(dim, 0);
    std::function<void(std::size_t, int)> fill = [&](std::size_t l, int remaining) {
        if (l == dim) {
            out.emplace_back(j);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            j[l] = v;
            fill(l + 1, remaining - v);
        }
        j[l] = 0;
    };
    fill(0, max_total);
    std::sort(out.begin(), out.end());
    return out;
}

/// Data-dependent, gamma-independent quantities for one index.
struct IndexStatistics {
    ResolutionIndex j;
    double p_hat = 0.0;
    double sigma_hat_sq = 0.0;
    double sup_t = 0.0;
};

/// Everything the selection rule reports for one index.
struct IndexDiagnostics {
    ResolutionIndex j;
    double p_hat = 0.0;
    double sigma_hat_sq = 0.0;
    double sigma_tilde_sq = 0.0;
    double big_c = 0.0;
    double small_c = 0.0;
    double gamma = 0.0;
    double gamma_star = 0.0;
    double risk = 0.0;  // R_j
    double sup_t = 0.0;
};

struct Selection {
    ResolutionIndex j_hat;
    std::size_t position = 0;  // index of j_hat in diagnostics
    std::vector<IndexDiagnostics> diagnostics;
    bool outside_theory = false;

    const IndexDiagnostics& chosen() const { return diagnostics[position]; }
    double p_hat() const { return chosen().p_hat; }
};

/// p_hat, sigma_hat^2 and |T_j|_inf for every index of J at point x.
inline std::vector<IndexStatistics> compute_statistics(const Dataset& data, const DeconvContext& ctx,
                                                       std::span<const double> x,
                                                       const std::vector<ResolutionIndex>& indices) {
    if (data.dim() != ctx.dim()) throw ConfigError("dataset and noise model dimensions differ");
    std::vector<IndexStatistics> stats;
    stats.reserve(indices.size());
    for (const auto& j : indices) {
        KernelSum tj(ctx, j, x);
        const auto u = u_values(data, tj);
        stats.push_back({j, mean(u), sigma_hat_sq(u), sup_norm_Tj(tj)});
    }
    return stats;
}

/// Goldenshluger-Lepski rule over precomputed statistics:
///   R_j = max_{j'} { |p_{j ^ j'} - p_{j'}| - Gamma(j', j) }_+ + Gamma*(j),
///   Gamma(j, j') = Gamma(j) + Gamma(j ^ j'),  Gamma*(j) = max_{j'} Gamma(j, j'),
/// with j' ranging over the same set. Ties in argmin go to the earliest index
/// in (S_j, lexicographic) order.
inline Selection select_from_statistics(const std::vector<IndexStatistics>& stats, const EstimatorConfig& cfg,
                                        std::size_t n, double max_abs_y, double nu = 0.0) {
    cfg.validate();
    if (stats.empty()) throw ConfigError("empty index set");
    std::vector<std::size_t> order(stats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return stats[a].j < stats[b].j; });

    Selection sel;
    sel.outside_theory = cfg.outside_theory(nu);
    sel.diagnostics.reserve(stats.size());
    std::map<std::vector<int>, std::size_t> where;
    for (std::size_t pos : order) {
        const auto& s = stats[pos];
        IndexDiagnostics d;
        d.j = s.j;
        d.p_hat = s.p_hat;
        d.sigma_hat_sq = s.sigma_hat_sq;
        d.sup_t = s.sup_t;
        const auto pc = penalty_constants(cfg, s.sup_t, max_abs_y, n);
        d.big_c = pc.big_c;
        d.small_c = pc.small_c;
        d.sigma_tilde_sq = sigma_tilde_sq(s.sigma_hat_sq, pc.big_c, cfg.gamma_tilde, n);
        const double variance = cfg.variant == Variant::practical ? d.sigma_hat_sq : d.sigma_tilde_sq;
        d.gamma = gamma_of_j(variance, pc.small_c, cfg.gamma, cfg.epsilon, n);
        where[s.j.levels] = sel.diagnostics.size();
        sel.diagnostics.push_back(std::move(d));
    }

    auto lookup = [&](const ResolutionIndex& j) -> const IndexDiagnostics& {
        auto it = where.find(j.levels);
        if (it == where.end()) throw ConfigError("no statistics for meet index " + j.str());
        return sel.diagnostics[it->second];
    };

    auto& diag = sel.diagnostics;
    for (auto& dj : diag) {
        double worst_meet = 0.0;
        for (const auto& dk : diag) worst_meet = std::max(worst_meet, lookup(dj.j.meet(dk.j)).gamma);
        dj.gamma_star = dj.gamma + worst_meet;
    }
    std::size_t best = 0;
    for (std::size_t a = 0; a < diag.size(); ++a) {
        double bias = 0.0;
        for (const auto& dk : diag) {
            const auto& meet = lookup(diag[a].j.meet(dk.j));
            const double pair = dk.gamma + meet.gamma;  // Gamma(j', j)
            bias = std::max(bias, std::abs(meet.p_hat - dk.p_hat) - pair);
        }
        diag[a].risk = bias + diag[a].gamma_star;
        if (diag[a].risk < diag[best].risk) best = a;
    }
    sel.position = best;
    sel.j_hat = diag[best].j;
    return sel;
}

/// Computes statistics over J and applies the selection rule at point x.
inline Selection select_j_hat(const Dataset& data, const DeconvContext& ctx, std::span<const double> x,
                              const EstimatorConfig& cfg) {
    cfg.validate();
    const auto indices = enumerate_J(data.size(), data.dim(), cfg);
    const auto stats = compute_statistics(data, ctx, x, indices);
    return select_from_statistics(stats, cfg, data.size(), data.max_abs_response(), ctx.noise().nu());
}

}  // namespace wavedecon

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "deconv.hpp"
#include "density.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "noise.hpp"
#include "wavelet.hpp"

namespace wavedecon {

// ---------------------------------------------------------------------------
// Regression functions and designs

/// Donoho-Johnstone Doppler: sqrt(x (1 - x)) sin(2 pi 1.05 / (x + 0.05)).
inline double doppler(double x) {
    return std::sqrt(std::max(0.0, x * (1.0 - x))) * std::sin(2.0 * std::numbers::pi * 1.05 / (x + 0.05));
}

enum class Design { uniform, beta22, beta052 };

struct DesignInfo {
    Design design;
    const char* name;   // used in CSV/JSON output
    const char* label;  // short preset token
    double a, b;        // Beta parameters (uniform = Beta(1, 1))
};

inline constexpr std::array<DesignInfo, 3> kDesigns = {{
    {Design::uniform, "uniform", "u", 1.0, 1.0},
    {Design::beta22, "beta(2,2)", "b22", 2.0, 2.0},
    {Design::beta052, "beta(0.5,2)", "b052", 0.5, 2.0},
}};

inline const DesignInfo& design_info(Design d) {
    for (const auto& i : kDesigns)
        if (i.design == d) return i;
    throw ConfigError("unknown design");
}

inline Design parse_design(std::string_view s) {
    for (const auto& i : kDesigns)
        if (s == i.name || s == i.label) return i.design;
    if (s == "beta22") return Design::beta22;
    if (s == "beta052") return Design::beta052;
    throw ConfigError("unknown design '" + std::string(s) + "'");
}

/// Var(X) = ab / ((a + b)^2 (a + b + 1)).
inline double design_variance(Design d) {
    const auto& i = design_info(d);
    const double s = i.a + i.b;
    return i.a * i.b / (s * s * (s + 1.0));
}

inline double design_density(Design d, double x) {
    if (!(x > 0.0 && x < 1.0)) return 0.0;
    const auto& i = design_info(d);
    const double log_beta = std::lgamma(i.a) + std::lgamma(i.b) - std::lgamma(i.a + i.b);
    return std::exp((i.a - 1.0) * std::log(x) + (i.b - 1.0) * std::log1p(-x) - log_beta);
}

/// Var(X) / (Var(X) + 2 sigma^2) for Laplace covariate noise of scale sigma.
inline double reliability_ratio(Design d, double laplace_scale) {
    const double v = design_variance(d);
    return v / (v + 2.0 * laplace_scale * laplace_scale);
}

/// Truncation to two decimals, the convention of the published ratio table.
inline double truncate_2dp(double v) { return std::floor(v * 100.0 + 1e-9) / 100.0; }

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Independent generator for replication `rep`, seeded from base XOR rep.
inline std::mt19937_64 replication_stream(std::uint64_t base_seed, std::uint64_t rep) {
    const std::uint64_t s = base_seed ^ rep;
    std::seed_seq seq{splitmix64(s), splitmix64(s + 1), splitmix64(s + 2), splitmix64(s + 3)};
    return std::mt19937_64(seq);
}

/// Uniform on the open interval (0, 1) from 53 random bits.
inline double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Centered Laplace by inverse CDF.
inline double sample_laplace(std::mt19937_64& rng, double scale) {
    const double u = open_uniform(rng) - 0.5;
    return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

inline double sample_noise(std::mt19937_64& rng, const NoiseComponent& c) {
    if (const auto* l = std::get_if<LaplaceNoise>(&c)) return sample_laplace(rng, l->scale);
    if (const auto* g = std::get_if<GammaNoise>(&c)) return std::gamma_distribution<double>(g->shape, g->scale)(rng);
    return 0.0;
}

/// Beta(a, b) by the ratio of two Gamma draws; uniform draws directly.
inline double sample_design(std::mt19937_64& rng, Design d) {
    if (d == Design::uniform) return open_uniform(rng);
    const auto& i = design_info(d);
    const double g1 = std::gamma_distribution<double>(i.a, 1.0)(rng);
    const double g2 = std::gamma_distribution<double>(i.b, 1.0)(rng);
    return g1 / (g1 + g2);
}

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
    std::string id = "custom";
    std::string function_id = "doppler";
    std::function<double(double)> regression = doppler;
    Design design = Design::uniform;
    std::size_t n = 1024;
    double noise_sd = 0.15;
    NoiseComponent noise = LaplaceNoise{0.075};
    std::vector<double> points = {0.25, 0.90};
    std::size_t replications = 100;
    std::uint64_t seed = 20140101;

    void validate() const {
        if (n < 8) throw ConfigError("scenario needs n >= 8");
        if (noise_sd < 0.0) throw ConfigError("regression noise sd must be non-negative");
        if (const auto* l = std::get_if<LaplaceNoise>(&noise); l && !(l->scale > 0.0))
            throw ConfigError("Laplace scale must be positive");
        if (points.empty()) throw ConfigError("scenario has no evaluation points");
        for (double x : points)
            if (!(x > 0.0 && x < 1.0)) throw ConfigError("evaluation points must lie in (0, 1)");
        if (!regression) throw ConfigError("scenario has no regression function");
    }

    double laplace_scale() const {
        if (const auto* l = std::get_if<LaplaceNoise>(&noise)) return l->scale;
        return 0.0;
    }

    double m_true(double x) const { return regression(x); }
    /// p(x) = m(x) f_X(x).
    double p_true(double x) const { return regression(x) * design_density(design, x); }
};

/// "paper-{u|b22|b052}-{0075|010}": the six published cells.
inline Scenario preset(std::string_view name) {
    if (!name.starts_with("paper-")) throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
    auto rest = name.substr(6);
    const auto dash = rest.find('-');
    if (dash == std::string_view::npos) throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
    Scenario s;
    s.id = std::string(name);
    s.design = parse_design(rest.substr(0, dash));
    const auto sigma = rest.substr(dash + 1);
    if (sigma == "0075")
        s.noise = LaplaceNoise{0.075};
    else if (sigma == "010")
        s.noise = LaplaceNoise{0.10};
    else
        throw ConfigError("unknown noise level in preset '" + std::string(name) + "'");
    return s;
}

inline std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const char* sigma : {"0075", "010"})
        for (const auto& d : kDesigns) out.push_back(std::string("paper-") + d.label + "-" + sigma);
    return out;
}

struct SimulatedData {
    Dataset data;
    std::vector<double> x;  // unobserved true covariates
};

/// Y = m(X) + eps, W = X + delta, from the replication's own stream.
inline SimulatedData generate_dataset(const Scenario& sc, std::size_t rep) {
    auto rng = replication_stream(sc.seed, rep);
    std::normal_distribution<double> eps(0.0, 1.0);
    std::vector<double> x(sc.n), w(sc.n), y(sc.n);
    for (std::size_t u = 0; u < sc.n; ++u) {
        x[u] = sample_design(rng, sc.design);
        y[u] = sc.regression(x[u]) + sc.noise_sd * eps(rng);
        w[u] = x[u] + sample_noise(rng, sc.noise);
    }
    return {Dataset(std::move(w), std::move(y), 1), std::move(x)};
}

// ---------------------------------------------------------------------------
// Ground-truth projections

/// p_j = K_j(p) for a function of one variable supported in [lo, hi]:
/// coefficients p_jk = int p(y) phi_jk(y) dy by Simpson's rule on the dyadic
/// nodes of the scaling table, where phi is exact. The integration range is
/// cut at the ends of [lo, hi] so a jump of p there costs no accuracy; p is
/// sampled a hair inside the ends to pick up its one-sided limits.
class Projection {
public:
    Projection(const ScalingTable& table, int j, std::function<double(double)> p, double lo = 0.0, double hi = 1.0)
        : table_(&table), j_(j) {
        if (!(hi > lo)) throw ConfigError("projection support must have positive length");
        const double s = std::ldexp(1.0, j);
        first_ = static_cast<int>(std::floor(s * lo - table.support_max()));
        last_ = static_cast<int>(std::ceil(s * hi - table.support_min()));
        const auto nodes = table.phi_nodes();
        const double per_unit = 1.0 / table.step();
        const double inset = 1e-12 * (hi - lo);
        auto node_of = [&](double u) { return static_cast<long>(std::lround((u - table.support_min()) * per_unit)); };
        for (int k = first_; k <= last_; ++k) {
            const long a = std::max(0L, node_of(s * lo - k));
            const long b = std::min(static_cast<long>(nodes.size()) - 1, node_of(s * hi - k));
            double acc = 0.0;
            if (b > a) {
                auto f = [&](long i) {
                    const double y = std::clamp((table.node(static_cast<std::size_t>(i)) + k) / s, lo + inset, hi - inset);
                    return nodes[static_cast<std::size_t>(i)] * p(y);
                };
                long end = b;
                if ((b - a) % 2 == 1) {
                    if (b - a >= 3) {
                        // Simpson 3/8 on the last three intervals
                        acc += 9.0 / 8.0 * (f(b - 3) + 3 * f(b - 2) + 3 * f(b - 1) + f(b));
                        end = b - 3;
                    } else {
                        acc += 1.5 * (f(a) + f(b));  // trapezoid
                        end = a;
                    }
                }
                for (long i = a; i < end; i += 2) acc += f(i) + 4 * f(i + 1) + f(i + 2);
            }
            coeffs_.push_back(acc * table.step() / 3.0 / std::sqrt(s));
        }
    }

    int level() const { return j_; }

    /// sum_k p_jk phi_jk(x).
    double operator()(double x) const {
        const double s = std::ldexp(1.0, j_);
        double v = 0.0;
        const int k_lo = std::max(first_, static_cast<int>(std::floor(s * x - table_->support_max())));
        const int k_hi = std::min(last_, static_cast<int>(std::ceil(s * x - table_->support_min())));
        for (int k = k_lo; k <= k_hi; ++k) v += coeffs_[static_cast<std::size_t>(k - first_)] * table_->phi(s * x - k);
        return v * std::sqrt(s);
    }

private:
    const ScalingTable* table_;
    int j_;
    int first_ = 0, last_ = -1;
    std::vector<double> coeffs_;
};

/// p_j(x) for p supported in [lo, hi].
inline double true_projection(const ScalingTable& table, const std::function<double(double)>& p, int j, double x,
                              double lo = 0.0, double hi = 1.0) {
    return Projection(table, j, p, lo, hi)(x);
}

/// Separable p(y) = prod_l p_l(y_l): K_j(p)(x) = prod_l K_{j_l}(p_l)(x_l).
inline double true_projection(const ScalingTable& table, std::span<const std::function<double(double)>> factors,
                              const ResolutionIndex& j, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t l = 0; l < j.dim(); ++l) v *= true_projection(table, factors[l], j[l], x[l]);
    return v;
}

/// argmin_j |p_hat_j - p| over the computed indices; ties go to smaller S_j, then lexicographic.
inline std::size_t oracle_position(const std::vector<IndexStatistics>& stats, double p) {
    if (stats.empty()) throw ConfigError("empty index set");
    std::size_t best = 0;
    for (std::size_t i = 1; i < stats.size(); ++i) {
        const double e = std::abs(stats[i].p_hat - p), eb = std::abs(stats[best].p_hat - p);
        if (e < eb || (e == eb && stats[i].j < stats[best].j)) best = i;
    }
    return best;
}

inline ResolutionIndex oracle_index(const std::vector<IndexStatistics>& stats, double p) {
    return stats[oracle_position(stats, p)].j;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct ResultRow {
    std::size_t replication = 0;
    std::string scenario;
    std::string design;
    double sigma = 0.0;
    double x0 = 0.0;
    std::string j_hat;
    double p_hat = 0.0;
    double p_oracle = 0.0;
    std::string j_oracle;
    double f_hat = 0.0;
    double m_hat = 0.0;
    double abs_err_m = 0.0;
    double abs_err_p = 0.0;
    double abs_err_oracle = 0.0;
    double bandwidth = 0.0;
    bool ok = true;
    std::string error;
};

struct ResultsTable {
    std::vector<ResultRow> rows;
    std::size_t failures = 0;
    double seconds = 0.0;

    std::vector<const ResultRow*> at(double x0) const {
        std::vector<const ResultRow*> out;
        for (const auto& r : rows)
            if (r.ok && std::abs(r.x0 - x0) < 1e-12) out.push_back(&r);
        return out;
    }
};

inline double mae(const ResultsTable& t, double x0) {
    const auto rows = t.at(x0);
    if (rows.empty()) throw ConfigError("MAE undefined: no successful replications at x0");
    double s = 0.0;
    for (const auto* r : rows) s += r->abs_err_m;
    return s / static_cast<double>(rows.size());
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw ConfigError("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct RunOptions {
    unsigned threads = 1;
    int scaling_level = 10;
    QuadratureSettings quadrature{};
    std::optional<std::filesystem::path> cache_dir;
    std::string wavelet = "coif5";
    /// Scales every tabulated covariate range.
    double widen = 1.0;
};

/// Runs `count` jobs on up to `threads` workers; results are indexed by job.
template <typename Job>
void parallel_for(std::size_t count, unsigned threads, Job&& job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) job(i);
        });
}

inline DeconvContext make_context(const Scenario& sc, const RunOptions& opt) {
    return DeconvContext(load_wavelet(opt.wavelet), NoiseModel::isotropic(sc.noise, 1), opt.scaling_level,
                         opt.quadrature, CoverageRule{opt.widen}, opt.cache_dir);
}

namespace detail {

inline std::vector<ResultRow> run_replication(const Scenario& sc, const DeconvContext& ctx, std::size_t rep,
                                              const EstimatorConfig& est, const DensityConfig& dens) {
    const auto sim = generate_dataset(sc, rep);
    std::vector<ResultRow> rows;
    for (double x0 : sc.points) {
        ResultRow r;
        r.replication = rep;
        r.scenario = sc.id;
        r.design = design_info(sc.design).name;
        r.sigma = sc.laplace_scale();
        r.x0 = x0;
        const double x[1] = {x0};
        auto attempt = [&](const DeconvContext& c) {
            const auto indices = enumerate_J(sim.data.size(), 1, est);
            const auto stats = compute_statistics(sim.data, c, x, indices);
            const auto sel = select_from_statistics(stats, est, sim.data.size(), sim.data.max_abs_response(),
                                                    c.noise().nu());
            const auto dens_choice = gl_bandwidth(sim.data, x, dens, c.noise());
            const double p = sc.p_true(x0);
            const auto oracle = oracle_position(stats, p);
            r.j_hat = sel.j_hat.str();
            r.p_hat = sel.p_hat();
            r.j_oracle = stats[oracle].j.str();
            r.p_oracle = stats[oracle].p_hat;
            r.f_hat = dens_choice.f_hat;
            r.bandwidth = dens_choice.bandwidth;
            r.m_hat = r.p_hat / ratio_denominator(r.f_hat, sim.data.size());
            r.abs_err_m = std::abs(r.m_hat - sc.m_true(x0));
            r.abs_err_p = std::abs(r.p_hat - p);
            r.abs_err_oracle = std::abs(r.p_oracle - p);
        };
        try {
            try {
                attempt(ctx);
            } catch (const RangeError&) {
                attempt(ctx.widened());
            }
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace detail

/// One row per (replication, x0), ordered by replication then point,
/// independent of the worker count. More than 5% failed rows is an error.
inline ResultsTable run_monte_carlo(const Scenario& sc, const DeconvContext& ctx, const EstimatorConfig& est,
                                    const DensityConfig& dens, unsigned threads = 1) {
    sc.validate();
    est.validate();
    const auto start = std::chrono::steady_clock::now();
    // build every table before workers start
    for (const auto& j : enumerate_J(sc.n, 1, est)) (void)ctx.table(0, j[0]);
    std::vector<std::vector<ResultRow>> per_rep(sc.replications);
    parallel_for(sc.replications, threads,
                 [&](std::size_t rep) { per_rep[rep] = detail::run_replication(sc, ctx, rep, est, dens); });
    ResultsTable t;
    for (auto& rows : per_rep)
        for (auto& r : rows) {
            if (!r.ok) ++t.failures;
            t.rows.push_back(std::move(r));
        }
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return t;
}

inline ResultsTable run_monte_carlo(const Scenario& sc, const EstimatorConfig& est, const DensityConfig& dens,
                                    const RunOptions& opt = {}) {
    return run_monte_carlo(sc, make_context(sc, opt), est, dens, opt.threads);
}

/// Throws when more than 5% of rows failed.
inline void check_failure_rate(const ResultsTable& t) {
    if (t.rows.empty()) throw ConfigError("no replications were run");
    if (static_cast<double>(t.failures) > 0.05 * static_cast<double>(t.rows.size()))
        throw std::runtime_error(std::to_string(t.failures) + " of " + std::to_string(t.rows.size()) +
                                 " replications failed");
}

// ---------------------------------------------------------------------------
// Gamma scan

struct GammaScanRow {
    std::size_t replication = 0;
    double gamma = 0.0;
    std::string j_hat;
    double p_hat = 0.0;
    double abs_err_p = 0.0;
};

struct GammaCurve {
    std::vector<double> gammas;
    std::vector<double> risks;  // mean |p_hat_{j_hat} - p(x0)| per gamma
    std::vector<GammaScanRow> rows;
    double max_jump_ratio = 1.0;
    bool jump = false;
};

/// Largest ratio between neighbouring risks (larger over smaller).
inline double max_adjacent_ratio(std::span<const double> risks) {
    double best = 1.0;
    for (std::size_t i = 1; i < risks.size(); ++i) {
        const double a = risks[i - 1], b = risks[i];
        const double lo = std::min(a, b), hi = std::max(a, b);
        if (lo > 0.0) best = std::max(best, hi / lo);
    }
    return best;
}

/// Pointwise risk of p_hat_{j_hat}(x0) as a function of gamma. Data and
/// statistics are shared across the grid; only the selection is redone.
inline GammaCurve gamma_scan(const Scenario& sc, const DeconvContext& ctx, std::vector<double> gammas, double x0,
                             EstimatorConfig est = {}, unsigned threads = 1, double jump_threshold = 1.5) {
    sc.validate();
    if (gammas.empty()) throw ConfigError("gamma grid is empty");
    for (double g : gammas)
        if (!(g > 0.0)) throw ConfigError("gamma grid must be positive");
    std::sort(gammas.begin(), gammas.end());
    const auto indices = enumerate_J(sc.n, 1, est);
    for (const auto& j : indices) (void)ctx.table(0, j[0]);
    const double p = sc.p_true(x0);
    const double x[1] = {x0};

    std::vector<std::vector<GammaScanRow>> per_rep(sc.replications);
    parallel_for(sc.replications, threads, [&](std::size_t rep) {
        const auto sim = generate_dataset(sc, rep);
        const auto stats = compute_statistics(sim.data, ctx, x, indices);
        for (double g : gammas) {
            EstimatorConfig cfg = est;
            cfg.gamma = g;
            const auto sel =
                select_from_statistics(stats, cfg, sim.data.size(), sim.data.max_abs_response(), ctx.noise().nu());
            per_rep[rep].push_back({rep, g, sel.j_hat.str(), sel.p_hat(), std::abs(sel.p_hat() - p)});
        }
    });

    GammaCurve c;
    c.gammas = gammas;
    c.risks.assign(gammas.size(), 0.0);
    for (auto& rows : per_rep)
        for (std::size_t i = 0; i < rows.size(); ++i) {
            c.risks[i] += rows[i].abs_err_p;
            c.rows.push_back(rows[i]);
        }
    for (double& r : c.risks) r /= static_cast<double>(std::max<std::size_t>(sc.replications, 1));
    c.max_jump_ratio = max_adjacent_ratio(c.risks);
    c.jump = c.max_jump_ratio >= jump_threshold;
    return c;
}

}  // namespace wavedecon

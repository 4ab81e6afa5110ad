#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include <wavedecon/io.hpp>
#include <wavedecon/simlab.hpp>

using namespace wavedecon;

namespace {

const ScalingTable& coif5_table() {
    static const ScalingTable t = tabulate(load_wavelet("coif5"), 10);
    return t;
}

double laplace_cdf(double x, double s) { return x < 0 ? 0.5 * std::exp(x / s) : 1.0 - 0.5 * std::exp(-x / s); }

}  // namespace

TEST(Doppler, Envelope) {
    EXPECT_EQ(doppler(0.0), 0.0);
    EXPECT_EQ(doppler(1.0), 0.0);
    double worst = 0.0;
    for (int i = 0; i <= 10000; ++i) worst = std::max(worst, std::abs(doppler(i / 10000.0)));
    EXPECT_LE(worst, 0.5);
    // 2 pi 1.05 / 0.3 = 7 pi, so the sine vanishes up to rounding
    EXPECT_NEAR(doppler(0.25), 0.0, 1e-14);
    EXPECT_NEAR(doppler(0.9), 0.3 * std::sin(2 * std::numbers::pi * 1.05 / 0.95), 1e-15);
}

TEST(Designs, VarianceAndDensity) {
    EXPECT_DOUBLE_EQ(design_variance(Design::uniform), 1.0 / 12.0);
    EXPECT_DOUBLE_EQ(design_variance(Design::beta22), 4.0 / (16.0 * 5.0));
    EXPECT_DOUBLE_EQ(design_variance(Design::beta052), 1.0 / (6.25 * 3.5));
    EXPECT_NEAR(design_density(Design::beta22, 0.5), 1.5, 1e-14);
    EXPECT_EQ(design_density(Design::uniform, 1.2), 0.0);
    for (const auto& d : kDesigns) {
        // unit mass away from the integrable singularity
        double s = 0.0;
        const int m = 200000;
        for (int i = 0; i < m; ++i) {
            const double x = (i + 0.5) / m;
            s += design_density(d.design, x) / m;
        }
        EXPECT_NEAR(s, 1.0, d.design == Design::beta052 ? 5e-3 : 1e-8) << d.name;
    }
}

TEST(Designs, ReliabilityRatios) {
    const double expect[2][3] = {{0.88, 0.81, 0.80}, {0.80, 0.71, 0.69}};
    const double sigma[2] = {0.075, 0.10};
    for (int s = 0; s < 2; ++s)
        for (int d = 0; d < 3; ++d)
            EXPECT_DOUBLE_EQ(truncate_2dp(reliability_ratio(kDesigns[d].design, sigma[s])), expect[s][d])
                << kDesigns[d].name << " " << sigma[s];
    EXPECT_NEAR(reliability_ratio(Design::uniform, 0.075), 0.8811, 1e-4);
}

TEST(Presets, Names) {
    const auto names = preset_names();
    ASSERT_EQ(names.size(), 6u);
    const auto s = preset("paper-b052-010");
    EXPECT_EQ(s.design, Design::beta052);
    EXPECT_DOUBLE_EQ(s.laplace_scale(), 0.10);
    EXPECT_EQ(s.n, 1024u);
    EXPECT_DOUBLE_EQ(s.noise_sd, 0.15);
    EXPECT_THROW((void)preset("paper-u-020"), ConfigError);
    EXPECT_THROW((void)preset("other"), ConfigError);
    Scenario bad;
    bad.points = {1.0};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad.points = {0.5};
    bad.n = 4;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Sampling, Deterministic) {
    const auto sc = preset("paper-b22-0075");
    const auto a = generate_dataset(sc, 7), b = generate_dataset(sc, 7), c = generate_dataset(sc, 8);
    ASSERT_EQ(a.data.size(), b.data.size());
    for (std::size_t u = 0; u < a.data.size(); ++u) {
        EXPECT_EQ(a.data.covariate(u)[0], b.data.covariate(u)[0]);
        EXPECT_EQ(a.data.response(u), b.data.response(u));
    }
    EXPECT_NE(a.data.response(0), c.data.response(0));
}

TEST(Sampling, LaplaceMomentsAndKS) {
    Scenario sc;
    sc.n = 100000;
    sc.noise = LaplaceNoise{0.1};
    const auto sim = generate_dataset(sc, 3);
    std::vector<double> delta(sc.n);
    for (std::size_t u = 0; u < sc.n; ++u) delta[u] = sim.data.covariate(u)[0] - sim.x[u];
    EXPECT_NEAR(sigma_hat_sq(delta), 0.02, 0.05 * 0.02);
    std::sort(delta.begin(), delta.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double f = laplace_cdf(delta[i], 0.1);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / sc.n), std::abs(f - static_cast<double>(i + 1) / sc.n)});
    }
    EXPECT_LT(ks, 1.628 / std::sqrt(static_cast<double>(sc.n)));  // 1% critical value
}

TEST(Sampling, DesignMoments) {
    for (const auto& d : kDesigns) {
        Scenario sc;
        sc.n = 100000;
        sc.design = d.design;
        const auto sim = generate_dataset(sc, 1);
        const double m = mean(sim.x);
        EXPECT_NEAR(m, d.a / (d.a + d.b), 0.005) << d.name;
        EXPECT_NEAR(sigma_hat_sq(sim.x), design_variance(d.design), 0.03 * design_variance(d.design)) << d.name;
        for (double x : sim.x) ASSERT_TRUE(x > 0.0 && x < 1.0);
    }
}

TEST(Projection, PartitionOfUnity) {
    for (int j : {0, 2, 4})
        for (double x : {0.1, 0.5, 0.83})
            EXPECT_NEAR(true_projection(coif5_table(), [](double) { return 1.0; }, j, x, -60.0, 61.0), 1.0, 1e-6);
}

TEST(Projection, ReproducesLines) {
    for (int j : {0, 1, 3})
        for (double x : {0.3, 0.71})
            EXPECT_NEAR(true_projection(coif5_table(), [](double y) { return y; }, j, x, -60.0, 61.0), x, 1e-5);
}

TEST(Projection, LatticeLemma) {
    const auto& t = coif5_table();
    const auto p = [](double y) { return doppler(y) * design_density(Design::beta22, y); };
    const std::pair<int, int> pairs[] = {{0, 2}, {2, 1}, {1, 3}};
    for (const auto& [j, jp] : pairs) {
        const Projection inner(t, j, p);
        const double s = std::ldexp(1.0, j);
        const double lo = (std::floor(-t.support_max()) + t.support_min()) / s - 1.0;
        const double hi = (std::ceil(s - t.support_min()) + t.support_max()) / s + 1.0;
        const Projection outer(t, jp, [&](double y) { return inner(y); }, lo, hi);
        const Projection meet(t, std::min(j, jp), p);
        for (double x : {0.25, 0.6}) EXPECT_NEAR(outer(x), meet(x), 1e-5) << j << "," << jp << " x=" << x;
    }
}

TEST(Projection, BiasDecaysForLipschitz) {
    // |y - 1/2| is Lipschitz with a kink at the evaluation point
    const auto p = [](double y) { return std::abs(y - 0.5); };
    std::vector<double> js, logs;
    for (int j = 2; j <= 7; ++j) {
        js.push_back(j);
        logs.push_back(std::log2(std::abs(true_projection(coif5_table(), p, j, 0.5, -60.0, 61.0) - 0.0)));
    }
    const double mx = mean(js), my = mean(logs);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < js.size(); ++i) {
        sxy += (js[i] - mx) * (logs[i] - my);
        sxx += (js[i] - mx) * (js[i] - mx);
    }
    EXPECT_LE(sxy / sxx, -0.8);
}

TEST(Oracle, BruteForceScan) {
    std::vector<IndexStatistics> stats;
    for (int j = 0; j < 5; ++j) stats.push_back({ResolutionIndex{j}, 0.1 * j, 0.0, 0.0});
    EXPECT_EQ(oracle_index(stats, 0.26), ResolutionIndex{3});
    EXPECT_EQ(oracle_index(stats, 0.25), ResolutionIndex{2});  // tie goes to the coarser index
    EXPECT_EQ(oracle_index({stats.front()}, 7.0), ResolutionIndex{0});
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        for (auto& s : stats) s.p_hat = g(rng);
        const double p = g(rng);
        const auto pos = oracle_position(stats, p);
        for (const auto& s : stats) EXPECT_LE(std::abs(stats[pos].p_hat - p), std::abs(s.p_hat - p));
    }
}

TEST(MonteCarlo, EmptyRun) {
    auto sc = preset("paper-u-0075");
    sc.replications = 0;
    const auto t = run_monte_carlo(sc, EstimatorConfig{}, DensityConfig{});
    EXPECT_TRUE(t.rows.empty());
    EXPECT_THROW((void)mae(t, 0.25), ConfigError);
    EXPECT_THROW(check_failure_rate(t), ConfigError);
}

TEST(MonteCarlo, RowsIndependentOfThreads) {
    auto sc = preset("paper-u-0075");
    sc.replications = 4;
    RunOptions one, two;
    two.threads = 2;
    const auto a = run_monte_carlo(sc, EstimatorConfig{}, DensityConfig{}, one);
    const auto b = run_monte_carlo(sc, EstimatorConfig{}, DensityConfig{}, two);
    ASSERT_EQ(a.rows.size(), 8u);
    std::ostringstream sa, sb;
    io::write_results(sa, a);
    io::write_results(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].replication, i / 2);
        EXPECT_TRUE(a.rows[i].ok) << a.rows[i].error;
        EXPECT_NEAR(a.rows[i].abs_err_m, std::abs(a.rows[i].m_hat - doppler(a.rows[i].x0)), 1e-15);
    }
    double s = 0.0;
    for (const auto* r : a.at(0.25)) s += r->abs_err_m;
    EXPECT_DOUBLE_EQ(mae(a, 0.25), s / 4.0);
}

TEST(MonteCarlo, FailureRate) {
    ResultsTable t;
    t.rows.resize(40);
    t.failures = 2;
    EXPECT_NO_THROW(check_failure_rate(t));
    t.failures = 3;
    EXPECT_THROW(check_failure_rate(t), std::runtime_error);
}

TEST(MonteCarlo, DiracAdaptiveNearOracle) {
    Scenario sc;
    sc.noise = DiracNoise{};
    sc.n = 16384;
    sc.replications = 30;
    // the Doppler is slowly varying here; near 0.25 the per-replication
    // oracle keeps finding lucky fine levels and the ratio drifts past 2
    sc.points = {0.9};
    const auto t = run_monte_carlo(sc, EstimatorConfig{}, DensityConfig{});
    double ad = 0.0, orc = 0.0;
    for (const auto* r : t.at(0.9)) {
        ad += r->abs_err_p;
        orc += r->abs_err_oracle;
    }
    EXPECT_LE(ad, 2.0 * orc);
}

TEST(GammaScan, AggregationAndOrder) {
    auto sc = preset("paper-b22-0075");
    sc.replications = 6;
    const DeconvContext ctx = make_context(sc, {});
    const auto c = gamma_scan(sc, ctx, {1.0, 0.2, 0.5}, 0.25);
    ASSERT_EQ(c.gammas.size(), 3u);
    EXPECT_TRUE(std::is_sorted(c.gammas.begin(), c.gammas.end()));
    ASSERT_EQ(c.rows.size(), 18u);
    for (std::size_t g = 0; g < 3; ++g) {
        double s = 0.0;
        for (const auto& r : c.rows)
            if (r.gamma == c.gammas[g]) s += r.abs_err_p;
        EXPECT_NEAR(c.risks[g], s / 6.0, 1e-15);
    }
    const auto single = gamma_scan(sc, ctx, {0.5}, 0.25);
    EXPECT_EQ(single.risks.size(), 1u);
    EXPECT_FALSE(single.jump);
    EXPECT_THROW((void)gamma_scan(sc, ctx, {}, 0.25), ConfigError);
    EXPECT_THROW((void)gamma_scan(sc, ctx, {0.0}, 0.25), ConfigError);
    EXPECT_DOUBLE_EQ(max_adjacent_ratio(std::vector<double>{1.0, 1.2, 3.0, 2.9}), 2.5);
}

TEST(Io, ResultsCsv) {
    ResultsTable t;
    ResultRow r;
    r.scenario = "s";
    r.design = "beta(2,2)";
    r.x0 = 0.25;
    r.j_hat = "(1)";
    r.p_hat = 0.1;
    t.rows.push_back(r);
    r.ok = false;
    r.error = "boom, twice";
    t.rows.push_back(r);
    std::ostringstream os;
    io::write_results(os, t);
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), io::kResultsHeader);
    EXPECT_NE(text.find("\"beta(2,2)\""), std::string::npos);
    EXPECT_NE(text.find("0.10000000000000001"), std::string::npos);
    EXPECT_NE(text.find("error,\"boom, twice\""), std::string::npos);
}

TEST(Io, DatasetCsv) {
    std::istringstream good("w,y\n0.5,1\n 0.25 , -2e-1\n\n");
    const auto d = io::read_dataset(good);
    EXPECT_EQ(d.size(), 2u);
    EXPECT_EQ(d.response(1), -0.2);
    std::istringstream bad("w,y\n0.5,1\n0.3,abc\n");
    try {
        (void)io::read_dataset(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream ragged("w1,w2,y\n0.5,1,2\n0.3,1\n");
    EXPECT_THROW((void)io::read_dataset(ragged), ParseError);
    std::ostringstream os;
    io::write_dataset(os, d);
    std::istringstream back(os.str());
    const auto d2 = io::read_dataset(back);
    EXPECT_EQ(d2.covariate(1)[0], 0.25);
}

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <wavedecon/wavelet.hpp>

using namespace wavedecon;

namespace {

const WaveletBasis& coif5() {
    static const WaveletBasis b = load_wavelet(Family::coiflet, 5);
    return b;
}

const ScalingTable& coif5_table() {
    static const ScalingTable t = tabulate(coif5(), 10);
    return t;
}

double shift_sum(const ScalingTable& t, double x) {
    double s = 0.0;
    for (int k = -40; k <= 40; ++k) s += t.phi(x - k);
    return s;
}

}  // namespace

TEST(Catalog, Coiflet5Filter) {
    const auto& b = coif5();
    ASSERT_EQ(b.filter.size(), 30u);
    EXPECT_NEAR(std::accumulate(b.filter.begin(), b.filter.end(), 0.0), std::numbers::sqrt2, 1e-14);
    EXPECT_EQ(b.support_min, -10);
    EXPECT_EQ(b.support_max, 19);
    EXPECT_EQ(b.radius(), 19);
}

TEST(Catalog, Daubechies4IsOrthonormal) {
    const auto b = load_wavelet(Family::daubechies, 4);
    ASSERT_EQ(b.filter.size(), 8u);
    double sq = 0.0;
    for (double h : b.filter) sq += h * h;
    EXPECT_NEAR(sq, 1.0, 1e-14);
    // double shifts are orthogonal
    for (std::size_t s = 2; s < b.filter.size(); s += 2) {
        double dot = 0.0;
        for (std::size_t i = 0; i + s < b.filter.size(); ++i) dot += b.filter[i] * b.filter[i + s];
        EXPECT_NEAR(dot, 0.0, 1e-14) << "shift " << s;
    }
}

TEST(Catalog, UnknownOrder) {
    try {
        (void)load_wavelet(Family::coiflet, 99);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown order"), std::string::npos);
    }
    EXPECT_THROW((void)load_wavelet("haar7"), ConfigError);
    EXPECT_EQ(load_wavelet("coiflet5").name(), "coif5");
    EXPECT_EQ(load_wavelet("db4").filter.size(), 8u);
}

TEST(Catalog, EveryFilterIsNormalized) {
    for (int o = 1; o <= 5; ++o) {
        const auto b = load_wavelet(Family::coiflet, o);
        EXPECT_EQ(b.filter.size(), static_cast<std::size_t>(6 * o));
        EXPECT_NEAR(std::accumulate(b.filter.begin(), b.filter.end(), 0.0), std::numbers::sqrt2, 1e-13);
    }
    for (int o = 2; o <= 10; ++o) {
        const auto b = load_wavelet(Family::daubechies, o);
        EXPECT_EQ(b.filter.size(), static_cast<std::size_t>(2 * o));
        EXPECT_NEAR(std::accumulate(b.filter.begin(), b.filter.end(), 0.0), std::numbers::sqrt2, 1e-13);
    }
}

TEST(ScalingTable, UnitMass) {
    const auto& t = coif5_table();
    const auto v = t.phi_nodes();
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0) * t.step(), 1.0, 1e-6);
}

TEST(ScalingTable, PartitionOfUnity) {
    const auto& t = coif5_table();
    EXPECT_NEAR(shift_sum(t, 0.37), 1.0, 1e-5);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-19.0, 19.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) worst = std::max(worst, std::abs(shift_sum(t, u(rng)) - 1.0));
    EXPECT_LT(worst, 1e-4);
}

TEST(ScalingTable, CompactSupport) {
    const auto& t = coif5_table();
    for (double x : {-19.5, -10.001, 19.001, 25.0, -100.0}) EXPECT_EQ(t.phi(x), 0.0) << x;
    const auto db = tabulate(load_wavelet("db6"), 8);
    EXPECT_EQ(db.phi(-0.01), 0.0);
    EXPECT_EQ(db.phi(11.01), 0.0);
}

TEST(ScalingTable, NodeValuesSatisfyRefinement) {
    // phi(x) = sqrt2 sum h_k phi(2x - k) at every node of the coarser grid
    const auto& b = coif5();
    const auto& t = coif5_table();
    double worst = 0.0;
    for (double x = -9.0; x < 19.0; x += 0.3125) {
        double r = 0.0;
        for (std::size_t k = 0; k < b.filter.size(); ++k)
            r += b.filter[k] * t.phi(2.0 * x - (static_cast<int>(k) + b.support_min));
        worst = std::max(worst, std::abs(std::numbers::sqrt2 * r - t.phi(x)));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(ScalingTable, DerivativesMatchDifferences) {
    // independent check of the derivative tables by central differences of phi
    const auto& t = coif5_table();
    const double h = t.step();
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t i = 2; i + 2 < t.size(); i += 7) {
        const double x = t.node(i);
        e1 = std::max(e1, std::abs((t.phi(x + h) - t.phi(x - h)) / (2 * h) - t.d1(x)));
        e2 = std::max(e2, std::abs((t.phi(x + h) - 2 * t.phi(x) + t.phi(x - h)) / (h * h) - t.d2(x)));
    }
    EXPECT_LT(e1, 1e-3);
    EXPECT_LT(e2, 1e-3);
}

TEST(ScalingTable, DerivativeIntegralsVanish) {
    const auto& t = coif5_table();
    const auto d1 = t.d1_nodes();
    const auto d2 = t.d2_nodes();
    EXPECT_NEAR(std::accumulate(d1.begin(), d1.end(), 0.0) * t.step(), 0.0, 1e-8);
    EXPECT_NEAR(std::accumulate(d2.begin(), d2.end(), 0.0) * t.step(), 0.0, 1e-6);
}

TEST(ScalingTable, PolynomialReproduction) {
    const auto& b = coif5();
    const auto& t = coif5_table();
    const int degree = std::min(b.reproduction_degree(), 4);
    const auto nodes = t.phi_nodes();
    for (int ell = 0; ell <= degree; ++ell) {
        std::vector<double> moment;  // m(k) = int y^ell phi(y - k) dy
        for (int k = -40; k <= 40; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < nodes.size(); ++i) s += std::pow(t.node(i) + k, ell) * nodes[i];
            moment.push_back(s * t.step());
        }
        double worst = 0.0;
        for (double x = 0.0; x <= 1.0; x += 0.05) {
            double r = 0.0;
            for (int k = -40; k <= 40; ++k) r += moment[static_cast<std::size_t>(k + 40)] * t.phi(x - k);
            worst = std::max(worst, std::abs(r - std::pow(x, ell)));
        }
        EXPECT_LT(worst, 1e-3) << "degree " << ell;
    }
}

TEST(ScalingTable, RejectsCoarseLevel) { EXPECT_THROW((void)tabulate(coif5(), 3), ConfigError); }

TEST(PhiJk, IdentityScale) {
    const auto& t = coif5_table();
    const ResolutionIndex j{0};
    const int k[1] = {0};
    for (double x : {-3.3, 0.0, 0.4, 7.25}) {
        const double xs[1] = {x};
        EXPECT_DOUBLE_EQ(eval_phi_jk(t, j, k, xs), t.phi(x));
    }
}

TEST(PhiJk, DilatedValue) {
    const auto& t = coif5_table();
    const int k[1] = {0};
    const double x[1] = {0.5};
    EXPECT_DOUBLE_EQ(eval_phi_jk(t, ResolutionIndex{1}, k, x), std::numbers::sqrt2 * t.phi(1.0));
}

TEST(PhiJk, TensorProduct) {
    const auto& t = coif5_table();
    const ResolutionIndex j{2, 1};
    const int k[2] = {1, -2};
    const double x[2] = {0.3, 0.7};
    const double a = 2.0 * t.phi(4 * 0.3 - 1), b = std::numbers::sqrt2 * t.phi(2 * 0.7 + 2);
    EXPECT_NEAR(eval_phi_jk(t, j, k, x), a * b, 1e-15);
}

TEST(PhiJk, AbsoluteSumBound) {
    const auto& b = coif5();
    const auto& t = coif5_table();
    const double a = 2.0 * b.radius() + 1.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const ResolutionIndex j{trial % 4, (trial / 4) % 3};
        const double x[2] = {u(rng), u(rng)};
        double s = 0.0;
        for (const auto& k : active_indices(b, j, x)) s += std::abs(eval_phi_jk(t, j, k, x));
        EXPECT_LE(s, a * a * t.sup_norm() * t.sup_norm() * std::pow(2.0, j.total() / 2.0));
    }
}

TEST(ActiveIndices, ShortFilter) {
    const auto haar = custom_wavelet({std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2}, 0, 1, 0.0);
    ASSERT_EQ(haar.radius(), 1);
    const double x0[1] = {0.0}, xh[1] = {0.5};
    const auto at0 = active_indices(haar, ResolutionIndex{0}, x0);
    ASSERT_EQ(at0.size(), 3u);
    EXPECT_EQ(at0[0][0], -1);
    EXPECT_EQ(at0[2][0], 1);
    const auto ath = active_indices(haar, ResolutionIndex{0}, xh);
    ASSERT_EQ(ath.size(), 2u);
    EXPECT_EQ(ath[0][0], 0);
    EXPECT_EQ(ath[1][0], 1);
}

TEST(ActiveIndices, CardinalityAndProduct) {
    const auto& b = coif5();
    const double x[2] = {0.3, 0.81};
    const ResolutionIndex j{2, 3};
    const auto all = active_indices(b, j, x);
    const auto r0 = active_range(b, 2, 0.3), r1 = active_range(b, 3, 0.81);
    EXPECT_EQ(all.size(), static_cast<std::size_t>(r0.size() * r1.size()));
    EXPECT_LE(all.size(), static_cast<std::size_t>((2 * b.radius() + 1) * (2 * b.radius() + 1)));
    for (const auto& k : all) {
        EXPECT_LE(std::abs(4 * 0.3 - k[0]), b.radius());
        EXPECT_LE(std::abs(8 * 0.81 - k[1]), b.radius());
    }
    // every k with a non-zero phi_jk(x) is listed
    const auto& t = coif5_table();
    std::size_t nonzero = 0;
    for (int k0 = -40; k0 <= 40; ++k0)
        for (int k1 = -40; k1 <= 40; ++k1) {
            const int k[2] = {k0, k1};
            if (eval_phi_jk(t, j, k, x) != 0.0) ++nonzero;
        }
    EXPECT_LE(nonzero, all.size());
}

TEST(FourierPhi, UnitMassAndSymmetry) {
    const auto& b = coif5();
    EXPECT_NEAR(std::abs(fourier_phi(b, 0.0) - std::complex<double>(1.0, 0.0)), 0.0, 1e-13);
    for (double t : {0.3, 1.7, 9.0, 44.4}) {
        const auto p = fourier_phi(b, t), m = fourier_phi(b, -t);
        EXPECT_NEAR(p.real(), m.real(), 1e-14);
        EXPECT_NEAR(p.imag(), -m.imag(), 1e-14);
    }
}

TEST(FourierPhi, PolynomialDecay) {
    const auto& b = coif5();
    double worst = 0.0;
    for (double t = 0.0; t <= 200.0; t += 0.05) worst = std::max(worst, std::abs(fourier_phi(b, t)) * std::pow(1 + t, 2));
    EXPECT_LT(worst, 50.0);
    EXPECT_GE(b.regularity, 2);
}

TEST(FourierPhi, MatchesDirectQuadrature) {
    const auto& b = coif5();
    const auto& t = coif5_table();
    const auto v = t.phi_nodes();
    double worst = 0.0;
    for (double w = -50.0; w <= 50.0; w += 0.77) {
        std::complex<double> q = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) q += std::polar(v[i], -w * t.node(i));
        q *= t.step();
        worst = std::max(worst, std::abs(q - fourier_phi(b, w)));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(ResolutionIndexTest, OrderMeetAndDominance) {
    const ResolutionIndex a{2, 0}, b{1, 1}, c{0, 3};
    EXPECT_EQ(a.total(), 2);
    EXPECT_TRUE(b < a);  // same total, lexicographic
    EXPECT_TRUE(a < c);
    EXPECT_EQ(a.meet(c), (ResolutionIndex{0, 0}));
    EXPECT_TRUE((ResolutionIndex{1, 0}).dominated_by(b));
    EXPECT_FALSE(a.dominated_by(b));
    EXPECT_EQ(b.str(), "(1,1)");
}

#include "robustda/diagnostics.hpp"
#include "robustda/samplers.hpp"
#include "robustda/simulate.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace robustda;

namespace {

std::vector<double> ar1(std::size_t n, double rho, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> v(n);
    double x = z(rng) / std::sqrt(1.0 - rho * rho);
    for (auto& e : v) e = x, x = rho * x + z(rng);
    return v;
}

Matrix ar1_matrix(std::size_t n, Index q, double rho, std::uint64_t seed) {
    Matrix m(static_cast<Index>(n), q);
    for (Index c = 0; c < q; ++c) {
        const auto v = ar1(n, rho, seed + static_cast<std::uint64_t>(c));
        for (std::size_t t = 0; t < n; ++t) m(static_cast<Index>(t), c) = v[t];
    }
    return m;
}

std::span<const double> span_of(const std::vector<double>& v) { return {v.data(), v.size()}; }

// Plain loop version of the batch-means estimate.
double batch_means_reference(const std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    const std::size_t a = n / b;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    double used = 0.0;
    for (std::size_t t = 0; t < a * b; ++t) used += v[t];
    used /= static_cast<double>(a * b);
    double s = 0.0;
    for (std::size_t k = 0; k < a; ++k) {
        double m = 0.0;
        for (std::size_t t = k * b; t < (k + 1) * b; ++t) m += v[t];
        m /= static_cast<double>(b);
        s += (m - used) * (m - used);
    }
    const double sigma2 = static_cast<double>(b) * s / static_cast<double>(a - 1);
    return static_cast<double>(n) * var / sigma2;
}

// Mann-Kendall trend statistic, normal approximation without ties.
double mann_kendall_z(const std::vector<double>& v) {
    const auto n = static_cast<double>(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) s += (v[j] > v[i]) - (v[j] < v[i]);
    const double var = n * (n - 1) * (2 * n + 5) / 18.0;
    return s == 0.0 ? 0.0 : (s - (s > 0 ? 1.0 : -1.0)) / std::sqrt(var);
}

}  // namespace

TEST(EssUnivariate, MatchesLoopReference) {
    const auto v = ar1(5000, 0.7, 1);
    EXPECT_NEAR(ess_univariate(span_of(v)).value, batch_means_reference(v), 1e-9 * batch_means_reference(v));
}

TEST(EssUnivariate, IidSeriesNearLength) {
    // 1000 batches: the batch-means variance has relative sd near 0.045.
    const auto v = ar1(1000000, 0.0, 2);
    const auto e = ess_univariate(span_of(v));
    EXPECT_NEAR(e.value / 1000000.0, 1.0, 0.15);
    EXPECT_FALSE(e.degenerate);
}

TEST(EssUnivariate, Ar1HalfGivesOneThird) {
    const auto v = ar1(100000, 0.5, 3);
    EXPECT_NEAR(ess_univariate(span_of(v)).value / 100000.0, 1.0 / 3.0, 0.15 / 3.0);
}

TEST(EssUnivariate, ConstantSeriesIsDegenerate) {
    const std::vector<double> v(500, 2.5);
    const auto e = ess_univariate(span_of(v));
    EXPECT_TRUE(e.degenerate);
    EXPECT_EQ(e.value, 500.0);
}

TEST(EssUnivariate, AntitheticSeriesIsCapped) {
    const auto v = ar1(10000, -0.6, 4);
    const auto e = ess_univariate(span_of(v));
    EXPECT_TRUE(e.capped);
    EXPECT_DOUBLE_EQ(e.value, 11000.0);
}

TEST(EssUnivariate, ShortSeriesRejected) {
    const std::vector<double> v(99, 1.0);
    EXPECT_THROW(ess_univariate(span_of(v)), InsufficientData);
}

TEST(EssMultivariate, IidThreeComponents) {
    const auto e = ess_multivariate(ar1_matrix(40000, 3, 0.0, 5));
    EXPECT_NEAR(e.value / 40000.0, 1.0, 0.15);
}

TEST(EssMultivariate, OneComponentEqualsUnivariate) {
    const auto v = ar1(3000, 0.4, 6);
    const Matrix m = Eigen::Map<const Vector>(v.data(), 3000);
    EXPECT_NEAR(ess_multivariate(m).value, ess_univariate(span_of(v)).value, 1e-9 * ess_univariate(span_of(v)).value);
}

TEST(EssMultivariate, IndependentAr1Components) {
    const auto e = ess_multivariate(ar1_matrix(100000, 3, 0.5, 7));
    EXPECT_NEAR(e.value / 100000.0, 1.0 / 3.0, 0.2 / 3.0);
}

TEST(EssMultivariate, TooManyComponentsRejected) {
    EXPECT_THROW(ess_multivariate(ar1_matrix(200, 11, 0.0, 8)), InsufficientData);
    EXPECT_NO_THROW(ess_multivariate(ar1_matrix(200, 10, 0.0, 8)));
}

TEST(EssMultivariate, AffineInvariance) {
    const Matrix f = ar1_matrix(20000, 3, 0.6, 9);
    Matrix a(3, 3);
    a << 2, 0.3, -1, 0, 1.5, 0.7, 0.2, 0, 0.9;
    const Eigen::RowVectorXd shift = (Eigen::RowVectorXd(3) << 10, -4, 0.5).finished();
    const Matrix g = (f * a.transpose()).rowwise() + shift;
    const double base = ess_multivariate(f).value;
    EXPECT_NEAR(ess_multivariate(g).value, base, 1e-9 * base);
}

TEST(EssMultivariate, IndependentComponentsGiveGeometricMean) {
    Matrix f(50000, 2);
    f.col(0) = ar1_matrix(50000, 1, 0.0, 10);
    f.col(1) = ar1_matrix(50000, 1, 0.8, 11);
    const double joint = ess_multivariate(f).value;
    const Vector c0 = f.col(0), c1 = f.col(1);
    const double e0 = ess_univariate({c0.data(), 50000}).value, e1 = ess_univariate({c1.data(), 50000}).value;
    // Independent components: joint is the geometric mean of the marginals.
    EXPECT_NEAR(joint, std::sqrt(e0 * e1), 0.05 * joint);
}

TEST(Functionals, NamesAndOrdering) {
    EXPECT_EQ(functional_names(2, 2), (std::vector<std::string>{"B11", "B21", "B12", "B22", "S11", "S21", "S22"}));
    ChainOutput out;
    Matrix b(2, 2), s(2, 2);
    b << 1, 2, 3, 4;
    s << 5, 2, 2, 7;
    out.states.push_back(RegressionState(b, s));
    const Matrix f = functional_matrix(out);
    EXPECT_EQ(f.row(0), (Eigen::RowVectorXd(7) << 1, 3, 2, 4, 5, 2, 7).finished());
}

TEST(Compare, AntisymmetricAndZeroOnIdenticalChains) {
    const Dataset data = apply_structure(simulate_dataset(SimulationBlock{}), complete_rows_structure(50, 2, 45));
    DaConfig da;
    da.iterations = 2000;
    DaiConfig dai;
    dai.iterations = 2000;
    dai.k_prime = MissingStructure::all_observed(50, 2);
    const auto a = run_da(data, Prior::jeffreys(2), family::Gamma{2, 2}, da, default_initial_state(data));
    const auto b = run_dai(data, Prior::jeffreys(2), family::Gamma{2, 2}, dai, default_initial_state(data));
    const auto ab = compare_da_dai(a, b), ba = compare_da_dai(b, a), aa = compare_da_dai(a, a);
    ASSERT_EQ(ab.functionals.size(), 7u);
    for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_EQ(ab.functionals[c].difference, -ba.functionals[c].difference);
        EXPECT_EQ(ab.functionals[c].sign, -ba.functionals[c].sign);
        EXPECT_EQ(aa.functionals[c].difference, 0.0);
        EXPECT_EQ(aa.functionals[c].sign, 0);
    }
    EXPECT_EQ(ab.joint.difference, -ba.joint.difference);
    EXPECT_EQ(aa.joint.sign, 0);
}

TEST(Compare, MedianAcrossReplications) {
    EXPECT_EQ(detail::median({3, 1, 2}), 2.0);
    EXPECT_EQ(detail::median({4, 1, 2, 3}), 2.5);
}

TEST(Compare, RejectsMismatchedSets) {
    std::vector<ChainOutput> one(1), two(2);
    EXPECT_THROW(compare_da_dai(one, two), InvalidArgument);
}

TEST(DriftTrace, PositiveAndTrendFreeOnStationaryChain) {
    // Burn-in removes the transient.
    const Dataset data = apply_structure(simulate_dataset(SimulationBlock{}), complete_rows_structure(50, 2, 45));
    DaConfig cfg;
    cfg.iterations = 1500;
    cfg.burn_in = 500;
    cfg.seed = 12;
    const auto out = run_da(data, Prior::jeffreys(2), family::PointMass{1.0}, cfg, default_initial_state(data));
    const auto trace = drift_trace(out, data);
    ASSERT_EQ(trace.size(), 1000u);
    for (double v : trace) ASSERT_GT(v, 0.0);
    EXPECT_LT(std::abs(mann_kendall_z(trace)), 3.0);
}

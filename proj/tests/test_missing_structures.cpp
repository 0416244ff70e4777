#include "robustda/missing.hpp"
#include "robustda/simulate.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace robustda;

namespace {

Mask mask_from(std::initializer_list<std::initializer_list<int>> rows) {
    Mask m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (int v : r) m(i, j++) = v != 0;
        ++i;
    }
    return m;
}

// Reference monotone check written directly from the definition: an
// observed (i, j) forces every (i', j') with i' <= i and j' >= j observed,
// and the last column is complete.
bool monotone_by_definition(const Mask& k) {
    const Index n = k.rows(), d = k.cols();
    for (Index i = 0; i < n; ++i)
        if (!k(i, d - 1)) return false;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j)
            if (k(i, j))
                for (Index a = 0; a <= i; ++a)
                    for (Index b = j; b < d; ++b)
                        if (!k(a, b)) return false;
    return true;
}

Mask random_monotone(Index n, Index d, std::mt19937_64& rng) {
    std::uniform_int_distribution<Index> start(0, d - 1);
    std::vector<Index> s(static_cast<std::size_t>(n));
    for (auto& v : s) v = start(rng);
    std::sort(s.begin(), s.end());
    Mask m = Mask::Constant(n, d, false);
    for (Index i = 0; i < n; ++i)
        for (Index j = s[static_cast<std::size_t>(i)]; j < d; ++j) m(i, j) = true;
    return m;
}

Dataset random_dataset(const Mask& m, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix y(m.rows(), m.cols()), x(m.rows(), p);
    for (Index i = 0; i < m.rows(); ++i) {
        x(i, 0) = 1.0;
        for (Index k = 1; k < p; ++k) x(i, k) = z(rng);
        for (Index j = 0; j < m.cols(); ++j) y(i, j) = z(rng);
    }
    return Dataset(y, m, x);
}

// n = 50, d = 2, p = 2 layout with `complete` fully observed rows.
Dataset design_dataset(Index complete, std::uint64_t seed = 2024) {
    SimulationBlock b;
    b.seed = seed;
    return apply_structure(simulate_dataset(b), complete_rows_structure(50, 2, complete));
}

}  // namespace

TEST(MissingStructure, RejectsEmptyRow) {
    EXPECT_THROW(MissingStructure(mask_from({{1, 1}, {0, 0}})), StructureError);
}

TEST(IsMonotone, AllObservedIsMonotone) {
    for (Index n : {1, 3, 10})
        for (Index d : {1, 2, 5}) EXPECT_TRUE(is_monotone(MissingStructure::all_observed(n, d)));
}

TEST(IsMonotone, StaircaseIsMonotone) {
    EXPECT_TRUE(is_monotone(MissingStructure(mask_from({{1, 1, 1}, {1, 1, 1}, {0, 1, 1}, {0, 0, 1}}))));
}

TEST(IsMonotone, MissingLastColumnIsNotMonotone) {
    EXPECT_FALSE(is_monotone(MissingStructure(mask_from({{1, 1}, {1, 0}}))));
}

TEST(IsMonotone, AgreesWithDefinitionOnRandomMasks) {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.7);
    for (int rep = 0; rep < 500; ++rep) {
        const Index n = 1 + rep % 6, d = 1 + rep % 4;
        Mask m(n, d);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < d; ++j) m(i, j) = coin(rng);
            m(i, rep % d) = true;
        }
        EXPECT_EQ(is_monotone(MissingStructure(m)), monotone_by_definition(m));
    }
}

TEST(TryMonotonize, AlreadyMonotoneGivesIdentity) {
    const auto dec = try_monotonize(MissingStructure(mask_from({{1, 1}, {0, 1}})));
    ASSERT_TRUE(dec);
    EXPECT_TRUE(dec->identity_permutations());
}

TEST(TryMonotonize, ShuffledRowsAreRecovered) {
    const Mask m = mask_from({{0, 1}, {1, 1}, {0, 1}, {1, 1}});
    const auto dec = try_monotonize(MissingStructure(m));
    ASSERT_TRUE(dec);
    EXPECT_TRUE(monotone_by_definition(detail::permuted_mask(m, dec->row_permutation, dec->column_permutation)));
    EXPECT_EQ(dec->n_per_pattern, (std::vector<Index>{2, 2}));
}

TEST(TryMonotonize, AntiDiagonalHasNoArrangement) {
    const Mask m = mask_from({{0, 1}, {1, 0}});
    // Exhaustive oracle over all 2! * 2! permutations.
    bool any = false;
    std::vector<Index> rows{0, 1};
    do {
        std::vector<Index> cols{0, 1};
        do {
            any = any || monotone_by_definition(detail::permuted_mask(m, rows, cols));
        } while (std::next_permutation(cols.begin(), cols.end()));
    } while (std::next_permutation(rows.begin(), rows.end()));
    EXPECT_FALSE(any);
    EXPECT_FALSE(try_monotonize(MissingStructure(m)));
}

TEST(TryMonotonize, RecoversScrambledMonotoneMasks) {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 1 + static_cast<Index>(rng() % 12), d = 1 + static_cast<Index>(rng() % 5);
        const Mask m = random_monotone(n, d, rng);
        std::vector<Index> rows = detail::identity_order(n), cols = detail::identity_order(d);
        std::shuffle(rows.begin(), rows.end(), rng);
        std::shuffle(cols.begin(), cols.end(), rng);
        const Mask scrambled = detail::permuted_mask(m, rows, cols);
        const auto dec = try_monotonize(MissingStructure(scrambled));
        ASSERT_TRUE(dec) << "case " << rep;
        const Mask back = detail::permuted_mask(scrambled, dec->row_permutation, dec->column_permutation);
        EXPECT_TRUE(monotone_by_definition(back)) << "case " << rep;
        Index total = 0;
        for (auto c : dec->n_per_pattern) total += c;
        EXPECT_EQ(total, n);
    }
}

TEST(Decompose, SinglePatternIsWholeData) {
    const Dataset data = random_dataset(Mask::Constant(6, 2, true), 2, 1);
    const auto dec = decompose(MissingStructure::of(data), data);
    EXPECT_EQ(dec.cumulative, (std::vector<Index>{6, 6}));
    EXPECT_TRUE(dec.y_blocks[0].isApprox(data.y()));
    EXPECT_TRUE(dec.x_blocks[0].isApprox(data.x()));
}

TEST(Decompose, DesignPatternTwoIsLastColumn) {
    const Dataset data = design_dataset(45);
    const auto dec = decompose(MissingStructure::of(data), data);
    EXPECT_EQ(dec.n_per_pattern, (std::vector<Index>{45, 5}));
    ASSERT_EQ(dec.y_blocks[1].rows(), 50);
    ASSERT_EQ(dec.y_blocks[1].cols(), 1);
    EXPECT_EQ(dec.y_blocks[1], data.y().col(1));
    EXPECT_EQ(dec.y_blocks[0].rows(), 45);
}

TEST(Decompose, CumulativeCounts) {
    const Mask m = mask_from({{1, 1}, {1, 1}, {0, 1}});
    const auto dec = decompose(MissingStructure(m), random_dataset(m, 1, 2));
    EXPECT_EQ(dec.cumulative, (std::vector<Index>{2, 3}));
    EXPECT_EQ(dec.pattern_of_row, (std::vector<int>{1, 1, 2}));
}

TEST(Decompose, NonMonotoneThrows) {
    const Mask m = mask_from({{0, 1}, {1, 1}});
    EXPECT_THROW(decompose(MissingStructure(m), random_dataset(m, 1, 2)), StructureError);
}

TEST(CheckH1, DesignSetupPasses) {
    const Dataset data = design_dataset(45);
    const auto dec = decompose(MissingStructure::of(data), data);
    const auto rep = check_h1(dec, data, Prior::jeffreys(2));
    EXPECT_TRUE(rep.pass);
    ASSERT_EQ(rep.patterns.size(), 2u);
    // Pattern 1: rank(y_(k,1) : x_(k,1)) on a 45 x 4 matrix must be p + d = 4.
    EXPECT_EQ(rep.patterns[0].required_rank, 4);
    EXPECT_EQ(rep.patterns[0].rank, 4);
    EXPECT_EQ(rep.patterns[1].required_rank, 3);
    EXPECT_EQ(rep.patterns[0].df, 45 - 1 + 2 - 2 - 2 + 1);
    EXPECT_EQ(rep.patterns[1].df, 50 - 2 + 2 - 2 - 2 + 1);
}

TEST(CheckH1, CountBoundaryIsStrict) {
    // p = 1, d = 2, m = 0: pattern 1 needs N_1 > 1 + 2 - 0 + 0 = 3.
    const Mask m = mask_from({{1, 1}, {1, 1}, {1, 1}, {0, 1}, {0, 1}});
    const Dataset data = random_dataset(m, 1, 4);
    const auto dec = decompose(MissingStructure(m), data);
    const Prior prior(0.0, Matrix::Zero(2, 2));
    const auto rep = check_h1(dec, data, prior);
    EXPECT_FALSE(rep.patterns[0].count_ok);
    EXPECT_EQ(rep.patterns[0].df, 0.0);
    EXPECT_FALSE(rep.pass);
    const Prior looser(0.5, Matrix::Zero(2, 2));
    EXPECT_TRUE(check_h1(dec, data, looser).patterns[0].count_ok);
}

TEST(CheckH1, DuplicatedPredictorFailsRank) {
    Dataset base = random_dataset(Mask::Constant(10, 2, true), 2, 8);
    Matrix x(10, 3);
    x << base.x(), base.x().col(1);
    const Dataset data = Dataset::complete(base.y(), x);
    const auto dec = decompose(MissingStructure::of(data), data);
    const auto rep = check_h1(dec, data, Prior::jeffreys(2));
    EXPECT_FALSE(rep.patterns[0].rank_ok);
    EXPECT_FALSE(rep.pass);
}

TEST(CheckH1, PassImpliesPositiveDegreesOfFreedom) {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 2 + static_cast<Index>(rng() % 10), d = 1 + static_cast<Index>(rng() % 3);
        const Index p = 1 + static_cast<Index>(rng() % 2);
        const Mask m = random_monotone(n, d, rng);
        const Dataset data = random_dataset(m, p, rng());
        const double prior_m = static_cast<double>(rng() % 4);
        const auto dec = decompose(MissingStructure(m), data);
        const auto h1 = check_h1(dec, data, Prior(prior_m, Matrix::Zero(d, d)));
        for (const auto& pat : h1.patterns) EXPECT_EQ(pat.count_ok, pat.df > 0.0);
        if (h1.pass)
            for (const auto& pat : h1.patterns) EXPECT_GE(pat.df, 1.0);
    }
}

TEST(CheckH1Full, DesignCountAndBoundaries) {
    const Dataset full = random_dataset(Mask::Constant(50, 2, true), 2, 5);
    EXPECT_TRUE(check_h1_full(full, Prior::jeffreys(2)));
    // p + 2d - m - 1 with p = 2, d = 2, m = 2 is 3.
    const Dataset three = random_dataset(Mask::Constant(3, 2, true), 2, 6);
    EXPECT_FALSE(check_h1_full(three, Prior(2.0, Matrix::Zero(2, 2))));
    Matrix y(10, 2);
    y << full.y().topRows(10).col(0), 2.0 * full.y().topRows(10).col(0);
    EXPECT_FALSE(check_h1_full(Dataset::complete(y, full.x().topRows(10)), Prior::jeffreys(2)));
}

TEST(Precedes, BasicCases) {
    const MissingStructure k(mask_from({{1, 1}, {0, 1}}));
    EXPECT_TRUE(precedes(k, MissingStructure::all_observed(2, 2)));
    EXPECT_FALSE(precedes(k, k));
    const MissingStructure a(mask_from({{1, 0}, {1, 1}})), b(mask_from({{0, 1}, {1, 1}}));
    EXPECT_FALSE(precedes(a, b));
    EXPECT_FALSE(precedes(b, a));
    EXPECT_THROW(precedes(k, MissingStructure::all_observed(3, 2)), StructureError);
}

TEST(Precedes, StrictPartialOrderOnRandomTriples) {
    std::mt19937_64 rng(31);
    std::bernoulli_distribution coin(0.6);
    auto random_mask = [&] {
        Mask m(3, 2);
        for (Index i = 0; i < 3; ++i) {
            m(i, 0) = coin(rng), m(i, 1) = coin(rng);
            if (!m.row(i).any()) m(i, 1) = true;
        }
        return MissingStructure(m);
    };
    int transitive_cases = 0;
    for (int rep = 0; rep < 2000; ++rep) {
        const auto a = random_mask(), b = random_mask(), c = random_mask();
        EXPECT_FALSE(precedes(a, a));
        if (precedes(a, b)) EXPECT_FALSE(precedes(b, a));
        if (precedes(a, b) && precedes(b, c)) {
            ++transitive_cases;
            EXPECT_TRUE(precedes(a, c));
        }
    }
    EXPECT_GT(transitive_cases, 0);
}

TEST(Proposition1, MonotoneStructureIsItsOwnWitness) {
    const Dataset data = design_dataset(45);
    const auto res = check_proposition1(MissingStructure::of(data), data, Prior::jeffreys(2));
    ASSERT_TRUE(res.witness);
    EXPECT_EQ(*res.witness, MissingStructure::of(data));
    EXPECT_FALSE(res.strict);
    EXPECT_TRUE(res.h1.pass);
}

TEST(Proposition1, NonMonotoneStructureFindsStaircase) {
    // d = 3 layout with 40 complete rows, 5 rows missing y2 and 5 missing y1:
    // the two incomplete groups are incomparable, so no arrangement is
    // monotone, but dropping y1 from the rows missing y2 leaves a staircase.
    SimulationBlock b;
    b.d = 3;
    b.seed = 77;
    const Dataset full = simulate_dataset(b);
    Mask m = Mask::Constant(50, 3, true);
    for (Index i = 40; i < 45; ++i) m(i, 1) = false;
    for (Index i = 45; i < 50; ++i) m(i, 0) = false;
    const Dataset data(full.y(), m, full.x());
    const MissingStructure k(m);
    ASSERT_FALSE(try_monotonize(k));
    const auto res = check_proposition1(k, data, Prior::jeffreys(3));
    ASSERT_TRUE(res.witness);
    EXPECT_TRUE(res.strict);
    EXPECT_TRUE(precedes(*res.witness, k));
    EXPECT_TRUE(try_monotonize(*res.witness).has_value());
    EXPECT_EQ(res.witness->mask().count(), m.count() - 5);
    for (Index i = 40; i < 45; ++i) EXPECT_FALSE(res.witness->mask()(i, 0));
    EXPECT_TRUE(res.h1.pass);
}

TEST(Proposition1, NoCompleteColumnMeansNoWitness) {
    Dataset base = design_dataset(45);
    Mask m = base.observed();
    m(0, 1) = false;
    const Dataset data(base.y(), m, base.x());
    EXPECT_FALSE(check_proposition1(MissingStructure(m), data, Prior::jeffreys(2)).witness);
}

TEST(Proposition1, TinySampleHasNoWitness) {
    const Mask m = mask_from({{1, 1}, {0, 1}});
    const Dataset data = random_dataset(m, 2, 9);
    const auto res = check_proposition1(MissingStructure(m), data, Prior::jeffreys(2));
    EXPECT_FALSE(res.witness);
}

TEST(Permutation, StateRoundTrip) {
    Matrix b(2, 3), s(3, 3);
    b << 1, 2, 3, 4, 5, 6;
    s << 3, 1, 0.5, 1, 2, 0.3, 0.5, 0.3, 1;
    const RegressionState st(b, s);
    const std::vector<Index> perm{2, 0, 1};
    const RegressionState back = unpermute_state(permute_state(st, perm), perm);
    EXPECT_EQ(back.beta, b);
    EXPECT_EQ(back.sigma, s);
    EXPECT_EQ(permute_state(st, perm).beta.col(0), b.col(2));
}

#pragma once

// Missing-structure matrices: monotone detection and rearrangement, pattern
// decomposition, the per-pattern rank/count condition used by the monotone
// P step, the strict "observed subset" order, and witness search for
// sub-structures that certify the condition for any monotone superstructure.

#include "robustda/core.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace robustda {

/// n x d observation pattern (true = observed). Every row observes at least
/// one entry.
class MissingStructure {
public:
    MissingStructure() = default;
    explicit MissingStructure(Mask mask) : mask_(std::move(mask)) {
        if (mask_.rows() == 0 || mask_.cols() == 0) throw StructureError("missing structure must be non-empty");
        for (Index i = 0; i < mask_.rows(); ++i)
            if (!mask_.row(i).any())
                throw StructureError("row " + std::to_string(i + 1) + " of the missing structure is empty");
    }

    static MissingStructure all_observed(Index n, Index d) { return MissingStructure(Mask::Constant(n, d, true)); }
    static MissingStructure of(const Dataset& data) { return MissingStructure(data.observed()); }

    const Mask& mask() const { return mask_; }
    Index n() const { return mask_.rows(); }
    Index d() const { return mask_.cols(); }
    bool operator()(Index i, Index j) const { return mask_(i, j); }
    bool complete() const { return mask_.all(); }

    friend bool operator==(const MissingStructure& a, const MissingStructure& b) {
        return a.mask_.rows() == b.mask_.rows() && a.mask_.cols() == b.mask_.cols() && (a.mask_ == b.mask_).all();
    }

private:
    Mask mask_;
};

/// Staircase layout of a monotone structure. Patterns are 1-based: a row in
/// pattern l observes columns l..d and misses 1..l-1. Permutations map new
/// positions to original indices (row_permutation[i'] = original row).
struct MonotoneDecomposition {
    std::vector<int> pattern_of_row;
    std::vector<Index> n_per_pattern;
    std::vector<Index> cumulative;
    std::vector<Index> row_permutation;
    std::vector<Index> column_permutation;
    /// Materialized y_(k,l) and x_(k,l); filled by decompose() only.
    std::vector<Matrix> y_blocks;
    std::vector<Matrix> x_blocks;

    Index d() const { return static_cast<Index>(n_per_pattern.size()); }
    Index n() const { return static_cast<Index>(pattern_of_row.size()); }
    /// N_l for 1-based pattern l.
    Index rows_through(Index l) const { return cumulative[static_cast<std::size_t>(l - 1)]; }
    bool identity_permutations() const {
        for (std::size_t i = 0; i < row_permutation.size(); ++i)
            if (row_permutation[i] != static_cast<Index>(i)) return false;
        for (std::size_t j = 0; j < column_permutation.size(); ++j)
            if (column_permutation[j] != static_cast<Index>(j)) return false;
        return true;
    }
};

struct PatternH1 {
    Index pattern = 0;
    Index rows = 0;  // N_l
    Index rank = 0;
    Index required_rank = 0;
    bool rank_ok = false;
    bool count_ok = false;
    double df = 0.0;
};

struct H1Report {
    std::vector<PatternH1> patterns;
    bool pass = false;
};

/// Result of the sub-structure witness search. `witness` is expressed in the
/// original row/column order; `strict` is false when the witness equals the
/// input structure itself.
struct Proposition1Result {
    std::optional<MissingStructure> witness;
    bool strict = false;
    H1Report h1;
};

namespace detail {

inline bool mask_is_monotone(const Mask& k) {
    const Index n = k.rows(), d = k.cols();
    Index prev_start = 0;
    for (Index i = 0; i < n; ++i) {
        if (!k(i, d - 1)) return false;
        Index start = d - 1;
        while (start > 0 && k(i, start - 1)) --start;
        for (Index j = 0; j < start; ++j)
            if (k(i, j)) return false;  // observed entries must form a suffix
        if (start < prev_start) return false;
        prev_start = start;
    }
    return true;
}

inline Mask permuted_mask(const Mask& k, const std::vector<Index>& rows, const std::vector<Index>& cols) {
    Mask out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Index>(i), static_cast<Index>(j)) = k(rows[i], cols[j]);
    return out;
}

/// Sorts rows by leading-missing count under a column order; returns the row
/// order, or nullopt when some row's observed set is not a suffix.
inline std::optional<std::vector<Index>> staircase_rows(const Mask& k, const std::vector<Index>& cols) {
    const Index n = k.rows(), d = k.cols();
    std::vector<Index> lead(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Index j = 0;
        while (j < d && !k(i, cols[static_cast<std::size_t>(j)])) ++j;
        for (Index jj = j; jj < d; ++jj)
            if (!k(i, cols[static_cast<std::size_t>(jj)])) return std::nullopt;
        if (j == d) return std::nullopt;
        lead[static_cast<std::size_t>(i)] = j;
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return lead[static_cast<std::size_t>(a)] < lead[static_cast<std::size_t>(b)]; });
    return order;
}

inline MonotoneDecomposition layout_from(const Mask& monotone_mask, std::vector<Index> rows, std::vector<Index> cols) {
    const Index n = monotone_mask.rows(), d = monotone_mask.cols();
    MonotoneDecomposition dec;
    dec.row_permutation = std::move(rows);
    dec.column_permutation = std::move(cols);
    dec.n_per_pattern.assign(static_cast<std::size_t>(d), 0);
    dec.pattern_of_row.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Index start = 0;
        while (!monotone_mask(i, start)) ++start;
        dec.pattern_of_row[static_cast<std::size_t>(i)] = static_cast<int>(start + 1);
        ++dec.n_per_pattern[static_cast<std::size_t>(start)];
    }
    dec.cumulative.resize(static_cast<std::size_t>(d));
    std::partial_sum(dec.n_per_pattern.begin(), dec.n_per_pattern.end(), dec.cumulative.begin());
    return dec;
}

/// Column order used by the greedy arrangement: observed count ascending,
/// ties by original index.
inline std::vector<Index> greedy_column_order(const Mask& k) {
    std::vector<Index> cols(static_cast<std::size_t>(k.cols()));
    std::iota(cols.begin(), cols.end(), Index{0});
    std::stable_sort(cols.begin(), cols.end(), [&](Index a, Index b) { return k.col(a).count() < k.col(b).count(); });
    return cols;
}

inline std::vector<Index> identity_order(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

}  // namespace detail

/// Numerical rank via column-pivoted QR with threshold
/// max(rows, cols) * eps * (largest column norm).
inline Index numerical_rank(const Matrix& m) {
    if (m.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    // The first pivot has magnitude equal to the largest column norm, and
    // Eigen's threshold is relative to it.
    qr.setThreshold(static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon());
    return qr.rank();
}

inline bool is_monotone(const MissingStructure& ms) { return detail::mask_is_monotone(ms.mask()); }

/// Searches for row/column permutations that make the structure monotone.
///
/// Greedy first: columns by observed count ascending, rows by number of
/// leading missing entries. When that fails and d <= 8 every column
/// permutation is tried in lexicographic order.
inline std::optional<MonotoneDecomposition> try_monotonize(const MissingStructure& ms) {
    const Mask& k = ms.mask();
    const Index d = k.cols();
    if (detail::mask_is_monotone(k))
        return detail::layout_from(k, detail::identity_order(k.rows()), detail::identity_order(d));

    auto attempt = [&](const std::vector<Index>& cols) -> std::optional<MonotoneDecomposition> {
        auto rows = detail::staircase_rows(k, cols);
        if (!rows) return std::nullopt;
        Mask permuted = detail::permuted_mask(k, *rows, cols);
        if (!detail::mask_is_monotone(permuted)) return std::nullopt;
        return detail::layout_from(permuted, std::move(*rows), cols);
    };

    if (auto dec = attempt(detail::greedy_column_order(k))) return dec;
    if (d > 8) return std::nullopt;
    std::vector<Index> cols = detail::identity_order(d);
    do {
        if (auto dec = attempt(cols)) return dec;
    } while (std::next_permutation(cols.begin(), cols.end()));
    return std::nullopt;
}

/// Applies a decomposition's permutations to a dataset.
inline Dataset permute(const Dataset& data, const MonotoneDecomposition& dec) {
    const auto& rows = dec.row_permutation;
    const auto& cols = dec.column_permutation;
    Matrix y(data.n(), data.d());
    Matrix x(data.n(), data.p());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        x.row(static_cast<Index>(i)) = data.x().row(rows[i]);
        for (std::size_t j = 0; j < cols.size(); ++j) y(static_cast<Index>(i), static_cast<Index>(j)) = data.y()(rows[i], cols[j]);
    }
    return Dataset(std::move(y), detail::permuted_mask(data.observed(), rows, cols), std::move(x));
}

/// Maps a state drawn on column-permuted responses back to original order.
inline RegressionState unpermute_state(const RegressionState& s, const std::vector<Index>& column_permutation) {
    const Index d = s.sigma.rows();
    Matrix beta(s.beta.rows(), d), sigma(d, d);
    for (Index j = 0; j < d; ++j) {
        const Index oj = column_permutation[static_cast<std::size_t>(j)];
        beta.col(oj) = s.beta.col(j);
        for (Index i = 0; i < d; ++i) sigma(column_permutation[static_cast<std::size_t>(i)], oj) = s.sigma(i, j);
    }
    RegressionState out;
    out.beta = std::move(beta);
    out.sigma = std::move(sigma);
    return out;
}

/// Maps a state in original column order into the permuted order.
inline RegressionState permute_state(const RegressionState& s, const std::vector<Index>& column_permutation) {
    const Index d = s.sigma.rows();
    RegressionState out;
    out.beta.resize(s.beta.rows(), d);
    out.sigma.resize(d, d);
    for (Index j = 0; j < d; ++j) {
        const Index oj = column_permutation[static_cast<std::size_t>(j)];
        out.beta.col(j) = s.beta.col(oj);
        for (Index i = 0; i < d; ++i) out.sigma(i, j) = s.sigma(column_permutation[static_cast<std::size_t>(i)], oj);
    }
    return out;
}

/// y_(k,l): columns l..d of the first N_l rows (l is 1-based).
inline Matrix pattern_response(const MonotoneDecomposition& dec, const Dataset& data, Index l) {
    const Index rows = dec.rows_through(l);
    return data.y().block(0, l - 1, rows, data.d() - l + 1);
}

/// x_(k,l): first N_l rows of x.
inline Matrix pattern_design(const MonotoneDecomposition& dec, const Dataset& data, Index l) {
    return data.x().topRows(dec.rows_through(l));
}

/// Pattern decomposition of a structure that is already monotone in its
/// given order, with y_(k,l) and x_(k,l) materialized.
inline MonotoneDecomposition decompose(const MissingStructure& ms, const Dataset& data) {
    if (!is_monotone(ms)) throw StructureError("decompose requires a monotone missing structure");
    if (ms.n() != data.n() || ms.d() != data.d()) throw StructureError("structure shape does not match the dataset");
    auto dec = detail::layout_from(ms.mask(), detail::identity_order(ms.n()), detail::identity_order(ms.d()));
    for (Index l = 1; l <= ms.d(); ++l) {
        dec.y_blocks.push_back(pattern_response(dec, data, l));
        dec.x_blocks.push_back(pattern_design(dec, data, l));
    }
    return dec;
}

/// df_l = N_l - l + m - p - d + 1, the chi-square degrees of freedom of the
/// l-th diagonal factor in the monotone P step.
inline double pattern_degrees_of_freedom(Index cumulative_rows, Index l, double m, Index p, Index d) {
    return static_cast<double>(cumulative_rows - l) + m - static_cast<double>(p + d) + 1.0;
}

/// Per-pattern rank and count condition for a monotone structure. `data`
/// must be in the decomposition's (monotone) order.
inline H1Report check_h1(const MonotoneDecomposition& dec, const Dataset& data, const Prior& prior) {
    const Index p = data.p(), d = data.d();
    H1Report report;
    report.pass = true;
    for (Index l = 1; l <= d; ++l) {
        PatternH1 row;
        row.pattern = l;
        row.rows = dec.rows_through(l);
        row.required_rank = p + d - l + 1;
        const Index rows = row.rows;
        if (rows > 0) {
            Matrix joined(rows, d - l + 1 + p);
            joined << pattern_response(dec, data, l), pattern_design(dec, data, l);
            row.rank = numerical_rank(joined);
        }
        row.rank_ok = row.rank == row.required_rank;
        row.count_ok = static_cast<double>(rows) > static_cast<double>(p + d + l - 1) - prior.m;
        row.df = pattern_degrees_of_freedom(rows, l, prior.m, p, d);
        report.pass = report.pass && row.rank_ok && row.count_ok;
        report.patterns.push_back(row);
    }
    return report;
}

/// Complete-data form of the condition: rank(y:x) = p + d and
/// n > p + 2d - m - 1. Masked entries are read as stored.
inline bool check_h1_full(const Dataset& data, const Prior& prior) {
    const Index n = data.n(), p = data.p(), d = data.d();
    Matrix joined(n, d + p);
    joined << data.y(), data.x();
    const bool rank_ok = numerical_rank(joined) == p + d;
    const bool count_ok = static_cast<double>(n) > static_cast<double>(p + 2 * d - 1) - prior.m;
    return rank_ok && count_ok;
}

/// Strict order: k1 != k2 and every entry observed under k1 is observed under k2.
inline bool precedes(const MissingStructure& k1, const MissingStructure& k2) {
    if (k1.n() != k2.n() || k1.d() != k2.d()) throw StructureError("precedes: structures have different shapes");
    if (k1 == k2) return false;
    return ((!k1.mask()) || k2.mask()).all();
}

/// Looks for a monotone sub-structure k'' of k that satisfies the rank/count
/// condition on the observed data. The candidate is the largest staircase
/// inside k under a column arrangement (greedy order first, then every
/// column permutation when d <= 8): each row keeps the longest run of
/// observed entries ending at the last arranged column.
///
/// A missing witness does not mean the condition fails for the
/// superstructure; it means this search found no certificate.
inline Proposition1Result check_proposition1(const MissingStructure& k, const Dataset& data, const Prior& prior) {
    if (k.n() != data.n() || k.d() != data.d()) throw StructureError("structure shape does not match the dataset");
    const Mask& mask = k.mask();
    const Index n = mask.rows(), d = mask.cols();
    Proposition1Result result;

    auto try_columns = [&](const std::vector<Index>& cols) -> bool {
        std::vector<Index> start(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            Index s = d;
            while (s > 0 && mask(i, cols[static_cast<std::size_t>(s - 1)])) --s;
            if (s == d) return false;  // last arranged column missing: row cannot stay nonempty
            start[static_cast<std::size_t>(i)] = s;
        }
        std::vector<Index> rows = detail::identity_order(n);
        std::stable_sort(rows.begin(), rows.end(),
                         [&](Index a, Index b) { return start[static_cast<std::size_t>(a)] < start[static_cast<std::size_t>(b)]; });
        Mask sub_original = Mask::Constant(n, d, false);
        for (Index i = 0; i < n; ++i)
            for (Index s = start[static_cast<std::size_t>(i)]; s < d; ++s) sub_original(i, cols[static_cast<std::size_t>(s)]) = true;
        Mask arranged = detail::permuted_mask(sub_original, rows, cols);
        auto dec = detail::layout_from(arranged, rows, cols);
        const Dataset permuted = permute(data, dec);
        const Dataset arranged_data(permuted.y(), arranged, permuted.x());
        auto h1 = check_h1(dec, arranged_data, prior);
        if (!h1.pass) {
            if (result.h1.patterns.empty()) result.h1 = h1;
            return false;
        }
        result.witness = MissingStructure(sub_original);
        result.strict = !(sub_original == mask).all();
        result.h1 = std::move(h1);
        return true;
    };

    if (try_columns(detail::greedy_column_order(mask))) return result;
    if (d <= 8) {
        std::vector<Index> cols = detail::identity_order(d);
        do {
            if (try_columns(cols)) return result;
        } while (std::next_permutation(cols.begin(), cols.end()));
    }
    return result;
}

}  // namespace robustda

#pragma once

// Chain diagnostics: batch-means effective sample size (univariate and
// multivariate), ESS per minute, DA-vs-DAI comparison and drift traces.

#include "robustda/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace robustda {

inline constexpr std::size_t kMinEssLength = 100;
/// Estimates above N * (1 + slack) are capped and flagged.
inline constexpr double kEssSlack = 0.10;

struct EssEstimate {
    double value = 0.0;
    bool degenerate = false;
    bool capped = false;
};

namespace detail {

inline std::size_t batch_size(std::size_t n) {
    return static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
}

inline EssEstimate finalize_ess(double raw, std::size_t n) {
    EssEstimate e;
    const double cap = static_cast<double>(n) * (1.0 + kEssSlack);
    e.value = raw;
    if (raw > cap) e.value = cap, e.capped = true;
    return e;
}

/// Sample covariance (N - 1 denominator) and batch-means long-run covariance
/// of the rows of `series` (N x q).
inline std::pair<Matrix, Matrix> covariances(const Matrix& series) {
    const auto n = static_cast<std::size_t>(series.rows());
    const Index q = series.cols();
    const Eigen::RowVectorXd mean = series.colwise().mean();
    const Matrix centered = series.rowwise() - mean;
    Matrix lambda = centered.transpose() * centered / static_cast<double>(n - 1);

    const std::size_t b = batch_size(n);
    const std::size_t a = n / b;
    const Eigen::RowVectorXd used_mean = series.topRows(static_cast<Index>(a * b)).colwise().mean();
    Matrix bm = Matrix::Zero(q, q);
    for (std::size_t k = 0; k < a; ++k) {
        const Eigen::RowVectorXd diff =
            series.middleRows(static_cast<Index>(k * b), static_cast<Index>(b)).colwise().mean() - used_mean;
        bm += diff.transpose() * diff;
    }
    bm *= static_cast<double>(b) / static_cast<double>(a - 1);
    return {std::move(lambda), std::move(bm)};
}

}  // namespace detail

/// ESS = N * (sample variance) / (batch-means asymptotic variance), batch
/// size floor(sqrt(N)). A zero-variance series is flagged and reported as N.
inline EssEstimate ess_univariate(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < kMinEssLength) throw InsufficientData("ESS needs at least 100 draws (got " + std::to_string(n) + ")");
    const Matrix m = Eigen::Map<const Vector>(series.data(), static_cast<Index>(n));
    const auto [lambda, bm] = detail::covariances(m);
    if (!(lambda(0, 0) > 0.0) || !(bm(0, 0) > 0.0)) return {static_cast<double>(n), true, false};
    return detail::finalize_ess(static_cast<double>(n) * lambda(0, 0) / bm(0, 0), n);
}

/// Multivariate ESS = N * (det Lambda / det Sigma_bm)^{1/q} for an N x q
/// series. A near-singular batch-means matrix is regularized on its diagonal
/// before taking the determinant.
inline EssEstimate ess_multivariate(const Matrix& series) {
    const auto n = static_cast<std::size_t>(series.rows());
    const Index q = series.cols();
    if (q < 1) throw InvalidArgument("ess_multivariate needs at least one component");
    if (n < kMinEssLength) throw InsufficientData("ESS needs at least 100 draws (got " + std::to_string(n) + ")");
    if (static_cast<double>(q) > static_cast<double>(n) / 20.0)
        throw InsufficientData("ess_multivariate: " + std::to_string(q) + " components need at least " +
                               std::to_string(20 * q) + " draws");
    auto [lambda, bm] = detail::covariances(series);

    auto log_det = [](const Matrix& m) -> std::optional<double> {
        auto l = linalg::try_cholesky(m);
        if (!l) return std::nullopt;
        return 2.0 * l->diagonal().array().log().sum();
    };
    const auto ld_lambda = log_det(lambda);
    if (!ld_lambda) return {static_cast<double>(n), true, false};
    auto ld_bm = log_det(bm);
    if (!ld_bm) {
        const double ridge = 1e-10 * std::max(bm.trace() / static_cast<double>(q), 1e-300);
        ld_bm = log_det(bm + ridge * Matrix::Identity(q, q));
        if (!ld_bm) return {static_cast<double>(n), true, false};
    }
    const double raw = static_cast<double>(n) * std::exp((*ld_lambda - *ld_bm) / static_cast<double>(q));
    return detail::finalize_ess(raw, n);
}

// ---------------------------------------------------------------------------
// Chain-level reports.

/// Tracked functionals: B entries column-major (B11, B21, ..., B12, ...) then
/// the lower triangle of Sigma column-major (S11, S21, ..., S22, ...).
inline std::vector<std::string> functional_names(Index p, Index d) {
    std::vector<std::string> names;
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < p; ++i) names.push_back("B" + std::to_string(i + 1) + std::to_string(j + 1));
    for (Index j = 0; j < d; ++j)
        for (Index i = j; i < d; ++i) names.push_back("S" + std::to_string(i + 1) + std::to_string(j + 1));
    return names;
}

/// N x (pd + d(d+1)/2) matrix of tracked functionals.
inline Matrix functional_matrix(const ChainOutput& out) {
    if (out.states.empty()) throw InsufficientData("chain has no recorded states");
    const Index p = out.states.front().beta.rows(), d = out.states.front().sigma.rows();
    const Index q = p * d + d * (d + 1) / 2;
    Matrix m(static_cast<Index>(out.states.size()), q);
    for (std::size_t t = 0; t < out.states.size(); ++t) {
        const auto& s = out.states[t];
        Index c = 0;
        for (Index j = 0; j < d; ++j)
            for (Index i = 0; i < p; ++i) m(static_cast<Index>(t), c++) = s.beta(i, j);
        for (Index j = 0; j < d; ++j)
            for (Index i = j; i < d; ++i) m(static_cast<Index>(t), c++) = s.sigma(i, j);
    }
    return m;
}

struct EssReport {
    std::vector<std::string> names;
    std::vector<EssEstimate> univariate;
    EssEstimate joint;
    std::size_t draws = 0;
    double minutes = 0.0;

    /// ESS per minute of sampling; infinite when no time was recorded.
    double per_minute(double ess) const {
        return minutes > 0.0 ? ess / minutes : std::numeric_limits<double>::infinity();
    }
};

inline EssReport ess_report(const ChainOutput& out) {
    EssReport r;
    const Matrix f = functional_matrix(out);
    const Index p = out.states.front().beta.rows(), d = out.states.front().sigma.rows();
    r.names = functional_names(p, d);
    r.draws = out.states.size();
    r.minutes = out.meta.minutes();
    for (Index c = 0; c < f.cols(); ++c) {
        const Vector col = f.col(c);
        r.univariate.push_back(ess_univariate(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
    }
    r.joint = ess_multivariate(f);
    return r;
}

struct FunctionalComparison {
    std::string name;
    double first = 0.0;   // median ESS of the first set of chains
    double second = 0.0;  // median ESS of the second set
    double difference = 0.0;
    int sign = 0;
};

struct ComparisonReport {
    std::vector<FunctionalComparison> functionals;
    FunctionalComparison joint;
    std::size_t replications = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline FunctionalComparison compare_values(std::string name, double a, double b) {
    FunctionalComparison c{std::move(name), a, b, a - b, 0};
    c.sign = (c.difference > 0.0) - (c.difference < 0.0);
    return c;
}

}  // namespace detail

/// Per-functional and joint ESS of two sets of chains (typically DA first,
/// DAI second), aggregated by the median over replications. Swapping the
/// arguments negates every difference.
inline ComparisonReport compare_da_dai(std::span<const ChainOutput> first, std::span<const ChainOutput> second) {
    if (first.empty() || first.size() != second.size())
        throw InvalidArgument("compare_da_dai needs the same positive number of chains on both sides");
    std::vector<EssReport> ra, rb;
    for (const auto& c : first) ra.push_back(ess_report(c));
    for (const auto& c : second) rb.push_back(ess_report(c));
    for (std::size_t k = 0; k < first.size(); ++k)
        if (ra[k].draws != rb[k].draws) throw InvalidArgument("compare_da_dai: chains differ in length");

    ComparisonReport out;
    out.replications = first.size();
    const std::size_t q = ra.front().names.size();
    for (std::size_t c = 0; c < q; ++c) {
        std::vector<double> va, vb;
        for (std::size_t k = 0; k < ra.size(); ++k) {
            va.push_back(ra[k].univariate[c].value);
            vb.push_back(rb[k].univariate[c].value);
        }
        out.functionals.push_back(detail::compare_values(ra.front().names[c], detail::median(va), detail::median(vb)));
    }
    std::vector<double> ja, jb;
    for (std::size_t k = 0; k < ra.size(); ++k) ja.push_back(ra[k].joint.value), jb.push_back(rb[k].joint.value);
    out.joint = detail::compare_values("joint", detail::median(ja), detail::median(jb));
    return out;
}

inline ComparisonReport compare_da_dai(const ChainOutput& first, const ChainOutput& second) {
    return compare_da_dai(std::span<const ChainOutput>(&first, 1), std::span<const ChainOutput>(&second, 1));
}

/// V(B(t), Sigma(t)) for every recorded state.
inline std::vector<double> drift_trace(const ChainOutput& out, const Dataset& data) {
    std::vector<double> trace;
    trace.reserve(out.states.size());
    for (const auto& s : out.states) trace.push_back(drift_value(s, data));
    return trace;
}

}  // namespace robustda
